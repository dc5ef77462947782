"""Link-level TDS-OFDM simulation: PN-based and data-aided channel estimation."""

__version__ = "0.1.0"

from .sequences import PRIMITIVE_POLYS, PnSequence, build_gi, generate_mseq
from .modulation import Constellation, constellation, hard_decisions, map_bits
from .channel import (
    ChannelRealization,
    PowerDelayProfile,
    cfr,
    coherence_bandwidth,
    doppler_frequency,
    preset_profile,
    r_f,
    r_t,
    realize,
    sfn_profile,
)
from .phy import (
    FrameGrid,
    TimeSignal,
    assemble,
    equalize,
    ofdm_demodulate,
    ofdm_modulate,
    ola,
    propagate,
    remove_pn,
)
from .pn_estimator import (
    CfrEstimate,
    analytic_mse_pn,
    cir_from_cfr,
    interference_power,
    ls_pn,
    mean_interference_power,
    window_leak_variance,
)
from .soft_rebuild import (
    InstantEstimate,
    LlrGrid,
    SoftSymbolGrid,
    demap,
    instantaneous_estimate,
    soft_symbols,
    symbol_posteriors,
)
from .refiners import (
    ConstraintError,
    Refined,
    VirtualPilotPlan,
    WienerFilter,
    build_wiener,
    ma_1d,
    ma_2d,
    plan_pilots,
    wiener_1d,
    wiener_2x1d,
)
from .combiner import IterationDiag, ReceiverParams, combine, iterate
from .harness import (
    CSV_HEADER,
    ConfigError,
    ResultRow,
    SimConfig,
    genie_mode,
    resolve_config,
    run,
    run_trial,
    sidecar_path,
    write_csv,
)
