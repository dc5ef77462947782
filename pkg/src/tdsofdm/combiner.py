"""MMSE combining of PN-based and data-aided estimates, and the receiver loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import PowerDelayProfile
from .modulation import Constellation
from .phy import FrameGrid, TimeSignal, equalize, ola, remove_pn
from .pn_estimator import (
    CfrEstimate,
    cir_from_cfr,
    ls_pn,
    mean_interference_power,
)
from .refiners import (
    VirtualPilotPlan,
    build_wiener,
    ma_1d,
    ma_2d,
    plan_pilots,
    wiener_1d,
    wiener_2x1d,
)
from .sequences import PnSequence
from .soft_rebuild import InstantEstimate, demap, instantaneous_estimate, soft_symbols

REFINERS = ("ma1d", "ma2d", "wiener1d", "wiener2x1d")

# Prebuilt Wiener filters keyed by their full design tuple; error variances
# are quantized before keying AND before building, so a cache hit and a
# rebuild give bit-identical filters regardless of scheduling.
_FILTER_CACHE: dict[tuple, object] = {}


def _quantize(v: float) -> float:
    return 0.0 if v == 0.0 else float(f"{v:.3g}")


def _freq_filter(
    plan: VirtualPilotPlan,
    profile: PowerDelayProfile | None,
    design_len: int,
    input_err_var: float,
):
    err = _quantize(input_err_var)
    if profile is not None:
        corr_key = ("profile", tuple(profile.delays.tolist()), tuple(profile.powers.tolist()))
    else:
        corr_key = ("uniform", design_len)
    key = ("freq", plan.n_fft, plan.l_f, corr_key, err)
    filt = _FILTER_CACHE.get(key)
    if filt is None:
        filt = build_wiener(
            "freq", plan, input_err_var=err, profile=profile, design_len=design_len
        )
        _FILTER_CACHE[key] = filt
    return filt


def _time_filter(plan: VirtualPilotPlan, fd_tb: float, input_err_var: float):
    err = _quantize(input_err_var)
    fdq = _quantize(fd_tb)
    key = ("time", plan.block_len, plan.l_t, fdq, err)
    filt = _FILTER_CACHE.get(key)
    if filt is None:
        filt = build_wiener("time", plan, input_err_var=err, fd_hz=fdq, tb_s=1.0)
        _FILTER_CACHE[key] = filt
    return filt


@dataclass(frozen=True)
class ReceiverParams:
    """Everything the estimation loop needs besides the received signal.

    plan_len is the measured channel length driving the pilot-spacing rules;
    design_len is the support of the uniform worst-case prior the frequency
    Wiener coefficients are precomputed for. Both fall back to cir_len when
    unset. pn_leak_var is the window_leak_variance of the deployment
    profile, folded into the PN estimate's error model.
    """

    constellation: Constellation
    noise_var: float
    cir_len: int
    iterations: int = 2
    refiner: str = "wiener1d"
    m: int = 9
    m_t: int = 2
    m_f: int = 9
    block_len: int | None = None
    plan_len: int | None = None
    design_len: int | None = None
    corr_profile: PowerDelayProfile | None = None
    pn_leak_var: float = 0.0
    fd_hz: float = 0.0
    tb_s: float = 0.0
    llr_max: float = 30.0


@dataclass
class IterationDiag:
    """Per-iteration receiver diagnostics; index 0 is the PN-only stage."""

    eps: list[float] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    h2_eps: list[float] = field(default_factory=list)
    h2_mse: list[float] = field(default_factory=list)
    z_grids: list[FrameGrid] = field(default_factory=list)


def combine(h1: CfrEstimate, h2: CfrEstimate) -> CfrEstimate:
    """Variance-weighted convex combination of two estimates.

    The weight on h1 is eps2/(eps1+eps2) and the combined MSE is the
    harmonic term eps1*eps2/(eps1+eps2); two exact inputs combine with
    equal weights.  Bins masked out of h2 fall back to h1 alone.
    """
    v1 = np.asarray(h1.values)
    v2 = np.asarray(h2.values)
    if v1.shape != v2.shape:
        raise ValueError(f"shape mismatch: {v1.shape} vs {v2.shape}")
    e1, e2 = float(h1.eps), float(h2.eps)
    if e1 < 0 or e2 < 0:
        raise ValueError("eps must be nonnegative")
    if not np.isfinite(e2):
        beta, eps = 1.0, e1
    elif not np.isfinite(e1):
        beta, eps = 0.0, e2
    elif e1 == 0.0 and e2 == 0.0:
        beta, eps = 0.5, 0.0
    else:
        beta = e2 / (e1 + e2)
        eps = e1 * e2 / (e1 + e2)
    values = beta * v1 + (1.0 - beta) * v2
    if h2.mask is not None and not h2.mask.all():
        values = np.where(h2.mask, values, v1)
    return CfrEstimate(values=values, eps=float(eps), source="combined")


def _pooled_var(per_bin_var: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return float("inf")
    return float(per_bin_var[mask].mean())


def _refine(inst: InstantEstimate, params: ReceiverParams, n_fft: int, noise_var: float) -> CfrEstimate:
    """Run the configured noise-suppression stage on an instantaneous estimate."""
    name = params.refiner
    s = inst.values.shape[0]
    if name == "ma1d":
        r = ma_1d(inst.values, params.m, mask=inst.mask, weights=inst.weights, noise_var=noise_var)
        return CfrEstimate(values=r.values, eps=r.eps, source="data_aided", mask=r.mask)
    if name == "ma2d":
        r = ma_2d(
            inst.values,
            params.m_t,
            params.m_f,
            mask=inst.mask,
            weights=inst.weights,
            noise_var=noise_var,
        )
        return CfrEstimate(values=r.values, eps=r.eps, source="data_aided", mask=r.mask)

    plan_len = params.plan_len or params.cir_len
    design_len = params.design_len or params.cir_len
    if name == "wiener1d":
        plan = plan_pilots(n_fft, plan_len, s, params.fd_hz, params.tb_s, params.m, params.m_t)
        r = ma_1d(inst.values, params.m, mask=inst.mask, weights=inst.weights, noise_var=noise_var)
        pv = r.values[..., plan.freq_idx]
        pm = r.mask[..., plan.freq_idx]
        in_var = _pooled_var(r.per_bin_var[..., plan.freq_idx], pm)
        if not np.isfinite(in_var):
            return CfrEstimate(
                values=np.zeros_like(inst.values),
                eps=float("inf"),
                source="data_aided",
                mask=np.zeros(inst.values.shape, dtype=bool),
            )
        filt = _freq_filter(plan, params.corr_profile, design_len, in_var)
        values = wiener_1d(pv, filt, pm)
        mask = np.broadcast_to(pm.any(axis=-1)[:, None], values.shape)
        return CfrEstimate(values=values, eps=filt.residual_mse, source="data_aided", mask=mask)

    if name == "wiener2x1d":
        b = params.block_len or s
        if s % b:
            raise ValueError(f"block_len {b} does not divide {s} symbols")
        fd_tb = params.fd_hz * params.tb_s
        plan = plan_pilots(n_fft, plan_len, b, params.fd_hz, params.tb_s, params.m_f, params.m_t)
        out = np.zeros_like(inst.values)
        mask = np.zeros(inst.values.shape, dtype=bool)
        eps_parts = []
        for c0 in range(0, s, b):
            sl = slice(c0, c0 + b)
            r = ma_2d(
                inst.values[sl],
                params.m_t,
                params.m_f,
                mask=inst.mask[sl],
                weights=inst.weights[sl],
                noise_var=noise_var,
            )
            grid_idx = np.ix_(plan.time_idx, plan.freq_idx)
            pv = r.values[grid_idx]
            pm = r.mask[grid_idx]
            in_var = _pooled_var(r.per_bin_var[grid_idx], pm)
            if not np.isfinite(in_var):
                eps_parts.append(float("inf"))
                continue
            ff = _freq_filter(plan, params.corr_profile, design_len, in_var)
            tf = _time_filter(plan, fd_tb, ff.residual_mse)
            out[sl] = wiener_2x1d(pv, ff, tf, pm)
            mask[sl] = True
            eps_parts.append(tf.residual_mse)
        eps = float(np.mean(eps_parts)) if eps_parts else float("inf")
        return CfrEstimate(values=out, eps=eps, source="data_aided", mask=mask)

    raise ValueError(f"unknown refiner {name!r}; expected one of {REFINERS}")


def iterate(
    rx: TimeSignal,
    gi: PnSequence,
    params: ReceiverParams,
    truth_cfr: np.ndarray | None = None,
    initial: CfrEstimate | None = None,
) -> tuple[CfrEstimate, FrameGrid, IterationDiag]:
    """Run the full estimation loop on one received frame.

    Iteration 0 is the PN LS stage alone; each further iteration removes the
    guard with the current estimate, equalizes, rebuilds soft symbols,
    re-estimates, refines, and combines with the PN estimate.  The reported
    grid of each iteration is equalized with that iteration's final estimate
    after refreshing the guard removal with it.

    truth_cfr feeds diagnostics only; initial, when given, replaces the PN
    LS stage (exact-start and genie studies).
    """
    c = params.constellation
    nu = gi.nu
    s, row = rx.blocks.shape
    n = row - nu
    if n <= 0:
        raise ValueError("blocks shorter than the guard interval")

    if initial is not None:
        h1 = initial
    else:
        cores = rx.blocks[:, gi.core_offset : gi.core_offset + gi.n_pn]
        # channel tails beyond the core offset act as extra white noise in
        # the correlation window; fold them into the LS error model
        h1 = ls_pn(cores, gi, params.cir_len, params.noise_var + params.pn_leak_var, n)
        if h1.values.ndim == 1:
            h1 = CfrEstimate(values=np.tile(h1.values, (s, 1)), eps=h1.eps, source="pn")

    est = h1
    diag = IterationDiag()
    boost = (n + nu) / n
    y = None
    z = None
    for it in range(params.iterations + 1):
        if it > 0:
            tap_err = np.full(params.cir_len, est.eps / params.cir_len)
            sigma_eff = boost * params.noise_var + mean_interference_power(gi, tap_err, n)
            llr = demap(z, est.values, sigma_eff, c, params.llr_max)
            soft = soft_symbols(llr, c)
            inst = instantaneous_estimate(soft, y, c)
            h2 = _refine(inst, params, n, sigma_eff)
            diag.h2_eps.append(h2.eps)
            if truth_cfr is not None:
                diag.h2_mse.append(float(np.mean(np.abs(h2.values - truth_cfr) ** 2)))
            est = combine(h1, h2)

        cir = cir_from_cfr(est.values, params.cir_len)
        cleaned = remove_pn(rx, gi, cir)
        y = ola(cleaned)
        z = equalize(y, est.values)
        diag.eps.append(est.eps)
        diag.z_grids.append(z)
        if truth_cfr is not None:
            diag.mse.append(float(np.mean(np.abs(est.values - truth_cfr) ** 2)))

    return est, z, diag
