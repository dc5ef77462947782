"""Command-line front end: sweep, single-trial inspection, and selftest."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import ConfigError, resolve_config, run, run_trial
from .refiners import ConstraintError
from .sequences import build_gi, generate_mseq

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSTRAINT = 3


def _read_config_file(path: str) -> dict:
    """Flat key=value lines; blank lines and # comments are ignored."""
    out: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
                key, _, value = stripped.partition("=")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return out


def _gather_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.config:
        overrides.update(_read_config_file(args.config))
    # command-line flags win over file values
    for key, attr in (
        ("preset", "preset"),
        ("estimator", "estimator"),
        ("snr_db", "snr"),
        ("trials", "trials"),
        ("iterations", "iterations"),
        ("seed", "seed"),
        ("out", "out"),
        ("threads", "threads"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = val
    return overrides


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--preset", help="parameter preset: desk or dtmb")
    p.add_argument("--estimator", help="genie, pn, ma1d, ma2d, wiener1d or wiener2x1d")
    p.add_argument("--snr", help="SNR grid in dB, comma separated")
    p.add_argument("--trials", type=int, help="Monte-Carlo realizations per SNR point")
    p.add_argument("--iterations", type=int, help="estimate-rebuild-combine rounds")
    p.add_argument("--seed", type=int, help="master seed for all randomness")
    p.add_argument("--out", help="CSV output path (JSON sidecar goes next to it)")
    p.add_argument("--threads", type=int, help="worker threads across (snr, trial) shards")


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(_gather_overrides(args))
    rows = run(cfg)
    if not cfg.out:
        from .harness import CSV_HEADER

        print(CSV_HEADER)
        for r in rows:
            print(
                f"{r.snr_db:g},{r.estimator},{r.iteration},"
                f"{r.mse_empirical:.10e},{r.eps_analytic:.10e},{r.ber_uncoded:.10e},"
                f"{r.trials},{r.wall_time_s:.1f}"
            )
    else:
        print(f"wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK


def _cmd_trial(args: argparse.Namespace) -> int:
    overrides = _gather_overrides(args)
    overrides["trials"] = 1
    cfg = resolve_config(overrides)
    snr = cfg.snr_db[0]
    profile = cfg.profile()
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gi = build_gi(
            generate_mseq(cfg.pn_order, cfg.pn_poly, cfg.pn_seed),
            cfg.gi_len,
            cfg.pn_power_boost,
            expected_cir_len=profile.length,
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0, 0)))
    res = run_trial(cfg, gi, profile, snr, rng)

    print(f"preset={cfg.preset} channel={cfg.channel} estimator={cfg.estimator} snr_db={snr:g}")
    print(f"fft_size={cfg.fft_size} gi_len={cfg.gi_len} cir_len={cfg.cir_len} seed={cfg.seed}")
    print("iter    mse_empirical    eps_analytic     ber_uncoded")
    for it in range(res["mse"].size):
        print(
            f"{it:4d}    {res['mse'][it]:.7e}    {res['eps'][it]:.7e}    {res['ber'][it]:.7e}"
        )
    if res["h2_mse"].size:
        print("refined stage (before combining):")
        for it in range(res["h2_mse"].size):
            print(f"{it + 1:4d}    {res['h2_mse'][it]:.7e}    {res['h2_eps'][it]:.7e}")
    return EXIT_OK


def _cmd_selftest(_args: argparse.Namespace) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tdsofdm",
        description="TDS-OFDM link simulator with PN-based and data-aided channel estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over the SNR grid")
    _add_common_flags(p_sweep)
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_trial = sub.add_parser("trial", help="run one trial and dump per-iteration metrics")
    _add_common_flags(p_trial)
    p_trial.set_defaults(handler=_cmd_trial)

    p_self = sub.add_parser("selftest", help="quick invariant checks, no arguments")
    p_self.set_defaults(handler=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstraintError as exc:
        print(f"constraint error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
