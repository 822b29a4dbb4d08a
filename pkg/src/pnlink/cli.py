"""Command-line interface: BER sweeps and the formula-variant selftest."""

import argparse
import sys
from dataclasses import replace

from .config import SimConfig, load_config_file
from .harness import (
    ALGORITHMS,
    ExperimentSpec,
    run_experiment,
    run_selftest,
    write_csv,
)

DEFAULT_SNR_SWEEP = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0)
DEFAULT_BETA_SWEEP = (25.0, 50.0, 100.0, 200.0, 400.0)


def _float_list(text: str):
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--subframes", type=int, default=50,
                        help="Monte-Carlo subframes per sweep point")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--beta", default=None,
                        help="oscillator linewidth in Hz (list for sweep-beta)")
    parser.add_argument("--snr", default=None,
                        help="SNR in dB (list for sweep-snr)")
    parser.add_argument("--algorithms", default=",".join(ALGORITHMS),
                        help=f"comma list from {{{','.join(ALGORITHMS)}}}")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes for the trial pool")
    parser.add_argument("--out", default=None, help="output CSV path")


def _base_config(args) -> SimConfig:
    cfg = SimConfig()
    if args.config:
        cfg = load_config_file(args.config, base=cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _spec(args, sweep_name: str, sweep_values, cfg: SimConfig) -> ExperimentSpec:
    algs = tuple(tok for tok in args.algorithms.replace(",", " ").split())
    return ExperimentSpec(
        sweep_name=sweep_name,
        sweep_values=tuple(sweep_values),
        config=cfg,
        n_subframes=args.subframes,
        algorithms=algs,
        master_seed=cfg.seed,
        workers=args.workers,
    )


def _emit(records, spec, out):
    for r in records:
        print(
            f"{r.sweep_name}={r.sweep_value:g} {r.algorithm:>10s} "
            f"ber={r.ber:.4e} errors={r.errors} bits={r.bits} "
            f"erasures={r.erasures} t={r.walltime_s:.1f}s"
        )
    if out:
        write_csv(records, out, spec)
        print(f"wrote {out}")


def cmd_sweep_snr(args) -> int:
    cfg = _base_config(args)
    if args.beta is not None:
        cfg = replace(cfg, beta=float(args.beta))
    values = _float_list(args.snr) if args.snr else DEFAULT_SNR_SWEEP
    spec = _spec(args, "snr_db", values, cfg)
    _emit(run_experiment(spec), spec, args.out)
    return 0


def cmd_sweep_beta(args) -> int:
    cfg = _base_config(args)
    if args.snr is not None:
        cfg = replace(cfg, snr_db=float(args.snr))
    values = _float_list(args.beta) if args.beta else DEFAULT_BETA_SWEEP
    spec = _spec(args, "beta", values, cfg)
    _emit(run_experiment(spec), spec, args.out)
    return 0


def cmd_sweep_iters(args) -> int:
    cfg = _base_config(args)
    if args.beta is not None:
        cfg = replace(cfg, beta=float(args.beta))
    if args.snr is not None:
        cfg = replace(cfg, snr_db=float(args.snr))
    args.algorithms = "ide"
    spec = _spec(args, "iterations", range(1, cfg.max_iter + 1), cfg)
    _emit(run_experiment(spec), spec, args.out)
    return 0


def cmd_selftest(args) -> int:
    cfg = _base_config(args)
    report = run_selftest(cfg)
    for check in report.checks:
        print(f"beta={check.beta:g} Hz:")
        print(f"  measured ICI power        : {check.empirical_ici:.6e}")
        print(f"  measured CPE power deficit: {check.empirical_cpe_deficit:.6e}")
        for v in ("nc", "nt"):
            print(
                f"  variant {v}: ici={check.ici_by_variant[v]:.6e} "
                f"({'PASS' if check.ici_pass[v] else 'MISS'})  "
                f"cpe_deficit={check.cpe_by_variant[v]:.6e} "
                f"({'PASS' if check.cpe_pass[v] else 'MISS'})"
            )
    print(f"selected variant: {report.selected_variant} "
          f"({'PASS' if report.selected_ok else 'MISS'})")
    if not report.ok:
        print("selftest FAILED: no closed-form variant matches measurement")
        return 1
    if args.out:
        spec = _spec(args, "snr_db", _float_list(args.snr) if args.snr
                     else (20.0, 30.0), cfg)
        _emit(run_experiment(spec), spec, args.out)
    print("selftest OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnlink",
        description="Phase-noise-aware LTE downlink link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("sweep-snr", cmd_sweep_snr, "BER vs SNR at fixed linewidth"),
        ("sweep-beta", cmd_sweep_beta, "BER vs oscillator linewidth at fixed SNR"),
        ("sweep-iters", cmd_sweep_iters, "IDE BER vs iteration count"),
        ("selftest", cmd_selftest, "validate closed-form variants; optional fixture CSV"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
