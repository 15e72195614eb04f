"""Command-line entry point for running sweeps.

Exit codes: 0 on completion, 1 on invalid configuration or arguments,
2 on I/O errors.
"""

import argparse
import sys

from . import experiments
from .system import ConfigError


def build_parser():
    p = argparse.ArgumentParser(
        prog="risbf",
        description="Monte Carlo sweeps for RIS-aided hybrid beamforming power minimization",
    )
    p.add_argument("--config", metavar="PATH",
                   help="flat key-value config file (keys: m n k f1 f2 gamma_db "
                        "noise_dbm ris_distance rho0 c eps1 eps2 seed)")
    p.add_argument("--sweep", required=True, choices=experiments.SWEEP_KINDS)
    p.add_argument("--values", metavar="CSV",
                   help="comma-separated sweep points (dB for sinr, element count "
                        "for elements, meters for distance); optional for convergence")
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--variants", metavar="CSV", default="penalty_hybrid",
                   help="comma-separated subset of: " + ",".join(experiments.VARIANTS))
    p.add_argument("--seed", type=int, default=None,
                   help="base seed (overrides the config file seed)")
    p.add_argument("--out", metavar="PATH", required=True, help="result CSV path")
    p.add_argument("--trace", metavar="PATH",
                   help="also write the first row's convergence trace CSV")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes for independent rows")
    p.add_argument("--timing", action="store_true",
                   help="record real wall-clock per row (breaks byte-for-byte "
                        "reproducibility of the output)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config, cfg_seed = experiments.load_config(args.config)
        else:
            config, cfg_seed = experiments.parse_config_text("")
        seed = args.seed if args.seed is not None else cfg_seed

        if args.values:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        elif args.sweep == "convergence":
            values = [0.0]
        else:
            print("error: --values is required for this sweep kind", file=sys.stderr)
            return 1
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        spec = experiments.SweepSpec(
            kind=args.sweep,
            values=tuple(values),
            realizations=args.realizations,
            variants=tuple(variants),
            seed=seed,
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        rows, trace = experiments.run_sweep(
            spec, config, workers=max(1, args.workers),
            measure_time=args.timing, collect_trace=bool(args.trace),
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        experiments.emit_csv(rows, args.out)
        if args.trace:
            experiments.emit_trace(trace, args.trace)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
