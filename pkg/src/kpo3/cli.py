"""Command-line front end.

``kpo3 run --config FILE`` executes the configured experiment; ``validate``
checks a file without running; ``spectrum``, ``wigner`` and ``steady`` run
the utility calculation on the model of any config.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 physics guard.
"""
import argparse
import os
import sys

from .config import load_config
from .errors import ConfigError, NumericsError, PhysicsGuardError

EXIT_CONFIG, EXIT_NUMERICS, EXIT_GUARD = 2, 3, 4


def _parser():
    ap = argparse.ArgumentParser(prog="kpo3", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "run the configured experiment"),
                        ("validate", "check a configuration without running it"),
                        ("spectrum", "quasienergies and labels for the configured model"),
                        ("wigner", "Wigner grid of a prepared, eigen- or steady state"),
                        ("steady", "steady state of the configured model and loss")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML configuration file")
        if name != "validate":
            p.add_argument("--out", help="output root (default: [output].dir, then $KPO3_OUTPUT_ROOT, then ./runs)")
            p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                           help="worker processes for sweeps (default: all cores)")
        p.add_argument("--dim-override", type=int, help="replace [numerics].dim")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.dim_override)
        if args.command == "validate":
            print(f"{args.config}: ok (experiment={cfg.experiment}, dim={cfg.numerics.dim}, "
                  f"delta/K={cfg.model.delta_over_k:.4g}, P/K={cfg.model.pump_over_k:.4g}, "
                  f"eta={cfg.model.eta:.4g})")
            return 0
        from .runner import execute

        kind = cfg.experiment if args.command == "run" else args.command
        out = execute(cfg, args.out, max(1, args.workers), kind)
        print(out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsGuardError as exc:
        print(f"physics guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
