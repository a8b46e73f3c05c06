"""Command line interface: `besov-rto run | sweep | diagnose`.

A run is configured by a JSON document; individual flags override the
file.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .diagnostics import DegenerateChainError, InsufficientSamplesError
from .rto import ChainError, SingularJacobianError
from .runner import RunConfig, discretization_sweep, recompute_stats, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    ChainError,
    SingularJacobianError,
    DegenerateChainError,
    InsufficientSamplesError,
    FloatingPointError,
)


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--problem", choices=("inpainting", "deconvolution", "ct"))
    parser.add_argument("--n", type=int, help="grid length (1D) or image side (ct)")
    parser.add_argument("--wavelet", help="haar or db<k>")
    parser.add_argument("--s", type=float, help="Besov smoothness")
    parser.add_argument("--p", type=float, help="Besov integrability (>= 1)")
    parser.add_argument("--lambda", dest="lam", type=float, help="scaled regularization")
    parser.add_argument("--relative-noise", dest="relative_noise", type=float)
    parser.add_argument("--n-samples", dest="n_samples", type=int)
    parser.add_argument("--eta", type=float, help="proposal cost threshold")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--output-dir", dest="output_dir")


def _build_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ValueError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    for name in (
        "problem", "n", "wavelet", "s", "p", "lam", "relative_noise",
        "n_samples", "eta", "seed", "workers", "output_dir",
    ):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if "problem" not in data:
        raise ValueError("no problem selected; pass --problem or a config file")
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="besov-rto",
        description="RTO-MH sampling for linear inverse problems with Besov priors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and persist outputs")
    _add_config_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="discretization sweep over grid sizes")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--sizes", required=True, help="comma-separated powers of two")

    p_diag = sub.add_parser("diagnose", help="recompute chain statistics from stored samples")
    p_diag.add_argument("--samples", required=True, type=Path, help="run output directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            manifest = run_experiment(_build_config(args))
            print(
                f"run complete: {manifest.n_accepted}/{manifest.config['n_samples']} accepted "
                f"(rate {manifest.acceptance_rate:.3f}), outputs in {manifest.config['output_dir']}"
            )
        elif args.command == "sweep":
            try:
                sizes = [int(s) for s in args.sizes.split(",") if s]
            except ValueError as exc:
                raise ValueError(f"bad --sizes value {args.sizes!r}") from exc
            summary = discretization_sweep(_build_config(args), sizes)
            finest = summary["diffs"][-1, -2] if len(sizes) > 1 else 0.0
            print(
                f"sweep complete over n={summary['sizes']}; "
                f"finest-pair relative L2 difference {finest:.4f}"
            )
        else:
            stats = recompute_stats(args.samples)
            print(json.dumps(
                {
                    "mean_norm": float((stats.mean**2).sum() ** 0.5),
                    "acceptance_rate": stats.acceptance_rate,
                    "n_samples": stats.n_samples,
                    "n_accepted": stats.n_accepted,
                    "ess_min": stats.ess_min,
                    "ess_median": stats.ess_median,
                    "ess_max": stats.ess_max,
                    "ess_per_second": stats.ess_per_second,
                },
                indent=2,
            ))
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
