#!/usr/bin/env python3
"""Inpainting experiment: posterior estimates under Haar and db8 priors.

Reproduces the wavelet-comparison setup (n=512, s=1.2, p=1.5,
lambda=0.025, 2% noise, 10^4 proposals) at full scale by default; pass
--desk for the faster n=128 variant.
"""

import argparse
from pathlib import Path

from besov_rto.runner import RunConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--desk", action="store_true", help="n=128 with 2000 proposals")
    ap.add_argument("--output-dir", default="runs/inpainting")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    n, n_samples = (128, 2000) if args.desk else (512, 10_000)
    for wavelet in ("haar", "db8"):
        cfg = RunConfig(
            problem="inpainting",
            n=n,
            wavelet=wavelet,
            s=1.2,
            p=1.5,
            lam=0.025,
            relative_noise=0.02,
            n_samples=n_samples,
            seed=args.seed,
            workers=args.workers,
            output_dir=str(Path(args.output_dir) / wavelet),
        )
        manifest = run_experiment(cfg)
        print(
            f"{wavelet}: accepted {manifest.n_accepted}/{n_samples} "
            f"(rate {manifest.acceptance_rate:.3f}), wall {manifest.wall_time:.0f}s"
        )


if __name__ == "__main__":
    main()
