"""Run every experiment with one config, one output directory per experiment.

    python scripts/run_sweeps.py --config scripts/configs/quick.yaml --out results/quick
"""
import argparse
import sys
from pathlib import Path

from era_lab import cli

EXPERIMENTS = ["surface-size", "ici-check", "per-vs-jsr", "era-vs-noise", "per-vs-freq", "optimize", "selftest"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(Path(__file__).with_name("configs") / "quick.yaml"))
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed")
    ap.add_argument("--threads", default="1")
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS)
    args = ap.parse_args()
    status = 0
    for exp in args.only or EXPERIMENTS:
        argv = [exp, "--config", args.config, "--out", str(Path(args.out) / exp), "--threads", args.threads]
        if args.seed is not None:
            argv += ["--seed", args.seed]
        print(f"== {exp}", flush=True)
        rc = cli.main(argv)
        status = status or rc
    return status


if __name__ == "__main__":
    sys.exit(main())
