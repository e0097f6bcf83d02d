"""Command-line entry point: ``era-lab <experiment> [--config FILE] [--seed N] ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import harness as H
from .harness import ConfigError, ExperimentConfig

SEED_ENV = "ERA_LAB_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="era-lab", description="Environment reconfiguration attack simulations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("per-vs-jsr", "era-vs-noise", "per-vs-freq", "surface-size", "optimize", "ici-check",
                 "selftest"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="YAML file with ExperimentConfig fields")
        s.add_argument("--seed", type=_u64, help=f"master seed (falls back to ${SEED_ENV})")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=_positive)
        s.add_argument("--packets", type=_positive, help="packets per grid point")
    return p


def resolve_config(args) -> ExperimentConfig:
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = _u64(os.environ[SEED_ENV])
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad {SEED_ENV}: {exc}") from exc
    overrides = dict(kind=args.command, seed=seed, out=args.out, threads=args.threads, packets=args.packets)
    if args.config is not None:
        return H.load_config(args.config, **overrides)
    return H.config_from_dict({}, **overrides)


def run(cfg: ExperimentConfig) -> list[str]:
    """Run one experiment and write its CSVs plus manifest.json; returns the written file names."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def csv(name, header, rows):
        H.write_csv(out / name, header, rows)
        written.append(name)

    kind = cfg.kind
    if kind == "per-vs-jsr":
        csv("per_vs_jsr.csv", H.PER_COLUMNS, H.per_rows(H.run_per_vs_jsr(cfg)))
    elif kind == "era-vs-noise":
        csv("era_vs_noise.csv", ["arm"] + H.PER_COLUMNS, H.per_rows(H.run_era_vs_noise(cfg), with_label=True))
    elif kind == "per-vs-freq":
        csv("per_vs_freq.csv", H.FREQ_COLUMNS, H.per_rows(H.run_per_vs_freq(cfg)))
    elif kind == "surface-size":
        csv("surface_size.csv", H.SURFACE_COLUMNS, [[H.fmt_float(v) for v in r] for r in H.run_surface_size(cfg)])
    elif kind == "optimize":
        demo = H.run_optimizer_demo(cfg)
        csv("optimizer_trace.csv", ["step", "distance"], [[i, H.fmt_float(d)] for i, d in enumerate(demo.result.trace)])
        csv("optimizer_csi.csv", H.CSI_COLUMNS, H.csi_rows(cfg, demo))
        csv("optimizer_per.csv", ["pair"] + H.PER_COLUMNS, H.per_rows(demo.per, with_label=True))
        csv("optimizer_patterns.csv", ["which", "pattern0", "pattern1"], [
            ["initial", demo.result.initial0.to_hex(), demo.result.initial1.to_hex()],
            ["optimized", demo.result.pattern0.to_hex(), demo.result.pattern1.to_hex()]])
    elif kind == "ici-check":
        csv("ici_check.csv", H.ICI_COLUMNS, H.run_ici_check(cfg).rows())
    elif kind == "selftest":
        from .selftest import run_selftest

        report = run_selftest(cfg)
        for line in report.lines():
            print(line)
        (out / "selftest.txt").write_text("\n".join(report.lines()) + "\n")
        written.append("selftest.txt")
        if not report.ok:
            H.write_manifest(out / "manifest.json", cfg, written)
            raise RuntimeError(f"{report.failed} selftest check(s) failed")
    H.write_manifest(out / "manifest.json", cfg, written)
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"era-lab: config error: {exc}", file=sys.stderr)
        return 2
    try:
        written = run(cfg)
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"era-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name in written + ["manifest.json"]:
        print(Path(cfg.out) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
