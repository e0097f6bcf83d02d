"""Print the PER CSVs of a results directory as MCS x grid-point tables.

    python scripts/summarize.py results/quick
"""
import csv
import sys
from collections import defaultdict
from pathlib import Path


def table(path: Path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return
    point = "jsr_db" if "jsr_db" in rows[0] else "f_irs_hz"
    arm = next((k for k in ("arm", "pair") if k in rows[0]), None)
    cells = defaultdict(dict)
    for r in rows:
        key = (r[arm], int(r["mcs"])) if arm else ("", int(r["mcs"]))
        cells[key][float(r[point])] = float(r["per"])
    points = sorted({p for c in cells.values() for p in c})
    print(f"\n{path}  ({point})")
    print(" " * 16 + "".join(f"{p:>9g}" for p in points))
    for (label, m), c in sorted(cells.items()):
        name = f"{label} MCS{m}".strip()
        print(f"{name:<16}" + "".join(f"{c.get(p, float('nan')):9.3f}" for p in points))


def main(root="results"):
    for name in ("per_vs_jsr.csv", "era_vs_noise.csv", "per_vs_freq.csv", "optimizer_per.csv"):
        for path in sorted(Path(root).rglob(name)):
            table(path)


if __name__ == "__main__":
    main(*sys.argv[1:])
