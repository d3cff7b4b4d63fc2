"""Six-condition comparison on one task, with medians and quartiles per condition.

    python3 scripts/run_grid.py --env swingup --seeds 0,1,2 --out runs/grid
"""

import argparse
from pathlib import Path

from adaptive_traces.config import DEFAULT_CONDITIONS, parse_config
from adaptive_traces.runner import compare, emit_plotdata


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", type=Path)
    p.add_argument("--env", default="swingup")
    p.add_argument("--episodes", type=int, default=300)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("runs/grid"))
    args = p.parse_args()
    base = parse_config(args.config, {"env": args.env, "episodes": args.episodes})
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = compare(base, DEFAULT_CONDITIONS, seeds, args.out, args.jobs)
    emit_plotdata(sorted(args.out.glob("cond_*/seed_*")), args.out / "plotdata.csv")
    print(f"{'condition':>16}  {'median':>9}  {'q1':>9}  {'q3':>9}")
    for row in rows:
        if row[0] == "aggregate" and row[8]:
            cond = f"({row[1]:g}, {row[2]:g}, {row[3]:g})"
            print(f"{cond:>16}  {float(row[8]):9.2f}  {float(row[9]):9.2f}  {float(row[10]):9.2f}")


if __name__ == "__main__":
    main()
