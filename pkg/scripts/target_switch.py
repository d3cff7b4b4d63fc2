"""Target-switch study: how fast the proposed learner re-adapts after the
rewarded target moves.

Prints the per-episode median return across seeds around the switch.
"""

import argparse
from pathlib import Path

import numpy as np

from adaptive_traces.config import RunConfig
from adaptive_traces.runner import train


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--switch", type=int, default=150)
    p.add_argument("--after", type=int, default=50)
    p.add_argument("--lambdas", default="0.5,0.9,1.0", help="lambda1,lambda2,kappa")
    p.add_argument("--out", type=Path, default=Path("runs/target_switch"))
    args = p.parse_args()
    cond = tuple(float(x) for x in args.lambdas.split(","))
    base = RunConfig(env="reach_switch", episodes=args.switch + args.after, switch_episode=args.switch)
    curves = []
    for seed in range(args.seeds):
        run = train(base.with_condition(cond, seed), args.out / f"seed_{seed}")
        curves.append([r.ret for r in run.records])
    med = np.median(np.array(curves), axis=0)
    pre = np.median(med[args.switch - 20 : args.switch])
    print(f"pre-switch 20-episode median: {pre:.2f}")
    for start in range(args.switch - 20, args.switch + args.after, 10):
        print(f"episodes {start:4d}-{start + 9:4d}: median {np.median(med[start : start + 10]):8.2f}")
    recovered = [i for i in range(args.switch, args.switch + args.after - 19)
                 if np.median(med[i : i + 20]) >= 0.8 * pre]
    print("recovered to 80% within the window" if recovered else "did not recover within the window")


if __name__ == "__main__":
    main()
