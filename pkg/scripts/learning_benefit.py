"""Swing-up study: proposed traces (0.5, 0.9, 1.0) against no traces.

Trains both conditions for every seed, then reports the evaluation medians,
the relative gain, a one-sided Mann-Whitney test and the mean lambda_d.
Learning-speed figures (episodes until the 20-episode median first exceeds
50) are printed too, since the final score alone hides them.
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from scipy.stats import mannwhitneyu

from adaptive_traces.config import RunConfig
from adaptive_traces.runner import compare

CONDITIONS = ((0.0, 0.0, 0.0), (0.5, 0.9, 1.0))


def curve(path):
    with open(path, newline="") as fh:
        recs = list(csv.DictReader(fh))
    return np.array([float(r["return"]) for r in recs]), np.array([float(r["mean_lambda_d"]) for r in recs])


def first_crossing(returns, level=50.0, window=20):
    for i in range(len(returns) - window + 1):
        if np.median(returns[i : i + window]) > level:
            return i + window
    return None


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--episodes", type=int, default=300)
    p.add_argument("--out", type=Path, default=Path("runs/learning_benefit"))
    p.add_argument("--reuse", action="store_true", help="summarize existing run directories only")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    seeds = range(args.seeds)
    if not args.reuse:
        compare(RunConfig(env="swingup", episodes=args.episodes), CONDITIONS, seeds, args.out, args.jobs)
    scores = {}
    for cond in CONDITIONS:
        name = f"cond_{cond[0]:g}_{cond[1]:g}_{cond[2]:g}"
        evals, speed, lam = [], [], []
        for s in seeds:
            d = args.out / name / f"seed_{s}"
            with open(d / "eval.csv", newline="") as fh:
                evals.append(float(np.median([float(r["return"]) for r in csv.DictReader(fh)])))
            ret, lam_d = curve(d / "train.csv")
            speed.append(first_crossing(ret))
            lam.append(lam_d.mean())
        scores[cond] = np.array(evals)
        reached = [x for x in speed if x is not None]
        print(f"{cond}: eval median {np.median(evals):.2f} "
              f"(q1 {np.percentile(evals, 25):.2f}, q3 {np.percentile(evals, 75):.2f}); "
              f"median episodes to 50: {np.median(reached) if reached else 'never'} "
              f"({len(reached)}/{len(speed)} runs); mean lambda_d {np.mean(lam):.4f}")
    base, prop = scores[CONDITIONS[0]], scores[CONDITIONS[1]]
    gain = (np.median(prop) - np.median(base)) / abs(np.median(base))
    p_val = mannwhitneyu(prop, base, alternative="greater").pvalue
    print(f"gain {100 * gain:+.1f}%, one-sided Mann-Whitney p = {p_val:.3g}")


if __name__ == "__main__":
    main()
