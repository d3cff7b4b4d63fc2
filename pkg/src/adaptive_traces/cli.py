"""Command-line entry point: ``train``, ``eval``, ``compare`` and ``plotdata``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import DEFAULT_CONDITIONS, ConfigError, parse_config
from .runner import PLOT_HEADER, compare, emit_plotdata, evaluate, load_run_params, train


def _parse_conditions(text: str):
    if text == "default":
        return DEFAULT_CONDITIONS
    conds = []
    for chunk in text.split(";"):
        parts = [p for p in chunk.replace(",", " ").split() if p]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(
                f"condition {chunk!r} needs three numbers: lambda1,lambda2,kappa"
            )
        conds.append(tuple(float(p) for p in parts))
    return tuple(conds)


def _parse_seeds(text: str):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-traces", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one run and evaluate it")
    t.add_argument("--config", type=Path)
    t.add_argument("--seed", type=int)
    t.add_argument("--episodes", type=int)
    t.add_argument("--out", type=Path, default=Path("runs/train"))
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    e = sub.add_parser("eval", help="evaluate saved parameters")
    e.add_argument("--params", type=Path, required=True)
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--out", type=Path)

    c = sub.add_parser("compare", help="train every condition for every seed")
    c.add_argument("--config", type=Path)
    c.add_argument("--seeds", type=_parse_seeds, default=(0,))
    c.add_argument("--conditions", type=_parse_conditions, default=DEFAULT_CONDITIONS,
                   help="'default' or 'l1,l2,k;l1,l2,k;...'")
    c.add_argument("--out", type=Path, default=Path("runs/compare"))
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    d = sub.add_parser("plotdata", help="long-format learning curves")
    d.add_argument("--runs", type=Path, nargs="*", default=[])
    d.add_argument("--out", type=Path, help="CSV path; stdout when omitted")
    return p


def _overrides(pairs, **extra):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(item, "override must look like KEY=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "train":
            cfg = parse_config(args.config, _overrides(args.set, seed=args.seed, episodes=args.episodes))

            def progress(rec):
                logging.info("episode %d return %.3f lambda_d %.4f", rec.episode, rec.ret, rec.mean_lambda_d)

            run = train(cfg, args.out, progress)
            score = evaluate(run.params, cfg, args.out).median
            print(f"eval median return: {score:.6g}")
        elif args.command == "eval":
            cfg = parse_config(args.config)
            params = load_run_params(args.params, cfg)
            print(f"eval median return: {evaluate(params, cfg, args.out).median:.6g}")
        elif args.command == "compare":
            cfg = parse_config(args.config, _overrides(args.set))
            rows = compare(cfg, args.conditions, args.seeds, args.out, args.jobs)
            for row in rows:
                if row[0] == "aggregate":
                    print(f"{row[1]:g},{row[2]:g},{row[3]:g}: median {row[8] or 'n/a'} (n={row[7]})")
        elif args.command == "plotdata":
            rows = emit_plotdata(args.runs, args.out)
            if args.out is None:
                w = csv.writer(sys.stdout)
                w.writerow(PLOT_HEADER)
                w.writerows(rows)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
