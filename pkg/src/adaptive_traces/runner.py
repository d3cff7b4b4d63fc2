"""Training, evaluation and comparison runs with CSV output.

Each run directory holds ``resolved.cfg`` (the full configuration, which
parses back to the same run), ``train.csv`` (one row per episode, flushed as
it is written), ``eval.csv`` and ``params.bin``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import distributions as D
from .config import DEFAULT_CONDITIONS, RunConfig, parse_config, write_config
from .envs import Env, make_env
from .learner import ActorCritic, Learner, Transition
from .params_io import load_params, save_params

log = logging.getLogger(__name__)

TRAIN_HEADER = ("episode", "return", "steps", "mean_lambda_d", "mean_abs_td", "wall_ms")
EVAL_HEADER = ("episode", "return", "steps")
SUMMARY_HEADER = (
    "kind", "lambda1", "lambda2", "kappa", "seed", "status", "score", "n", "median", "q1", "q3",
)
PLOT_HEADER = ("condition", "seed", "episode", "return", "mean_lambda_d")


@dataclass
class EpisodeRecord:
    episode: int
    ret: float
    steps: int
    mean_lambda_d: float
    mean_abs_td: float
    wall_ms: float
    incidents: int = 0

    def row(self):
        return (
            self.episode, repr(self.ret), self.steps, repr(self.mean_lambda_d),
            repr(self.mean_abs_td), f"{self.wall_ms:.3f}",
        )


@dataclass
class RunResult:
    config: RunConfig
    params: np.ndarray
    records: list[EpisodeRecord]
    incidents: int = 0


@dataclass
class EvalResult:
    median: float
    returns: list[float]
    steps: list[int] = field(default_factory=list)


class ActionScaler:
    """Maps the policy's [-1, 1] box onto the task's action bounds."""

    def __init__(self, low, high):
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        self.center = 0.5 * (low + high)
        self.half = 0.5 * (high - low)

    def __call__(self, a):
        return self.center + self.half * np.clip(a, -1.0, 1.0)


def _seeds(seed: int):
    learner, env, act, evaluation = np.random.SeedSequence(seed).spawn(4)
    return learner, env, act, evaluation


def make_run_env(config: RunConfig, seed) -> Env:
    kwargs = {}
    if config.env == "reach_switch":
        kwargs["switch_episode"] = config.switch_episode if config.switch_episode >= 0 else None
    return make_env(config.env, seed=seed, max_steps=config.max_steps or None, **kwargs)


def make_learner(config: RunConfig, seed=None) -> Learner:
    spec = make_env(config.env).spec
    learner_seed = seed if seed is not None else _seeds(config.seed)[0]
    return Learner(config.learner_config(), spec.state_dim, spec.action_dim, seed=learner_seed)


def run_episode(env: Env, learner: Learner, rng: np.random.Generator, learn: bool = True):
    """One episode of act-then-learn.

    The update for a transition runs once the next action has been chosen,
    so the action being learned from was drawn before the latest update.
    The final transition is learned from after the episode ends.
    """
    scale = ActionScaler(env.spec.action_low, env.spec.action_high)
    s = env.reset()
    learner.episode_begin()
    pending = None
    ret, steps = 0.0, 0
    lam, tds = [], []
    incidents = 0

    def update(tr):
        nonlocal incidents
        diag = learner.step_update(tr)
        if diag.skipped:
            incidents += 1
        else:
            lam.append(diag.lam_d)
            tds.append(abs(diag.delta))

    while True:
        dist, v = learner.policy(s)
        a = D.sample(dist, rng)
        if learn and pending is not None:
            update(pending)
        res = env.step(scale(a))
        ret += res.reward
        steps += 1
        done = res.terminal or res.truncated
        if learn:
            logp, _ = D.log_prob(dist, a)
            pending = Transition(s, a, res.reward, res.next_state, res.terminal, logp, dist, v)
            if done:
                update(pending)
        if done:
            break
        s = res.next_state
    mean_lam = float(np.mean(lam)) if lam else 1.0
    mean_td = float(np.mean(tds)) if tds else 0.0
    return ret, steps, mean_lam, mean_td, incidents


def greedy_episode(env: Env, model: ActorCritic, theta: np.ndarray) -> tuple[float, int]:
    scale = ActionScaler(env.spec.action_low, env.spec.action_high)
    s = env.reset()
    ret, steps = 0.0, 0
    while True:
        dist, _ = model.evaluate(theta, s)[:2]
        res = env.step(scale(dist.mu))
        ret += res.reward
        steps += 1
        if res.terminal or res.truncated:
            return ret, steps
        s = res.next_state


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def train(config: RunConfig, out_dir: str | os.PathLike | None = None, progress=None) -> RunResult:
    """Run ``config.episodes`` learning episodes.

    When ``out_dir`` is given, ``resolved.cfg`` is written first, ``train.csv``
    grows by one flushed row per episode, and ``params.bin`` holds the final
    parameters.
    """
    learner_seed, env_seed, act_seed, eval_seed = _seeds(config.seed)
    learner = make_learner(config, learner_seed)
    env = make_run_env(config, env_seed)
    rng = np.random.default_rng(act_seed)
    out = Path(out_dir) if out_dir is not None else None
    records: list[EpisodeRecord] = []
    fh = writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_config(config, out / "resolved.cfg")
        fh = open(out / "train.csv", "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TRAIN_HEADER)
        fh.flush()
    eval_rows = []
    try:
        for ep in range(config.episodes):
            t0 = time.perf_counter()
            ret, steps, lam, td, incidents = run_episode(env, learner, rng)
            rec = EpisodeRecord(ep, ret, steps, lam, td, 1e3 * (time.perf_counter() - t0), incidents)
            records.append(rec)
            if writer is not None:
                writer.writerow(rec.row())
                fh.flush()
            if progress is not None:
                progress(rec)
            if config.eval_every and (ep + 1) % config.eval_every == 0:
                res = evaluate(learner.theta, config, seed=eval_seed)
                eval_rows.append((ep, repr(res.median)))
    finally:
        if fh is not None:
            fh.close()
    if learner.incidents:
        log.warning("%d learner updates were skipped", learner.incidents)
    if out is not None:
        save_params(out / "params.bin", [learner.model.actor, learner.model.critic], learner.theta)
        if eval_rows:
            _write_csv(out / "eval_progress.csv", ("episode", "median"), eval_rows)
    return RunResult(config, learner.theta.copy(), records, learner.incidents)


def evaluate(
    params: np.ndarray, config: RunConfig, out_dir: str | os.PathLike | None = None, seed=None
) -> EvalResult:
    """Median return of ``config.eval_episodes`` episodes acting at the
    policy's location parameter, with learning switched off."""
    spec = make_env(config.env).spec
    model = ActorCritic(spec.state_dim, spec.action_dim, config.learner_config())
    if params.shape != (model.n_params,):
        raise ValueError(f"parameter vector has {params.size} entries, the network needs {model.n_params}")
    env = make_run_env(config, seed if seed is not None else _seeds(config.seed)[3])
    if config.env == "reach_switch" and config.switch_episode >= 0 and config.episodes >= config.switch_episode:
        # evaluate on the task as it stands at the end of training
        env.episode = config.episodes - 1
    returns, steps = [], []
    for _ in range(config.eval_episodes):
        r, n = greedy_episode(env, model, params)
        returns.append(r)
        steps.append(n)
    result = EvalResult(float(np.median(returns)), returns, steps)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "eval.csv", EVAL_HEADER, [(i, repr(r), n) for i, (r, n) in enumerate(zip(returns, steps))])
    return result


def condition_dir(root: Path, condition, seed: int) -> Path:
    l1, l2, k = condition
    return Path(root) / f"cond_{l1:g}_{l2:g}_{k:g}" / f"seed_{seed}"


def _train_and_eval(args):
    config, out_dir = args
    try:
        run = train(config, out_dir)
        score = evaluate(run.params, config, out_dir).median
        return config.condition, config.seed, "ok", score
    except Exception as exc:  # recorded, excluded from aggregates
        log.exception("run %s seed %d failed", config.condition, config.seed)
        return config.condition, config.seed, f"failed: {type(exc).__name__}: {exc}", math.nan


def compare(
    base: RunConfig,
    conditions: Sequence[tuple[float, float, float]] = DEFAULT_CONDITIONS,
    seeds: Sequence[int] = (0,),
    out_dir: str | os.PathLike = "runs",
    jobs: int = 1,
) -> list[tuple]:
    """Train and evaluate every (condition, seed) pair; write ``summary.csv``.

    Returns the summary rows (run rows first, then one aggregate per condition).
    """
    if not conditions:
        raise ValueError("at least one condition is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (base.with_condition(c, s), condition_dir(out, c, s)) for c in conditions for s in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_and_eval, tasks))
    else:
        results = [_train_and_eval(t) for t in tasks]
    rows = summarize(results, conditions)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    return rows


def summarize(results, conditions) -> list[tuple]:
    rows = []
    for cond, seed, status, score in results:
        rows.append(("run", *cond, seed, status, repr(score), "", "", "", ""))
    for cond in conditions:
        cond = tuple(float(c) for c in cond)
        scores = [sc for c, _, st, sc in results if tuple(c) == cond and st == "ok"]
        if scores:
            q1, med, q3 = np.percentile(scores, [25, 50, 75])
            rows.append(("aggregate", *cond, "", "ok", "", len(scores), repr(float(med)), repr(float(q1)), repr(float(q3))))
        else:
            rows.append(("aggregate", *cond, "", "no successful runs", "", 0, "", "", ""))
    return rows


def emit_plotdata(run_dirs: Iterable[str | os.PathLike], out_path=None) -> list[tuple]:
    """Long-format learning curves from run directories."""
    rows = []
    for d in run_dirs:
        d = Path(d)
        train_csv = d / "train.csv"
        if not train_csv.is_file():
            raise FileNotFoundError(f"missing train.csv in {d}")
        cfg = parse_config(d / "resolved.cfg") if (d / "resolved.cfg").is_file() else None
        cond = "/".join(f"{c:g}" for c in cfg.condition) if cfg else d.parent.name
        seed = cfg.seed if cfg else d.name
        with open(train_csv, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append((cond, seed, int(rec["episode"]), rec["return"], rec["mean_lambda_d"]))
    if out_path is not None:
        _write_csv(Path(out_path), PLOT_HEADER, rows)
    return rows


def load_run_params(path, config: RunConfig) -> np.ndarray:
    specs, theta = load_params(path)
    model = ActorCritic(make_env(config.env).spec.state_dim, make_env(config.env).spec.action_dim, config.learner_config())
    if tuple(specs) != (model.actor, model.critic):
        raise ValueError("parameter file was written for a different network configuration")
    return theta
