"""Online actor-critic with eligibility traces and adaptive trace decay.

One :meth:`Learner.step_update` call consumes one completed transition:

1. evaluate policy and value at ``s`` (and value at ``s_next``) with the
   current parameters;
2. form the TD error and the trace gradient
   ``g = rho * (-grad log pi - grad V)`` with a clipped, detached ratio;
3. turn the divergence measured after the previous update into the decay
   factor ``lam_d``;
4. push ``g`` into the trace and step the optimizer along
   ``delta * e + regularizers``;
5. re-evaluate at ``s`` to measure how far policy and value moved, which
   feeds step 3 of the next call.

Every intermediate is computed before anything is committed, so a step that
hits a non-finite value leaves the learner exactly as it was.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import distributions as D
from .nn import ForwardCache, Head, NetworkSpec, backward, forward, init_network
from .optim import make_optimizer
from .traces import AdaptiveDecay, GeneralizedTrace, ReplacingTrace, StandardTrace

log = logging.getLogger(__name__)

TRACE_KINDS = ("none", "standard", "replacing", "generalized")
POLICY_FAMILIES = ("normal", "student_t")
OPTIMIZERS = ("plain", "adaptive_moment")
# traced regularizers are divided by the TD error; below this they bypass the trace
FOLD_MIN_ABS_TD = 1e-3


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.99
    alpha: float = 1e-4
    eps_clip: float = 0.1
    beta_de: float = 0.025
    beta_td: float = 0.025
    lambda_max: tuple[float, ...] = (0.5, 0.9)
    kappa: float = 1.0
    trace_kind: str = "generalized"
    policy_family: str = "student_t"
    optimizer: str = "adaptive_moment"
    pearson_samples: int = 16
    hidden_width: int = 64
    hidden_layers: int = 3
    layer_norm_affine: bool = True
    persist_decay: bool = False
    trace_regularizers: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lambda_max", tuple(float(x) for x in self.lambda_max))
        checks = {
            "gamma": 0.0 <= self.gamma < 1.0,
            "alpha": self.alpha >= 0.0,
            "eps_clip": self.eps_clip > 0.0,
            "beta_de": self.beta_de >= 0.0,
            "beta_td": self.beta_td >= 0.0,
            "kappa": self.kappa >= 0.0,
            "lambda_max": bool(self.lambda_max)
            and all(0.0 <= lam <= 1.0 for lam in self.lambda_max),
            "trace_kind": self.trace_kind in TRACE_KINDS,
            "policy_family": self.policy_family in POLICY_FAMILIES,
            "optimizer": self.optimizer in OPTIMIZERS,
            "pearson_samples": self.pearson_samples >= 1,
            "hidden_width": self.hidden_width >= 1,
            "hidden_layers": self.hidden_layers >= 1,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid learner setting(s): {', '.join(bad)}")
        if self.trace_kind == "generalized" and len(self.lambda_max) < 2:
            raise ValueError("invalid learner setting(s): lambda_max (generalized needs >= 2)")


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    terminal: bool
    logp_old: float
    dist_old: D.Distribution | None = None
    v_old_at_s: float = float("nan")


@dataclass(frozen=True)
class StepDiagnostics:
    delta: float = float("nan")
    lam_d: float = float("nan")
    d_pi: float = float("nan")
    d_v: float = float("nan")
    rho: float = float("nan")
    trace_inf_norm: float = float("nan")
    skipped: bool = False
    saturated: bool = False
    reason: str = ""


class Evaluation(NamedTuple):
    dist: D.Distribution
    v: float
    actor_cache: ForwardCache
    critic_cache: ForwardCache


class ActorCritic:
    """Separate actor and critic networks sharing one flat parameter vector
    (actor first, then critic)."""

    def __init__(self, obs_dim: int, act_dim: int, config: LearnerConfig):
        heads = [Head("mu", act_dim, "identity"), Head("sigma", act_dim, "softplus")]
        if config.policy_family == "student_t":
            heads.append(Head("nu", 1, "softplus_plus_two"))
        common = dict(
            input_dim=obs_dim,
            hidden_layers=config.hidden_layers,
            hidden_width=config.hidden_width,
            layer_norm_affine=config.layer_norm_affine,
        )
        self.family = config.policy_family
        self.actor = NetworkSpec(heads=tuple(heads), **common)
        self.critic = NetworkSpec(heads=(Head("v", 1, "identity"),), **common)
        self.n_actor = self.actor.n_params
        self.n_params = self.n_actor + self.critic.n_params

    def init_params(self, seed) -> np.ndarray:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        a_seed, c_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        return np.concatenate([init_network(self.actor, a_seed), init_network(self.critic, c_seed)])

    def split(self, theta):
        return theta[: self.n_actor], theta[self.n_actor :]

    def evaluate(self, theta, s) -> Evaluation:
        th_a, th_c = self.split(theta)
        out, a_cache = forward(th_a, self.actor, s)
        v_out, c_cache = forward(th_c, self.critic, s)
        return Evaluation(self.make_dist(out), float(v_out["v"][0]), a_cache, c_cache)

    def value(self, theta, s) -> float:
        out, _ = forward(self.split(theta)[1], self.critic, s)
        return float(out["v"][0])

    def make_dist(self, out) -> D.Distribution:
        if self.family == "student_t":
            return D.DiagStudentT(out["mu"], out["sigma"], float(out["nu"][0]))
        return D.DiagNormal(out["mu"], out["sigma"])

    def grad_logp(self, theta, ev: Evaluation, a) -> tuple[float, np.ndarray]:
        """log pi(a|s) and its gradient over the actor parameters only."""
        logp, head_grads = D.log_prob(ev.dist, a)
        return logp, backward(self.split(theta)[0], self.actor, ev.actor_cache, head_grads)

    def grad_value(self, theta, ev: Evaluation) -> np.ndarray:
        """Gradient of V(s) over the critic parameters only."""
        return backward(self.split(theta)[1], self.critic, ev.critic_cache, {"v": _ONE})

    def join(self, actor_part, critic_part) -> np.ndarray:
        out = np.empty(self.n_params)
        out[: self.n_actor] = actor_part
        out[self.n_actor :] = critic_part
        return out


_ONE = np.ones(1)


def td_error(r: float, v_s: float, v_next: float, gamma: float, terminal: bool) -> float:
    """One-step TD error; the bootstrap is dropped on true terminals."""
    bootstrap = 0.0 if terminal else gamma * v_next
    return r + bootstrap - v_s


def clipped_ratio(logp: float, logp_old: float, eps: float) -> float:
    return min(max(math.exp(logp - logp_old), 1.0 - eps), 1.0 + eps)


class Surrogate(NamedTuple):
    g: np.ndarray
    rho: float
    logp: float
    grad_logp: np.ndarray  # actor block
    grad_v: np.ndarray  # critic block


def surrogate_gradient(model: ActorCritic, theta, tr: Transition, eps: float, ev=None) -> Surrogate:
    """Trace gradient ``rho * (-grad log pi - grad V)``.

    This is the gradient of ``-delta*rho*(log pi + V)`` divided by ``delta``;
    the division is symbolic so a vanishing TD error is harmless.
    """
    ev = ev or model.evaluate(theta, tr.s)
    logp, g_logp = model.grad_logp(theta, ev, tr.a)
    g_v = model.grad_value(theta, ev)
    if not math.isfinite(logp):
        raise FloatingPointError("non-finite log-density")
    rho = clipped_ratio(logp, tr.logp_old, eps)
    return Surrogate(model.join(-rho * g_logp, -rho * g_v), rho, logp, g_logp, g_v)


def regularizer_gradient(model: ActorCritic, sur: Surrogate, delta: float, beta_de: float, beta_td: float) -> np.ndarray:
    """Gradient of ``beta_de*log pi + beta_td*delta^2/2`` (bootstrap held fixed)."""
    return model.join(beta_de * sur.grad_logp, (-beta_td * delta) * sur.grad_v)


def divergence_probe(dist_new, dist_old, v_new, v_old, pearson_samples=16, rng=None) -> D.DivergenceReport:
    """Policy and value divergence between two evaluations at one state."""
    if type(dist_new) is not type(dist_old):
        raise TypeError("policy family mismatch")
    saturated = False
    if isinstance(dist_new, D.DiagNormal):
        d_pi = D.kl_normal(dist_new, dist_old)
    else:
        if rng is None:
            raise ValueError("a student-t divergence needs an rng")
        d_pi, saturated = D.pearson_mc(dist_new, dist_old, pearson_samples, rng)
    return D.DivergenceReport(d_pi, D.value_divergence(v_new, v_old), saturated)


def _finite(x: np.ndarray) -> bool:
    # a single reduction; any nan/inf entry poisons the sum
    return math.isfinite(float(np.sum(x)))


def make_trace(config: LearnerConfig, size: int):
    lam = config.lambda_max
    if config.trace_kind == "none":
        return None
    if config.trace_kind == "standard":
        return StandardTrace(size, lam[0])
    if config.trace_kind == "replacing":
        return ReplacingTrace(size, lam[-1])
    return GeneralizedTrace(size, lam)


@dataclass
class Learner:
    config: LearnerConfig
    obs_dim: int
    act_dim: int
    seed: int | np.random.SeedSequence = 0
    n: int = field(default=0, init=False)
    t: int = field(default=0, init=False)
    incidents: int = field(default=0, init=False)

    def __post_init__(self):
        self.model = ActorCritic(self.obs_dim, self.act_dim, self.config)
        root = self.seed if isinstance(self.seed, np.random.SeedSequence) else np.random.SeedSequence(self.seed)
        init_seq, probe_seq = root.spawn(2)
        self.theta = self.model.init_params(init_seq)
        self.opt = make_optimizer(self.config.optimizer, self.model.n_params)
        self.trace = make_trace(self.config, self.model.n_params)
        self.decay = AdaptiveDecay(self.config.kappa)
        self.probe_rng = np.random.default_rng(probe_seq)
        self.pending = D.DivergenceReport(0.0, 0.0)

    def policy(self, s) -> tuple[D.Distribution, float]:
        ev = self.model.evaluate(self.theta, s)
        return ev.dist, ev.v

    def episode_begin(self) -> None:
        if self.trace is not None:
            self.trace.reset()
        if not self.config.persist_decay:
            self.decay.reset()
            self.pending = D.DivergenceReport(0.0, 0.0)
        self.t = 0

    def step_update(self, tr: Transition) -> StepDiagnostics:
        """Apply one online update for ``tr``; see the module docstring."""
        cfg = self.config
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                return self._step(tr, cfg)
        except (FloatingPointError, ValueError, OverflowError) as exc:
            self.incidents += 1
            log.warning("update %d skipped: %s", self.n, exc)
            return StepDiagnostics(skipped=True, reason=str(exc))

    def _step(self, tr: Transition, cfg: LearnerConfig) -> StepDiagnostics:
        theta = self.theta
        ev = self.model.evaluate(theta, tr.s)
        v_next = 0.0 if tr.terminal else self.model.value(theta, tr.s_next)
        delta = td_error(tr.r, ev.v, v_next, cfg.gamma, tr.terminal)
        sur = surrogate_gradient(self.model, theta, tr, cfg.eps_clip, ev)
        reg = regularizer_gradient(self.model, sur, delta, cfg.beta_de, cfg.beta_td)

        d_s, lam_d = self.decay.peek(self.pending.d_pi, self.pending.d_v)
        traced = sur.g
        if cfg.trace_regularizers and abs(delta) >= FOLD_MIN_ABS_TD:
            traced = traced + reg / delta
            reg = np.zeros_like(reg)
        if self.trace is None:
            if not _finite(traced):
                raise FloatingPointError("non-finite gradient")
            layers, e = None, traced
        else:
            layers = self.trace.propose(cfg.gamma, lam_d, traced)
            e = layers[-1]
        update = delta * e + reg
        new_theta, new_opt = self.opt.apply(theta, update, cfg.alpha)
        if not _finite(new_theta):
            raise FloatingPointError("non-finite parameters after update")

        ev_new = self.model.evaluate(new_theta, tr.s)
        report = divergence_probe(
            ev_new.dist, ev.dist, ev_new.v, ev.v, cfg.pearson_samples, self.probe_rng
        )
        if not (math.isfinite(report.d_pi) and math.isfinite(report.d_v)):
            raise FloatingPointError("non-finite divergence")

        # commit
        self.theta = new_theta
        self.opt = new_opt
        if layers is not None:
            self.trace.commit(layers)
        self.decay.d_s, self.decay.lam_d = d_s, lam_d
        self.pending = report
        self.n += 1
        self.t += 1
        return StepDiagnostics(
            delta=delta,
            lam_d=lam_d,
            d_pi=report.d_pi,
            d_v=report.d_v,
            rho=sur.rho,
            trace_inf_norm=float(np.max(np.abs(e))),
            saturated=report.saturated,
        )
