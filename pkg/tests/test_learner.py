import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import central_difference, relative_errors

from adaptive_traces import distributions as D
from adaptive_traces.envs import make_env
from adaptive_traces.learner import (
    ActorCritic,
    Learner,
    LearnerConfig,
    Transition,
    clipped_ratio,
    divergence_probe,
    regularizer_gradient,
    surrogate_gradient,
    td_error,
)

SMALL = dict(hidden_width=6, hidden_layers=2)


def transition(learner, env, rng, s=None):
    s = env.reset() if s is None else s
    dist, v = learner.policy(s)
    a = D.sample(dist, rng)
    res = env.step(np.clip(a, -1, 1))
    logp, _ = D.log_prob(dist, a)
    return Transition(s, a, res.reward, res.next_state, res.terminal, logp, dist, v), res


def run_steps(config, n, seed=0, env_name="swingup", begin_every=None):
    env = make_env(env_name, seed=seed)
    spec = env.spec
    learner = Learner(config, spec.state_dim, spec.action_dim, seed=seed)
    rng = np.random.default_rng(seed + 1)
    learner.episode_begin()
    s = env.reset()
    diags = []
    for i in range(n):
        if begin_every and i % begin_every == 0:
            learner.episode_begin()
        tr, res = transition(learner, env, rng, s)
        diags.append(learner.step_update(tr))
        s = env.reset() if (res.terminal or res.truncated) else res.next_state
    return learner, diags


# --- scalar pieces ------------------------------------------------------------

def test_td_error_examples():
    assert td_error(1.0, 0.0, 0.0, 0.99, False) == 1.0
    assert td_error(0.0, 2.0, 123.0, 0.99, True) == -2.0
    assert td_error(0.0, 0.99 * 4.0, 4.0, 0.99, False) == 0.0


def test_clipped_ratio():
    assert clipped_ratio(math.log(1.3), 0.0, 0.1) == 1.1
    assert clipped_ratio(math.log(0.5), 0.0, 0.1) == 0.9
    assert clipped_ratio(0.25, 0.25, 0.1) == 1.0


def test_divergence_probe_examples():
    n0 = D.DiagNormal(np.zeros(1), np.ones(1))
    n1 = D.DiagNormal(np.ones(1), np.ones(1))
    r = divergence_probe(n0, n0, 1.0, 1.0)
    assert (r.d_pi, r.d_v) == (0.0, 0.0)
    r = divergence_probe(n0, n0, 2.0, 0.0)
    assert (r.d_pi, r.d_v) == (0.0, 2.0)
    r = divergence_probe(n1, n0, 0.5, 0.5)
    assert r.d_pi == pytest.approx(0.5, abs=1e-15) and r.d_v == 0.0
    t = D.DiagStudentT(np.zeros(2), np.ones(2), 5.0)
    assert divergence_probe(t, t, 0.0, 0.0, 16, np.random.default_rng(0)).d_pi == 0.0
    with pytest.raises(TypeError):
        divergence_probe(t, n0, 0.0, 0.0, 16, np.random.default_rng(0))


# --- gradients vs finite differences -------------------------------------------

@pytest.mark.parametrize("family", ["normal", "student_t"])
def test_surrogate_gradient_finite_differences(family):
    cfg = LearnerConfig(policy_family=family, **SMALL)
    model = ActorCritic(3, 1, cfg)
    rng = np.random.default_rng(0)
    theta = model.init_params(1) + 0.1 * rng.normal(size=model.n_params)
    s = rng.normal(size=3)
    ev = model.evaluate(theta, s)
    a = D.sample(ev.dist, rng)
    # acting-time policy differs from the current one, so rho != 1
    logp_old = D.log_prob(ev.dist, a)[0] - 0.05
    tr = Transition(s, a, 0.3, rng.normal(size=3), False, logp_old, ev.dist, ev.v)
    sur = surrogate_gradient(model, theta, tr, 0.1)
    assert sur.rho == pytest.approx(math.exp(0.05))
    delta = 0.7

    def loss(p):
        e = model.evaluate(p, s)
        return -delta * sur.rho * (D.log_prob(e.dist, a)[0] + e.v)

    fd = central_difference(loss, theta)
    assert relative_errors(delta * sur.g, fd).max() < 1e-5


@pytest.mark.parametrize("family", ["normal", "student_t"])
def test_regularizer_gradient_finite_differences(family):
    cfg = LearnerConfig(policy_family=family, **SMALL)
    model = ActorCritic(3, 1, cfg)
    rng = np.random.default_rng(1)
    theta = model.init_params(2) + 0.1 * rng.normal(size=model.n_params)
    s, s_next = rng.normal(size=3), rng.normal(size=3)
    ev = model.evaluate(theta, s)
    a = D.sample(ev.dist, rng)
    tr = Transition(s, a, 0.4, s_next, False, D.log_prob(ev.dist, a)[0], ev.dist, ev.v)
    v_next = model.value(theta, s_next)
    delta = td_error(0.4, ev.v, v_next, 0.99, False)
    sur = surrogate_gradient(model, theta, tr, 0.1)
    reg = regularizer_gradient(model, sur, delta, 0.3, 0.2)

    def loss(p):
        e = model.evaluate(p, s)
        d = td_error(0.4, e.v, v_next, 0.99, False)  # bootstrap held fixed
        return 0.3 * D.log_prob(e.dist, a)[0] + 0.2 * 0.5 * d * d

    assert relative_errors(reg, central_difference(loss, theta)).max() < 1e-5


def test_regularizer_zero_cases():
    cfg = LearnerConfig(**SMALL)
    model = ActorCritic(3, 1, cfg)
    rng = np.random.default_rng(2)
    theta = model.init_params(0)
    s = rng.normal(size=3)
    ev = model.evaluate(theta, s)
    a = D.sample(ev.dist, rng)
    tr = Transition(s, a, 0.0, s, False, D.log_prob(ev.dist, a)[0], ev.dist, ev.v)
    sur = surrogate_gradient(model, theta, tr, 0.1)
    assert not regularizer_gradient(model, sur, 1.3, 0.0, 0.0).any()
    reg = regularizer_gradient(model, sur, 0.0, 0.0, 0.5)
    assert not reg.any()


# --- the full step ------------------------------------------------------------------

def test_first_step_ratio_is_one():
    cfg = LearnerConfig(**SMALL)
    _, diags = run_steps(cfg, 1)
    assert diags[0].rho == 1.0


def test_no_trace_step_is_one_step_actor_critic():
    cfg = LearnerConfig(trace_kind="none", optimizer="plain", alpha=1e-3, beta_de=0.0, beta_td=0.0, **SMALL)
    env = make_env("swingup", seed=0)
    learner = Learner(cfg, 3, 1, seed=0)
    rng = np.random.default_rng(0)
    learner.episode_begin()
    s = env.reset()
    for _ in range(5):
        tr, res = transition(learner, env, rng, s)
        theta = learner.theta.copy()
        ev = learner.model.evaluate(theta, tr.s)
        delta = td_error(tr.r, ev.v, learner.model.value(theta, tr.s_next), cfg.gamma, tr.terminal)
        g = surrogate_gradient(learner.model, theta, tr, cfg.eps_clip).g
        learner.step_update(tr)
        assert np.array_equal(learner.theta, theta - cfg.alpha * (delta * g))
        s = res.next_state


def test_zero_learning_rate_freezes_everything():
    cfg = LearnerConfig(alpha=0.0, **SMALL)
    learner, diags = run_steps(cfg, 30)
    fresh = Learner(cfg, 3, 1, seed=0)
    assert np.array_equal(learner.theta, fresh.theta)
    assert all(d.d_pi == 0.0 and d.d_v == 0.0 and d.lam_d == 1.0 for d in diags)


def test_determinism():
    cfg = LearnerConfig(**SMALL)
    a = run_steps(cfg, 40, seed=3)
    b = run_steps(cfg, 40, seed=3)
    assert a[1] == b[1]
    assert np.array_equal(a[0].theta, b[0].theta)


@pytest.mark.parametrize("family", ["normal", "student_t"])
def test_none_equals_standard_with_zero_lambda(family):
    base = LearnerConfig(policy_family=family, **SMALL)
    none = dataclasses.replace(base, trace_kind="none")
    std = dataclasses.replace(base, trace_kind="standard", lambda_max=(0.0,))
    a, da = run_steps(none, 200, begin_every=200)
    b, db = run_steps(std, 200, begin_every=200)
    assert np.array_equal(a.theta, b.theta)
    assert [d.delta for d in da] == [d.delta for d in db]


@pytest.mark.parametrize("kind", ["standard", "replacing", "generalized"])
def test_kappa_zero_has_unit_decay(kind):
    cfg = LearnerConfig(kappa=0.0, trace_kind=kind, **SMALL)
    _, diags = run_steps(cfg, 60)
    assert all(d.lam_d == 1.0 for d in diags)


def test_decay_uses_previous_divergence_from_zero_history():
    cfg = LearnerConfig(kappa=1.0, alpha=1e-2, **SMALL)
    _, diags = run_steps(cfg, 3, begin_every=100)
    assert diags[0].lam_d == 1.0
    assert diags[1].lam_d == math.exp(-(diags[0].d_pi + diags[0].d_v))


def test_first_trace_after_begin():
    cfg = LearnerConfig(trace_kind="generalized", **SMALL)
    learner = Learner(cfg, 3, 1, seed=0)
    env = make_env("swingup", seed=0)
    rng = np.random.default_rng(0)
    learner.episode_begin()
    learner.episode_begin()
    tr, _ = transition(learner, env, rng)
    g = surrogate_gradient(learner.model, learner.theta, tr, cfg.eps_clip).g
    learner.step_update(tr)
    assert np.array_equal(learner.trace.layers[0], g)  # beta1 = 1 for K = 2
    assert np.array_equal(learner.trace.output, g)


@settings(max_examples=10)
@given(st.integers(0, 1000), st.sampled_from(["normal", "student_t"]))
def test_divergences_nonnegative(seed, family):
    cfg = LearnerConfig(policy_family=family, alpha=3e-3, **SMALL)
    _, diags = run_steps(cfg, 50, seed=seed)
    for d in diags:
        assert d.skipped or (d.d_pi >= 0.0 and d.d_v >= 0.0 and 0.0 < d.lam_d <= 1.0)


def test_rejected_step_is_atomic():
    cfg = LearnerConfig(**SMALL)
    learner, _ = run_steps(cfg, 10)
    env = make_env("swingup", seed=9)
    tr, _ = transition(learner, env, np.random.default_rng(9))
    bad = dataclasses.replace(tr, r=float("nan"))
    before = (learner.theta.copy(), learner.trace.layers.copy(), learner.decay.d_s,
              learner.decay.lam_d, learner.opt, learner.pending, learner.n)
    diag = learner.step_update(bad)
    assert diag.skipped and learner.incidents == 1
    assert np.array_equal(learner.theta, before[0])
    assert np.array_equal(learner.trace.layers, before[1])
    assert (learner.decay.d_s, learner.decay.lam_d) == before[2:4]
    assert learner.opt is before[4] and learner.pending is before[5] and learner.n == before[6]


def test_folded_regularizers_reach_the_trace():
    base = LearnerConfig(trace_kind="standard", lambda_max=(0.9,), **SMALL)
    folded = dataclasses.replace(base, trace_regularizers=True)
    a, _ = run_steps(base, 20)
    b, _ = run_steps(folded, 20)
    assert not np.array_equal(a.theta, b.theta)


def test_config_validation():
    with pytest.raises(ValueError, match="gamma"):
        LearnerConfig(gamma=1.0)
    with pytest.raises(ValueError, match="kappa"):
        LearnerConfig(kappa=-1.0)
    with pytest.raises(ValueError, match="lambda_max"):
        LearnerConfig(trace_kind="generalized", lambda_max=(0.5,))
