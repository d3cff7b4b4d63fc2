"""Diagonal normal and student-t action distributions.

Every density function returns its value together with the gradient with
respect to the distribution parameters (``mu``, ``sigma`` and, for the
student-t, the shared degrees of freedom ``nu``). The network backward pass
consumes those gradients directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import digamma, gammaln

LOG_2PI = math.log(2.0 * math.pi)
RATIO_CLAMP = 1e6


@dataclass(frozen=True)
class DiagNormal:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        if mu.shape != sigma.shape:
            raise ValueError(f"mu shape {mu.shape} != sigma shape {sigma.shape}")
        if not np.all(sigma > 0):
            raise ValueError("sigma must be strictly positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class DiagStudentT:
    """Independent student-t marginals sharing one degrees-of-freedom ``nu``."""

    mu: np.ndarray
    sigma: np.ndarray
    nu: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        nu = float(np.asarray(self.nu).reshape(-1)[0])
        if mu.shape != sigma.shape:
            raise ValueError(f"mu shape {mu.shape} != sigma shape {sigma.shape}")
        if not np.all(sigma > 0):
            raise ValueError("sigma must be strictly positive")
        if not nu > 2.0:
            raise ValueError(f"nu must exceed 2, got {nu}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "nu", nu)

    @property
    def dim(self) -> int:
        return self.mu.size


Distribution = Union[DiagNormal, DiagStudentT]


@dataclass(frozen=True)
class DivergenceReport:
    d_pi: float
    d_v: float
    saturated: bool = False


def sample(dist: Distribution, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dist.dim)
    if isinstance(dist, DiagStudentT):
        # one chi-square draw per dimension: independent marginals
        w = rng.chisquare(dist.nu, size=dist.dim)
        z = z / np.sqrt(w / dist.nu)
    return dist.mu + dist.sigma * z


def log_prob(dist: Distribution, action) -> tuple[float, dict[str, np.ndarray]]:
    """Log-density of ``action`` and its gradients.

    Returns:
        ``(logp, grads)`` where ``grads`` has keys ``mu`` and ``sigma``
        (arrays) and, for the student-t, ``nu`` (shape ``(1,)``).
    """
    a = np.atleast_1d(np.asarray(action, dtype=np.float64))
    if a.shape != dist.mu.shape:
        raise ValueError(f"action shape {a.shape} != {dist.mu.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite action")
    sigma = dist.sigma
    z = (a - dist.mu) / sigma
    if isinstance(dist, DiagNormal):
        logp = float(np.sum(-0.5 * z * z - np.log(sigma)) - 0.5 * dist.dim * LOG_2PI)
        return logp, {"mu": z / sigma, "sigma": (z * z - 1.0) / sigma}

    nu = dist.nu
    d = dist.dim
    q = 1.0 + z * z / nu
    log_q = np.log1p(z * z / nu)
    const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    logp = float(d * const - np.sum(np.log(sigma)) - 0.5 * (nu + 1.0) * np.sum(log_q))
    w = (nu + 1.0) / (nu * q)
    g_mu = w * z / sigma
    g_sigma = (w * z * z - 1.0) / sigma
    g_nu = d * (0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu)
    g_nu += float(np.sum(-0.5 * log_q + 0.5 * (nu + 1.0) * z * z / (nu * nu * q)))
    return logp, {"mu": g_mu, "sigma": g_sigma, "nu": np.array([g_nu])}


def kl_normal(p_new: DiagNormal, p_old: DiagNormal) -> float:
    """KL(p_new || p_old) for diagonal Gaussians, summed over dimensions."""
    if p_new.mu.shape != p_old.mu.shape:
        raise ValueError("dimension mismatch")
    if np.array_equal(p_new.mu, p_old.mu) and np.array_equal(p_new.sigma, p_old.sigma):
        return 0.0
    r = p_new.sigma / p_old.sigma
    dm = (p_new.mu - p_old.mu) / p_old.sigma
    # r^2 - 1 - 2 log r via expm1 keeps precision when r is close to one
    log_r2 = 2.0 * np.log(r)
    kl = 0.5 * np.sum(np.expm1(log_r2) - log_r2 + dm * dm)
    return max(float(kl), 0.0)


def pearson_from_log_ratios(log_ratios) -> tuple[float, bool]:
    """Mean of (ratio - 1)^2 with the ratio clamped at ``RATIO_CLAMP``."""
    lr = np.asarray(log_ratios, dtype=np.float64)
    cap = math.log(RATIO_CLAMP)
    saturated = bool(np.any(lr > cap))
    ratio_m1 = np.expm1(np.minimum(lr, cap))
    return float(np.mean(ratio_m1 * ratio_m1)), saturated


def pearson_mc(
    p_new: Distribution, p_old: Distribution, m: int, rng: np.random.Generator
) -> tuple[float, bool]:
    """Monte-Carlo Pearson chi-square divergence, samples drawn from ``p_old``.

    Returns ``(value, saturated)``; ``saturated`` is set when any density
    ratio hit the clamp.
    """
    if type(p_new) is not type(p_old):
        raise TypeError("distribution family mismatch")
    if p_new.dim != p_old.dim:
        raise ValueError("dimension mismatch")
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    a = _sample_many(p_old, m, rng)
    log_ratios = _logp_rows(p_new, a) - _logp_rows(p_old, a)
    return pearson_from_log_ratios(log_ratios)


def value_divergence(v_new: float, v_old: float) -> float:
    diff = float(v_new) - float(v_old)
    if not math.isfinite(diff):
        raise ValueError("non-finite value estimate")
    return 0.5 * diff * diff


def entropy_estimate(dist: Distribution, action) -> tuple[float, dict[str, np.ndarray]]:
    """Single-sample entropy estimate -log p(action) and its parameter gradients.

    The action is held fixed; only the distribution parameters carry gradient.
    """
    logp, grads = log_prob(dist, action)
    return -logp, {k: -v for k, v in grads.items()}


def normal_entropy(dist: DiagNormal) -> float:
    return float(np.sum(0.5 * np.log(2.0 * math.pi * math.e * dist.sigma**2)))


def _sample_many(dist: Distribution, m: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((m, dist.dim))
    if isinstance(dist, DiagStudentT):
        w = rng.chisquare(dist.nu, size=(m, dist.dim))
        z = z / np.sqrt(w / dist.nu)
    return dist.mu + dist.sigma * z


def _logp_rows(dist: Distribution, a: np.ndarray) -> np.ndarray:
    z = (a - dist.mu) / dist.sigma
    log_sigma = np.sum(np.log(dist.sigma))
    if isinstance(dist, DiagNormal):
        return -0.5 * np.sum(z * z, axis=1) - log_sigma - 0.5 * dist.dim * LOG_2PI
    nu = dist.nu
    const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    return dist.dim * const - log_sigma - 0.5 * (nu + 1.0) * np.sum(np.log1p(z * z / nu), axis=1)
