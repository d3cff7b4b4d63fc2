"""Eligibility traces over flat parameter vectors.

Three trace rules share one calling convention, ``update(gamma, lam_d, g)``:

* :class:`StandardTrace` accumulates, ``e <- gamma*lam*e + g``.
* :class:`ReplacingTrace` overwrites an element with the fresh gradient
  whenever the gradient dominates it in magnitude.
* :class:`GeneralizedTrace` keeps K layered traces with their own decay
  rates; each deeper layer copies the shallower one element-wise when the
  shallower layer has moved past it in its own direction.

``lam_d`` is the adaptive factor produced by :class:`AdaptiveDecay`; with
``kappa = 0`` it is identically one and every rule reduces to its fixed-decay
form. The module-level ``*_update`` functions are pure so that callers can
compute a candidate state and commit it only when the whole step succeeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

_TINY = float(np.finfo(np.float64).tiny)


def beta_sequence(k: int) -> np.ndarray:
    """Arithmetic injection weights 2(K-i)/(K(K-1)), i = 1..K.

    Nonincreasing, sums to one and ends in zero.
    """
    if k < 2:
        raise ValueError(f"need at least two trace layers, got {k}")
    i = np.arange(1, k + 1, dtype=np.float64)
    return 2.0 * (k - i) / (k * (k - 1))


def _check(g: np.ndarray, shape: tuple[int, ...]) -> None:
    if g.shape != shape:
        raise ValueError(f"gradient shape {g.shape} != trace shape {shape}")
    if not math.isfinite(float(np.sum(g))):
        raise ValueError("non-finite gradient")


def std_update(e, gamma, lam_max, lam_d, g):
    return (gamma * lam_max * lam_d) * e + g


def repl_update(e, gamma, lam_max, lam_d, g):
    return np.where(np.abs(g) > np.abs(e), g, (gamma * lam_max * lam_d) * e)


def gen_update(layers: Sequence[np.ndarray], lam_max, betas, gamma, lam_d, g):
    """One step of the layered rule. Returns the new layers as a (K, n) array.

    Layer 1 always decays and accumulates ``beta[0] * g``. Layer i > 1 takes
    the freshly updated layer i-1 wherever ``(e[i-1] - e_prev[i]) * e[i-1] > 0``
    and otherwise decays and accumulates ``beta[i] * g``.
    """
    prev = np.asarray(layers, dtype=np.float64)
    new = np.empty_like(prev)
    decay = np.array([gamma * lam * lam_d for lam in lam_max])
    _gen_kernel(prev, decay, np.asarray(betas, dtype=np.float64), g, new)
    return new


@numba.njit(cache=True, error_model="numpy")
def _gen_kernel(prev, decay, betas, g, new):
    k, n = prev.shape
    for j in range(n):
        new[0, j] = decay[0] * prev[0, j] + betas[0] * g[j]
    for i in range(1, k):
        d, b = decay[i], betas[i]
        for j in range(n):
            s = new[i - 1, j]
            p = prev[i, j]
            new[i, j] = s if (s - p) * s > 0.0 else d * p + b * g[j]


@dataclass
class StandardTrace:
    size: int
    lam_max: float
    e: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.lam_max <= 1.0:
            raise ValueError(f"lam_max must lie in [0, 1], got {self.lam_max}")
        self.e = np.zeros(self.size)

    def propose(self, gamma: float, lam_d: float, g: np.ndarray) -> list[np.ndarray]:
        _check(g, self.e.shape)
        return [std_update(self.e, gamma, self.lam_max, lam_d, g)]

    def commit(self, layers: list[np.ndarray]) -> None:
        (self.e,) = layers

    def update(self, gamma: float, lam_d: float, g: np.ndarray) -> np.ndarray:
        self.commit(self.propose(gamma, lam_d, g))
        return self.output

    @property
    def output(self) -> np.ndarray:
        return self.e

    def reset(self) -> None:
        self.e = np.zeros(self.size)


class ReplacingTrace(StandardTrace):
    def propose(self, gamma, lam_d, g):
        _check(g, self.e.shape)
        return [repl_update(self.e, gamma, self.lam_max, lam_d, g)]


@dataclass
class GeneralizedTrace:
    size: int
    lam_max: tuple[float, ...]
    betas: np.ndarray = field(init=False)
    layers: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lam_max = tuple(float(x) for x in self.lam_max)
        if len(self.lam_max) < 2:
            raise ValueError("a generalized trace needs K >= 2 layers")
        if any(not 0.0 <= lam <= 1.0 for lam in self.lam_max):
            raise ValueError(f"lam_max entries must lie in [0, 1], got {self.lam_max}")
        self.betas = beta_sequence(len(self.lam_max))
        self.reset()

    @property
    def k(self) -> int:
        return len(self.lam_max)

    def propose(self, gamma, lam_d, g):
        _check(g, self.layers[0].shape)
        return gen_update(self.layers, self.lam_max, self.betas, gamma, lam_d, g)

    def commit(self, layers):
        self.layers = np.asarray(layers)

    def update(self, gamma, lam_d, g):
        self.commit(self.propose(gamma, lam_d, g))
        return self.output

    @property
    def output(self) -> np.ndarray:
        return self.layers[-1]

    def reset(self) -> None:
        self.layers = np.zeros((len(self.lam_max), self.size))


@dataclass
class AdaptiveDecay:
    """Accumulated output divergence and the decay factor exp(-kappa*d_s)."""

    kappa: float
    d_s: float = 0.0
    lam_d: float = 1.0

    def __post_init__(self):
        if not self.kappa >= 0.0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")

    def peek(self, d_pi: float, d_v: float) -> tuple[float, float]:
        """The (d_s, lam_d) pair an update would produce, without applying it."""
        if not (d_pi >= 0.0 and d_v >= 0.0):
            raise ValueError(f"divergences must be nonnegative, got {d_pi}, {d_v}")
        d_s = self.lam_d * self.d_s + (d_pi + d_v)
        if not math.isfinite(d_s):
            raise ValueError("non-finite accumulated divergence")
        # floor keeps lam_d strictly positive if exp underflows
        return d_s, max(math.exp(-self.kappa * d_s), _TINY)

    def update(self, d_pi: float, d_v: float) -> float:
        self.d_s, self.lam_d = self.peek(d_pi, d_v)
        return self.lam_d

    def reset(self) -> None:
        self.d_s = 0.0
        self.lam_d = 1.0
