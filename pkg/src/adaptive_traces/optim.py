"""Parameter update rules behind one contract: ``apply(theta, update, alpha)``.

``update`` is the descent direction before scaling (a gradient, or the
trace-weighted TD signal), so both rules move ``theta`` against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numba
import numpy as np


def _check(theta: np.ndarray, update: np.ndarray) -> None:
    if update.shape != theta.shape:
        raise ValueError(f"update shape {update.shape} != parameter shape {theta.shape}")
    if not np.isfinite(np.sum(update)):
        raise ValueError("non-finite update")


@dataclass(frozen=True)
class Plain:
    """theta' = theta - alpha * update."""

    def apply(self, theta, update, alpha):
        _check(theta, update)
        return theta - alpha * update, self


@dataclass(frozen=True)
class AdaptiveMoment:
    """Bias-corrected first/second moment normalization (Adam) with the
    AMSGrad running maximum on the corrected second moment."""

    size: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    v_max: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("m", "v", "v_max"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(self.size))

    def apply(self, theta, update, alpha):
        """Returns ``(new_theta, new_state)``; ``self`` is left untouched."""
        _check(theta, update)
        t = self.t + 1
        out = [np.empty_like(theta) for _ in range(4)]
        _adam_kernel(
            theta, update, self.m, self.v, self.v_max, alpha, self.beta1,
            self.beta2, 1.0 - self.beta1**t, 1.0 - self.beta2**t, self.eps, *out,
        )
        new_theta, m, v, v_max = out
        return new_theta, replace(self, t=t, m=m, v=v, v_max=v_max)


@numba.njit(cache=True, error_model="numpy", fastmath={"arcp", "contract"})
def _adam_kernel(theta, u, m, v, v_max, alpha, b1, b2, bc1, bc2, eps,
                 theta_out, m_out, v_out, v_max_out):
    c1 = 1.0 - b1
    c2 = 1.0 - b2
    inv_bc2 = 1.0 / bc2
    step = alpha / bc1
    for i in range(theta.shape[0]):
        ui = u[i]
        mi = b1 * m[i] + c1 * ui
        vi = b2 * v[i] + c2 * ui * ui
        v_hat = vi * inv_bc2
        if v_max[i] > v_hat:
            v_hat = v_max[i]
        m_out[i] = mi
        v_out[i] = vi
        v_max_out[i] = v_hat
        theta_out[i] = theta[i] - step * mi / (np.sqrt(v_hat) + eps)


def make_optimizer(kind: str, size: int):
    if kind == "plain":
        return Plain()
    if kind == "adaptive_moment":
        return AdaptiveMoment(size)
    raise ValueError(f"unknown optimizer {kind!r}")
