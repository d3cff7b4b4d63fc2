"""Seedable continuous-control tasks integrated with semi-implicit Euler.

* ``cartpole``: keep a pole balanced on a cart driven by a bounded force.
* ``swingup``: pump energy into an under-actuated pendulum and hold it up.
* ``reach_switch``: steer a point to one of two targets; which target is
  rewarded swaps at a configured episode, the other becomes a penalty.

Actions are clipped to the bounds in :class:`EnvSpec` before integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    max_steps: int

    def __post_init__(self):
        if len(self.action_low) != self.action_dim or len(self.action_high) != self.action_dim:
            raise ValueError("bounds must have one entry per action dimension")
        for lo, hi in zip(self.action_low, self.action_high):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid action bounds ({lo}, {hi})")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool


class Env:
    spec: EnvSpec

    def __init__(self, seed: int = 0, max_steps: int | None = None):
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self._max_steps = max_steps

    @property
    def max_steps(self) -> int:
        return self._max_steps or self.spec.max_steps

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._t = 0
        self._reset()
        return self.observe()

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (self.spec.action_dim,):
            raise ValueError(f"action shape {a.shape} != ({self.spec.action_dim},)")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite action")
        a = np.clip(a, self.spec.action_low, self.spec.action_high)
        reward, terminal = self._step(a)
        self._t += 1
        truncated = not terminal and self._t >= self.max_steps
        return StepResult(self.observe(), float(reward), terminal, truncated)

    def _reset(self) -> None:
        raise NotImplementedError

    def _step(self, a: np.ndarray) -> tuple[float, bool]:
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError


class CartPoleContinuous(Env):
    spec = EnvSpec("cartpole", 4, 1, (-1.0,), (1.0,), 200)

    gravity = 9.8
    mass_cart = 1.0
    mass_pole = 0.1
    half_length = 0.5
    force_scale = 10.0
    dt = 0.02
    angle_limit = 0.2
    x_limit = 2.4

    def _reset(self):
        self.state = self._rng.uniform(-0.05, 0.05, size=4)

    def _step(self, a):
        x, x_dot, th, th_dot = self.state
        force = self.force_scale * a[0]
        total = self.mass_cart + self.mass_pole
        pml = self.mass_pole * self.half_length
        cos, sin = math.cos(th), math.sin(th)
        temp = (force + pml * th_dot * th_dot * sin) / total
        th_acc = (self.gravity * sin - cos * temp) / (
            self.half_length * (4.0 / 3.0 - self.mass_pole * cos * cos / total)
        )
        x_acc = temp - pml * th_acc * cos / total
        x_dot = x_dot + self.dt * x_acc
        x = x + self.dt * x_dot
        th_dot = th_dot + self.dt * th_acc
        th = th + self.dt * th_dot
        self.state = np.array([x, x_dot, th, th_dot])
        terminal = abs(th) > self.angle_limit or abs(x) > self.x_limit
        return 1.0, terminal

    def observe(self):
        return self.state.copy()


class PendulumSwingup(Env):
    """Point-mass pendulum. Internally the angle is measured from the
    hanging position so the bottom equilibrium is exact; observations use
    the angle from upright encoded as (cos, sin) plus angular velocity."""

    spec = EnvSpec("swingup", 3, 1, (-1.0,), (1.0,), 200)

    gravity = 9.8
    mass = 1.0
    length = 1.0
    torque_scale = 2.0
    dt = 0.05

    def __init__(self, seed=0, max_steps=None, damping: float = 0.05):
        super().__init__(seed, max_steps)
        self.damping = damping

    def _reset(self):
        self.angle = self._rng.uniform(-0.05, 0.05)  # from hanging
        self.velocity = self._rng.uniform(-0.05, 0.05)

    def _step(self, a):
        torque = self.torque_scale * a[0]
        inertia = self.mass * self.length**2
        reward = 0.5 * (1.0 - math.cos(self.angle)) - 0.001 * torque * torque
        acc = (
            -self.gravity / self.length * math.sin(self.angle)
            + (torque - self.damping * self.velocity) / inertia
        )
        self.velocity += self.dt * acc
        self.angle = _wrap(self.angle + self.dt * self.velocity)
        return reward, False

    @property
    def upright_angle(self) -> float:
        """Angle measured from upright, in [-pi, pi)."""
        return _wrap(self.angle + math.pi)

    def set_state(self, upright_angle: float, velocity: float) -> None:
        self.angle = _wrap(upright_angle - math.pi)
        self.velocity = velocity

    def energy(self) -> float:
        inertia = self.mass * self.length**2
        return 0.5 * inertia * self.velocity**2 - self.mass * self.gravity * self.length * math.cos(self.angle)

    def observe(self):
        # cos/sin of (angle + pi)
        return np.array([-math.cos(self.angle), -math.sin(self.angle), self.velocity])


class PointReachSwitch(Env):
    """2-D point steered by per-step displacement. Episodes before
    ``switch_episode`` reward the right target; from then on the two
    targets exchange roles."""

    spec = EnvSpec("reach_switch", 4, 2, (-0.05, -0.05), (0.05, 0.05), 180)

    targets = (np.array([0.5, 0.5]), np.array([-0.5, 0.5]))
    shaping = 5.0
    radius = 0.05
    bonus = 100.0

    def __init__(self, seed=0, max_steps=None, switch_episode: int | None = None):
        super().__init__(seed, max_steps)
        self.switch_episode = switch_episode
        self.episode = -1

    def reset(self, seed=None):
        self.episode += 1
        return super().reset(seed)

    @property
    def switched(self) -> bool:
        return self.switch_episode is not None and self.episode >= self.switch_episode

    @property
    def target(self) -> np.ndarray:
        return self.targets[1] if self.switched else self.targets[0]

    @property
    def decoy(self) -> np.ndarray:
        return self.targets[0] if self.switched else self.targets[1]

    def _reset(self):
        self.position = np.zeros(2)

    def _step(self, a):
        self.position = np.clip(self.position + a, -1.0, 1.0)
        diff = self.position - self.target
        dist2 = float(diff @ diff)
        reward = math.exp(-self.shaping * dist2)
        if math.sqrt(dist2) < self.radius:
            return reward + self.bonus, True
        if float(np.linalg.norm(self.position - self.decoy)) < self.radius:
            return reward - self.bonus, True
        return reward, False

    def observe(self):
        return np.concatenate([self.position, self.target])


ENVIRONMENTS = {
    "cartpole": CartPoleContinuous,
    "swingup": PendulumSwingup,
    "reach_switch": PointReachSwitch,
}


def make_env(name: str, seed: int = 0, max_steps: int | None = None, **kwargs) -> Env:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(seed=seed, max_steps=max_steps, **kwargs)


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi
