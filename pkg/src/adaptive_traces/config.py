"""Run configuration: flat ``key = value`` files plus command-line overrides.

Defaults follow the common hyperparameters used for the simulation grid
(gamma 0.99, learning rate 1e-4, clip 0.1, both regularizer gains 0.025) with
a desk-sized network of 3 layers x 64 units.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .envs import ENVIRONMENTS
from .learner import OPTIMIZERS, POLICY_FAMILIES, TRACE_KINDS, LearnerConfig

# (lambda1_max, lambda2_max, kappa)
DEFAULT_CONDITIONS: tuple[tuple[float, float, float], ...] = (
    (0.0, 0.0, 0.0),  # no traces
    (0.9, 0.0, 0.0),  # standard
    (0.0, 0.9, 0.0),  # replacing
    (0.9, 0.0, 1.0),  # adaptive standard
    (0.0, 0.9, 1.0),  # adaptive replacing
    (0.5, 0.9, 1.0),  # adaptive multi-timescale
)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    env: str = "swingup"
    episodes: int = 300
    max_steps: int = 0  # 0: the task's own limit
    gamma: float = 0.99
    alpha: float = 1e-4
    eps_clip: float = 0.1
    beta_de: float = 0.025
    beta_td: float = 0.025
    lambda1: float = 0.5
    lambda2: float = 0.9
    kappa: float = 1.0
    trace_kind: str = "auto"
    policy: str = "student_t"
    hidden_width: int = 64
    hidden_layers: int = 3
    optimizer: str = "adaptive_moment"
    pearson_samples: int = 16
    seed: int = 0
    eval_episodes: int = 50
    switch_episode: int = -1  # reach_switch only; -1 disables the swap
    persist_decay: bool = False
    trace_regularizers: bool = False
    layer_norm_affine: bool = True
    eval_every: int = 0  # >0: extra evaluation every N training episodes

    def __post_init__(self):
        checks = {
            "env": (self.env in ENVIRONMENTS, f"unknown environment {self.env!r}"),
            "episodes": (self.episodes >= 1, "must be >= 1"),
            "max_steps": (self.max_steps >= 0, "must be >= 0"),
            "gamma": (0.0 <= self.gamma < 1.0, "must lie in [0, 1)"),
            "alpha": (self.alpha >= 0.0, "must be >= 0"),
            "eps_clip": (self.eps_clip > 0.0, "must be > 0"),
            "beta_de": (self.beta_de >= 0.0, "must be >= 0"),
            "beta_td": (self.beta_td >= 0.0, "must be >= 0"),
            "lambda1": (0.0 <= self.lambda1 <= 1.0, "must lie in [0, 1]"),
            "lambda2": (0.0 <= self.lambda2 <= 1.0, "must lie in [0, 1]"),
            "kappa": (self.kappa >= 0.0, "must be >= 0"),
            "trace_kind": (self.trace_kind in TRACE_KINDS + ("auto",), f"unknown trace kind {self.trace_kind!r}"),
            "policy": (self.policy in POLICY_FAMILIES, f"unknown policy family {self.policy!r}"),
            "hidden_width": (self.hidden_width >= 1, "must be >= 1"),
            "hidden_layers": (self.hidden_layers >= 1, "must be >= 1"),
            "optimizer": (self.optimizer in OPTIMIZERS, f"unknown optimizer {self.optimizer!r}"),
            "pearson_samples": (self.pearson_samples >= 1, "must be >= 1"),
            "eval_episodes": (self.eval_episodes >= 1, "must be >= 1"),
            "switch_episode": (self.switch_episode >= -1, "must be >= 0, or -1 to disable"),
            "eval_every": (self.eval_every >= 0, "must be >= 0"),
        }
        for key, (ok, msg) in checks.items():
            if not ok:
                raise ConfigError(key, msg)

    @property
    def condition(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.kappa)

    def resolved_trace_kind(self) -> str:
        """``auto`` picks the rule the lambda pair describes: both zero means
        no trace, a single nonzero entry means the standard (first slot) or
        replacing (second slot) trace, both nonzero the two-layer trace."""
        if self.trace_kind != "auto":
            return self.trace_kind
        if self.lambda1 == 0.0 and self.lambda2 == 0.0:
            return "none"
        if self.lambda2 == 0.0:
            return "standard"
        if self.lambda1 == 0.0:
            return "replacing"
        return "generalized"

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            gamma=self.gamma,
            alpha=self.alpha,
            eps_clip=self.eps_clip,
            beta_de=self.beta_de,
            beta_td=self.beta_td,
            lambda_max=(self.lambda1, self.lambda2),
            kappa=self.kappa,
            trace_kind=self.resolved_trace_kind(),
            policy_family=self.policy,
            optimizer=self.optimizer,
            pearson_samples=self.pearson_samples,
            hidden_width=self.hidden_width,
            hidden_layers=self.hidden_layers,
            layer_norm_affine=self.layer_norm_affine,
            persist_decay=self.persist_decay,
            trace_regularizers=self.trace_regularizers,
        )

    def with_condition(self, condition, seed: int | None = None) -> "RunConfig":
        l1, l2, k = condition
        changes = dict(lambda1=float(l1), lambda2=float(l2), kappa=float(k))
        if seed is not None:
            changes["seed"] = int(seed)
        return dataclasses.replace(self, **changes)


KEYS = tuple(f.name for f in fields(RunConfig))
_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def _convert(key: str, raw) -> object:
    kind = _TYPES[key]
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            if key == "switch_episode" and text.lower() == "none":
                return -1
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(key, "unknown configuration key")
        values[key] = value
    return values


def parse_config(
    path: str | os.PathLike | None = None, overrides: Mapping[str, object] | None = None
) -> RunConfig:
    """Build a :class:`RunConfig` from an optional file; ``overrides`` win."""
    values: dict[str, object] = dict(read_config_file(path)) if path else {}
    for key, value in (overrides or {}).items():
        if key not in _TYPES:
            raise ConfigError(key, "unknown configuration key")
        if value is not None:
            values[key] = value
    return RunConfig(**{k: _convert(k, v) for k, v in values.items()})


def format_config(config: RunConfig) -> str:
    lines = []
    for key in KEYS:
        value = getattr(config, key)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_config(config: RunConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(format_config(config))
