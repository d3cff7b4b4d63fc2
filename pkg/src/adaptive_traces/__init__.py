"""Online actor-critic learning with adaptive multi-timescale eligibility traces."""

from .config import DEFAULT_CONDITIONS, RunConfig, parse_config
from .learner import ActorCritic, Learner, LearnerConfig, Transition
from .runner import compare, emit_plotdata, evaluate, train

__all__ = [
    "DEFAULT_CONDITIONS",
    "RunConfig",
    "parse_config",
    "ActorCritic",
    "Learner",
    "LearnerConfig",
    "Transition",
    "compare",
    "emit_plotdata",
    "evaluate",
    "train",
]
