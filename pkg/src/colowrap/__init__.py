"""Nonstochastic K-armed bandits with delayed composite anonymous feedback.

Conventions used throughout the package: rounds ``t`` are 1-based (``t`` in
``1..T``) as in the usual bandit notation, arms are 0-based Python indices.
"""

from .core import (
    InvalidArmError,
    LossTensor,
    RegretRecord,
    TensorValidationError,
    comparator_loss,
    comparator_losses,
    composite_loss,
    composite_losses,
    regret,
)
from .policies import (
    Exp3,
    FtrlTsallis,
    LambdaSolution,
    default_tunings,
    make_policy,
    solve_lambda,
)
from .wrapper import BernoulliStream, RunRecord, is_update_round, run_episode

__version__ = "0.1.0"

__all__ = [
    "BernoulliStream",
    "Exp3",
    "FtrlTsallis",
    "InvalidArmError",
    "LambdaSolution",
    "LossTensor",
    "RegretRecord",
    "RunRecord",
    "TensorValidationError",
    "comparator_loss",
    "comparator_losses",
    "composite_loss",
    "composite_losses",
    "default_tunings",
    "is_update_round",
    "make_policy",
    "regret",
    "run_episode",
    "solve_lambda",
]
