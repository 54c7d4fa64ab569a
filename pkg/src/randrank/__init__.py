"""Randomization inference for linear rank statistics under sequential two-arm designs."""

from randrank.errors import CapacityError, DegenerateScoresError, DomainError, ValidationError
from randrank.rankstats import StatisticKind
from randrank.rules import AssignmentPath, RuleKind, RuleSpec, RuleState
from randrank.scores import NormalizedScores, RankVector, RawScores, ScoreFamily

__all__ = [
    "AssignmentPath",
    "CapacityError",
    "DegenerateScoresError",
    "DomainError",
    "NormalizedScores",
    "RankVector",
    "RawScores",
    "RuleKind",
    "RuleSpec",
    "RuleState",
    "ScoreFamily",
    "StatisticKind",
    "ValidationError",
]
