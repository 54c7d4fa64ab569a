"""Linear rank statistics evaluated on a realized assignment path."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from randrank.errors import ValidationError
from randrank.rules import (
    AssignmentPath,
    RuleKind,
    RuleSpec,
    RuleState,
    TREATMENT,
    prob_treatment,
)
from randrank.scores import NormalizedScores, RawScores
from randrank.tau import TauPmf, tau_cdf


class StatisticKind(str, enum.Enum):
    PLAIN = "plain"
    CENTERED = "centered"
    TBD_STOPPED = "tbd"

    @classmethod
    def parse(cls, name: str) -> StatisticKind:
        aliases = {"tbd-stopped": "tbd", "tbdstopped": "tbd", "stopped": "tbd"}
        try:
            return cls(aliases.get(name.lower(), name.lower()))
        except ValueError:
            raise ValidationError(f"unknown statistic {name!r}") from None


def check_kind(rule: RuleSpec, kind: StatisticKind) -> None:
    if kind is StatisticKind.TBD_STOPPED and rule.kind is not RuleKind.TRUNCATED_BINOMIAL:
        raise ValidationError("the stopped statistic is only defined for the truncated binomial rule")


def _check_lengths(n_scores: int, path: AssignmentPath) -> None:
    if n_scores != path.n:
        raise ValidationError(f"scores have length {n_scores} but path has length {path.n}")


def linear_rank_statistic(a: RawScores, path: AssignmentPath) -> float:
    """L_n = sum_j (a_j - mean(a)) T_j."""
    _check_lengths(a.n, path)
    return float(np.dot(a.a - a.a.mean(), path.as_array()))


def normalized_statistic(s: NormalizedScores, path: AssignmentPath) -> float:
    """S_n = sum_j s_j T_j."""
    _check_lengths(s.n, path)
    return float(np.dot(s.s, path.as_array()))


def conditional_expectations(rule: RuleSpec, path: AssignmentPath) -> list[Fraction]:
    """E(T_j | T_1..T_{j-1}) along ``path``, exactly.

    Raises ``ValidationError`` if the path has probability zero under ``rule``.
    """
    state = RuleState.start(path.n)
    out = []
    for j, t in enumerate(path.values, start=1):
        p = prob_treatment(rule, state)
        if (p if t == TREATMENT else 1 - p) == 0:
            raise ValidationError(f"path has probability zero under {rule.label()} (step {j})")
        out.append(2 * p - 1)
        state = state.advance(t)
    return out


def centered_statistic(rule: RuleSpec, s: NormalizedScores, path: AssignmentPath) -> float:
    """sum_j s_j (T_j - E(T_j | past)), the martingale-centered statistic."""
    _check_lengths(s.n, path)
    e = np.array([float(x) for x in conditional_expectations(rule, path)])
    return float(np.dot(s.s, path.as_array() - e))


def tau_of_path(path: AssignmentPath) -> int:
    """Number of forced assignments after the first arm reaches n/2."""
    if not path.balanced:
        raise ValidationError("tail length needs a balanced path")
    half = path.n // 2
    plus = minus = 0
    for j, t in enumerate(path.values, start=1):
        if t == TREATMENT:
            plus += 1
        else:
            minus += 1
        if j >= half and max(plus, minus) == half:
            return path.n - j
    raise AssertionError("unreachable for a balanced path")


def tail_run_length(path: AssignmentPath) -> int:
    """Length of the constant run closing the path (equals tau when balanced)."""
    if not path.balanced:
        raise ValidationError("tail length needs a balanced path")
    last = path.values[-1]
    run = 0
    for t in reversed(path.values):
        if t != last:
            break
        run += 1
    return run


def tail_weights(pmf: TauPmf) -> np.ndarray:
    """w_j = P(tau <= n - j), j = 1..n; equals 1 on the first half."""
    n = pmf.n
    return np.array([tau_cdf(pmf, n - j) for j in range(1, n + 1)])


@dataclass(frozen=True)
class TbdDenominator:
    n: int
    v: float

    def __post_init__(self):
        if not 0.0 < self.v <= 1.0 + 1e-12:
            raise ValidationError(f"denominator variance must lie in (0, 1], got {self.v}")


def tbd_denominator(s: NormalizedScores, pmf: TauPmf) -> TbdDenominator:
    if s.n != pmf.n:
        raise ValidationError(f"scores (n={s.n}) and tau pmf (n={pmf.n}) disagree")
    return TbdDenominator(s.n, float(np.dot(s.s * s.s, tail_weights(pmf))))


def tbd_statistic(s: NormalizedScores, path: AssignmentPath, pmf: TauPmf) -> float:
    """Stopped statistic: sum over the unforced prefix j <= n - tau, standardized."""
    _check_lengths(s.n, path)
    denom = tbd_denominator(s, pmf)
    stop = path.n - tau_of_path(path)
    numerator = float(np.dot(s.s[:stop], path.as_array()[:stop]))
    return numerator / math.sqrt(denom.v)


def characteristic_product(s: NormalizedScores, path: AssignmentPath, lam: float) -> complex:
    """prod_j (1 + i lam s_j T_j)."""
    _check_lengths(s.n, path)
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    z = s.s * path.as_array()
    out = complex(1.0)
    for zj in z:
        out *= complex(1.0, lam * zj)
    return out
