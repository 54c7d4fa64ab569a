"""Sequential two-arm randomization rules.

Each rule is described by the probability that the next patient is assigned
to treatment (+1) given the running arm counts. Probabilities are exact
``Fraction`` values; floats appear only at the sampling boundary and in the
vectorized helpers used by the Monte Carlo engine.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from randrank.errors import ValidationError

TREATMENT = 1
PLACEBO = -1

HALF = Fraction(1, 2)


class RuleKind(str, enum.Enum):
    COMPLETE = "complete"
    RANDOM_ALLOCATION = "random-allocation"
    TRUNCATED_BINOMIAL = "tbd"
    WEI_URN = "wei"


# accepted spellings on the command line
RULE_ALIASES = {
    "complete": RuleKind.COMPLETE,
    "cr": RuleKind.COMPLETE,
    "random-allocation": RuleKind.RANDOM_ALLOCATION,
    "random_allocation": RuleKind.RANDOM_ALLOCATION,
    "ra": RuleKind.RANDOM_ALLOCATION,
    "tbd": RuleKind.TRUNCATED_BINOMIAL,
    "truncated-binomial": RuleKind.TRUNCATED_BINOMIAL,
    "wei": RuleKind.WEI_URN,
    "wei-urn": RuleKind.WEI_URN,
}


@dataclass(frozen=True)
class RuleSpec:
    kind: RuleKind
    alpha: int = 0
    beta: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind is RuleKind.WEI_URN:
            if self.alpha < 0 or self.beta < 0:
                raise ValidationError("Wei urn parameters alpha, beta must be nonnegative integers")
            if self.alpha + self.beta < 1:
                raise ValidationError(
                    "Wei urn requires alpha + beta >= 1 (alpha = beta = 0 leaves the "
                    "assignment probability undefined)"
                )
        elif self.alpha or self.beta:
            raise ValidationError(f"alpha/beta only apply to the Wei urn, not {self.kind.value}")

    @classmethod
    def complete(cls) -> RuleSpec:
        return cls(RuleKind.COMPLETE)

    @classmethod
    def random_allocation(cls) -> RuleSpec:
        return cls(RuleKind.RANDOM_ALLOCATION)

    @classmethod
    def truncated_binomial(cls) -> RuleSpec:
        return cls(RuleKind.TRUNCATED_BINOMIAL)

    @classmethod
    def wei(cls, alpha: int, beta: int) -> RuleSpec:
        return cls(RuleKind.WEI_URN, alpha, beta)

    @classmethod
    def from_name(cls, name: str, alpha: int = 0, beta: int = 0) -> RuleSpec:
        try:
            kind = RULE_ALIASES[name.lower()]
        except KeyError:
            raise ValidationError(f"unknown rule {name!r}") from None
        if kind is RuleKind.WEI_URN:
            return cls(kind, alpha, beta)
        return cls(kind)

    @property
    def restricted(self) -> bool:
        """True for rules whose every sequence ends with n/2 per arm."""
        return self.kind in (RuleKind.RANDOM_ALLOCATION, RuleKind.TRUNCATED_BINOMIAL)

    def label(self) -> str:
        if self.kind is RuleKind.WEI_URN:
            return f"wei(alpha={self.alpha},beta={self.beta})"
        return self.kind.value


def check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValidationError(f"n must be an integer, got {n!r}")
    if n < 2 or n % 2:
        raise ValidationError(f"n must be even and >= 2, got {n}")
    return int(n)


@dataclass(frozen=True)
class RuleState:
    """Running arm counts after ``j`` of ``n`` assignments."""

    n: int
    j: int = 0
    s_plus: int = 0
    s_minus: int = 0

    @classmethod
    def start(cls, n: int) -> RuleState:
        return cls(check_n(n))

    @classmethod
    def from_history(cls, n: int, history: Sequence[int]) -> RuleState:
        state = cls.start(n)
        for t in history:
            state = state.advance(t)
        return state

    def advance(self, t: int) -> RuleState:
        if t == TREATMENT:
            return RuleState(self.n, self.j + 1, self.s_plus + 1, self.s_minus)
        if t == PLACEBO:
            return RuleState(self.n, self.j + 1, self.s_plus, self.s_minus + 1)
        raise ValidationError(f"assignment must be +1 or -1, got {t!r}")


@dataclass(frozen=True)
class AssignmentPath:
    n: int
    values: tuple

    def __post_init__(self):
        check_n(self.n)
        values = tuple(int(v) for v in self.values)
        if len(values) != self.n:
            raise ValidationError(f"path length {len(values)} does not match n={self.n}")
        if any(v not in (TREATMENT, PLACEBO) for v in values):
            raise ValidationError("path values must be +1 or -1")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, values: Sequence[int]) -> AssignmentPath:
        return cls(len(values), tuple(values))

    @classmethod
    def _trusted(cls, n: int, values: tuple) -> AssignmentPath:
        # skips validation; for enumerators that only emit +/-1 tuples of length n
        path = object.__new__(cls)
        object.__setattr__(path, "n", n)
        object.__setattr__(path, "values", values)
        return path

    @property
    def balanced(self) -> bool:
        return sum(self.values) == 0

    def negated(self) -> AssignmentPath:
        return AssignmentPath(self.n, tuple(-v for v in self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int8)


def validate_state(rule: RuleSpec, state: RuleState) -> None:
    check_n(state.n)
    if not 0 <= state.j < state.n:
        raise ValidationError(f"state j={state.j} must satisfy 0 <= j < n={state.n}")
    if state.s_plus < 0 or state.s_minus < 0 or state.s_plus + state.s_minus != state.j:
        raise ValidationError(
            f"arm counts ({state.s_plus}, {state.s_minus}) inconsistent with j={state.j}"
        )
    if rule.restricted and max(state.s_plus, state.s_minus) > state.n // 2:
        raise ValidationError(f"arm count exceeds n/2={state.n // 2} under {rule.label()}")


def prob_treatment(rule: RuleSpec, state: RuleState) -> Fraction:
    """Exact P(next assignment = +1 | arm counts so far)."""
    validate_state(rule, state)
    n, j, sp, sm = state.n, state.j, state.s_plus, state.s_minus
    half = n // 2
    if j == 0:
        return HALF
    kind = rule.kind
    if kind is RuleKind.COMPLETE:
        return HALF
    if kind is RuleKind.RANDOM_ALLOCATION:
        return max(Fraction(0), Fraction(half - sp, n - j))
    if kind is RuleKind.TRUNCATED_BINOMIAL:
        if sm == half:
            return Fraction(1)
        if sp == half:
            return Fraction(0)
        return HALF
    # Wei urn; j >= 1 here and alpha + beta >= 1, so the denominator is positive
    return Fraction(rule.alpha + rule.beta * sm, 2 * rule.alpha + rule.beta * j)


def cond_expectation(rule: RuleSpec, state: RuleState) -> Fraction:
    """Exact E(T_{j+1} | history) = 2 P(+1) - 1."""
    return 2 * prob_treatment(rule, state) - 1


def next_assignment(rule: RuleSpec, state: RuleState, u: float) -> tuple[int, RuleState]:
    if not 0.0 <= u < 1.0:
        raise ValidationError(f"uniform draw must lie in [0, 1), got {u}")
    t = TREATMENT if u < prob_treatment(rule, state) else PLACEBO
    return t, state.advance(t)


def sample_sequence(rule: RuleSpec, n: int, stream: np.random.Generator) -> AssignmentPath:
    state = RuleState.start(n)
    values = []
    for _ in range(n):
        t, state = next_assignment(rule, state, float(stream.random()))
        values.append(t)
    return AssignmentPath(n, tuple(values))


def path_probability(rule: RuleSpec, path: AssignmentPath) -> Fraction:
    state = RuleState.start(path.n)
    prob = Fraction(1)
    for t in path.values:
        p = prob_treatment(rule, state)
        prob *= p if t == TREATMENT else 1 - p
        if prob == 0:
            return prob
        state = state.advance(t)
    return prob


def prob_treatment_array(rule: RuleSpec, n: int, j: int, s_plus: np.ndarray) -> np.ndarray:
    """Float P(+1) for many states sharing ``n`` and ``j``; Monte Carlo fast path.

    ``s_plus`` holds the treatment counts after ``j`` assignments. States must
    be reachable under ``rule`` (no cap checks are made here).
    """
    s_plus = np.asarray(s_plus)
    if j == 0 or rule.kind is RuleKind.COMPLETE:
        return np.full(s_plus.shape, 0.5)
    half = n // 2
    s_minus = j - s_plus
    if rule.kind is RuleKind.RANDOM_ALLOCATION:
        return np.maximum(0.0, (half - s_plus) / (n - j))
    if rule.kind is RuleKind.TRUNCATED_BINOMIAL:
        p = np.full(s_plus.shape, 0.5)
        p[s_minus == half] = 1.0
        p[s_plus == half] = 0.0
        return p
    return (rule.alpha + rule.beta * s_minus) / (2.0 * rule.alpha + rule.beta * j)
