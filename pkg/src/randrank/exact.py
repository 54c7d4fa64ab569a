"""Exhaustive enumeration of assignment paths in exact rational arithmetic.

Every positive-probability path of a rule is listed with its probability as a
``Fraction``. Statistic values are binary64; probabilities stay rational until
they are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from randrank.errors import CapacityError, ValidationError
from randrank.rankstats import StatisticKind, check_kind, tail_weights, tau_of_path
from randrank.rules import (
    AssignmentPath,
    RuleKind,
    RuleSpec,
    RuleState,
    check_n,
    cond_expectation,
    prob_treatment,
)
from randrank.scores import NormalizedScores
from randrank.tau import TauPmf

MAX_EXACT_N = 20
MERGE_TOL = 1e-12


def _check_capacity(n: int) -> int:
    n = check_n(n)
    if n > MAX_EXACT_N:
        raise CapacityError(f"exact enumeration is capped at n={MAX_EXACT_N}, got n={n}")
    return n


@dataclass
class PathDistribution:
    rule: RuleSpec
    n: int
    entries: list  # (AssignmentPath, Fraction)

    def matrix(self) -> np.ndarray:
        """Paths stacked row-wise as an int8 matrix."""
        return np.array([path.values for path, _ in self.entries], dtype=np.int8).reshape(-1, self.n)

    def probs(self) -> list[Fraction]:
        return [p for _, p in self.entries]

    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for _, p in self.entries])


@dataclass
class ExactStatDistribution:
    support: np.ndarray
    probs: list  # Fractions

    def mean(self) -> float:
        return math.fsum(float(p) * v for v, p in zip(self.support, self.probs))

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum(float(p) * (v - mu) ** 2 for v, p in zip(self.support, self.probs))


def enumerate_paths(rule: RuleSpec, n: int) -> PathDistribution:
    """All paths with positive probability, in lexicographic order (+1 first)."""
    n = _check_capacity(n)

    @lru_cache(maxsize=None)
    def step(j, s_plus):
        p = prob_treatment(rule, RuleState(n, j, s_plus, j - s_plus))
        return p, 1 - p

    entries = []
    prefix = [0] * n

    def expand(j, s_plus, prob):
        if j == n:
            entries.append((AssignmentPath._trusted(n, tuple(prefix)), prob))
            return
        p_plus, p_minus = step(j, s_plus)
        if p_plus:
            prefix[j] = 1
            expand(j + 1, s_plus + 1, prob * p_plus)
        if p_minus:
            prefix[j] = -1
            expand(j + 1, s_plus, prob * p_minus)

    expand(0, 0, Fraction(1))
    return PathDistribution(rule, n, entries)


def exact_marginals(rule: RuleSpec, n: int) -> list[Fraction]:
    """E T_j for j = 1..n, exactly."""
    dist = enumerate_paths(rule, n)
    totals = [Fraction(0)] * dist.n
    for path, prob in dist.entries:
        for j, t in enumerate(path.values):
            totals[j] += prob if t == 1 else -prob
    return totals


def _prefix_counts(m: np.ndarray) -> np.ndarray:
    """Treatment counts before each position: column j holds S^(+1) after j assignments."""
    plus = np.cumsum(m == 1, axis=1)
    return np.hstack([np.zeros((m.shape[0], 1), dtype=plus.dtype), plus[:, :-1]])


def cond_expectation_matrix(rule: RuleSpec, m: np.ndarray) -> np.ndarray:
    """E(T_j | past) for every row of a path matrix, from the exact rule table."""
    n = m.shape[1]
    table = np.zeros((n, n + 1))
    for j in range(n):
        for sp in range(j + 1):
            sm = j - sp
            if rule.restricted and max(sp, sm) > n // 2:
                continue
            table[j, sp] = float(cond_expectation(rule, RuleState(n, j, sp, sm)))
    before = _prefix_counts(m)
    return table[np.arange(n)[None, :], before]


def unforced_mask(m: np.ndarray) -> np.ndarray:
    """True at positions j <= n - tau, i.e. before either arm is full."""
    n = m.shape[1]
    before_plus = _prefix_counts(m)
    before_minus = np.arange(n)[None, :] - before_plus
    return np.maximum(before_plus, before_minus) < n // 2


def _statistic_values(rule, kind, s, dist):
    m = dist.matrix().astype(float)
    if kind is StatisticKind.PLAIN:
        return m @ s.s
    if kind is StatisticKind.CENTERED:
        return (m - cond_expectation_matrix(rule, m)) @ s.s
    pmf = exact_tau_pmf_from(dist)
    v = float(np.dot(s.s**2, tail_weights(pmf)))
    return ((m * unforced_mask(m)) @ s.s) / math.sqrt(v)


def _merge(values: np.ndarray, probs: list) -> ExactStatDistribution:
    order = np.argsort(values, kind="stable")
    support, merged = [], []
    for i in order:
        v = float(values[i])
        if support and abs(v - support[-1]) <= MERGE_TOL:
            merged[-1] += probs[i]
        else:
            support.append(v)
            merged.append(probs[i])
    return ExactStatDistribution(np.array(support), merged)


def exact_statistic_distribution(
    rule: RuleSpec, kind: StatisticKind, s: NormalizedScores
) -> ExactStatDistribution:
    kind = StatisticKind(kind)
    check_kind(rule, kind)
    dist = enumerate_paths(rule, s.n)
    return _merge(_statistic_values(rule, kind, s, dist), dist.probs())


def exact_expected_char_product(rule: RuleSpec, s: NormalizedScores, lam: float) -> complex:
    """E prod_j (1 + i lam s_j T_j) over the exact path distribution."""
    dist = enumerate_paths(rule, s.n)
    m = dist.matrix().astype(float)
    pi = np.prod(1.0 + 1j * lam * (m * s.s), axis=1)
    w = dist.float_probs()
    return complex(math.fsum(w * pi.real), math.fsum(w * pi.imag))


def exact_tau_pmf_from(dist: PathDistribution) -> TauPmf:
    if dist.rule.kind is not RuleKind.TRUNCATED_BINOMIAL:
        raise ValidationError("tail length is defined for the truncated binomial rule only")
    half = dist.n // 2
    probs = [Fraction(0)] * half
    for path, prob in dist.entries:
        probs[tau_of_path(path) - 1] += prob
    return TauPmf(dist.n, np.array([float(p) for p in probs]), tuple(probs))


def exact_tau_pmf(n: int) -> TauPmf:
    return exact_tau_pmf_from(enumerate_paths(RuleSpec.truncated_binomial(), n))


def exact_variance_U(s: NormalizedScores, n: int | None = None) -> np.ndarray:
    """Var of U_j = 1{j <= n - tau} s_j (T_j - E(T_j | past)) under the truncated binomial rule."""
    n = s.n if n is None else n
    if n != s.n:
        raise ValidationError(f"scores have length {s.n}, expected {n}")
    rule = RuleSpec.truncated_binomial()
    dist = enumerate_paths(rule, n)
    m = dist.matrix().astype(float)
    u = unforced_mask(m) * (m - cond_expectation_matrix(rule, m)) * s.s
    w = dist.float_probs()
    first = np.array([math.fsum(w * u[:, j]) for j in range(n)])
    second = np.array([math.fsum(w * u[:, j] ** 2) for j in range(n)])
    return second - first**2
