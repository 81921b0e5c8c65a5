"""Lossless finite-size probabilities of the q-composite scheme.

Everything here is computed with Python integers and :class:`fractions.Fraction`.
The coverage distribution contains an alternating inclusion-exclusion sum whose
terms are many orders of magnitude larger than the result, so there is no
floating-point shortcut anywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional

from .errors import CapacityError, DomainError, ParameterError

__all__ = [
    "MAX_POOL_SIZE",
    "MAX_CAPTURES",
    "MAX_COVERAGE",
    "ExactProbability",
    "SchemeParams",
    "OverlapDistribution",
    "CoverageDistribution",
    "binomial",
    "overlap_distribution",
    "link_probability",
    "find_pool_size",
    "coverage_distribution",
    "all_distinct_probability",
    "compromise_probability_exact",
    "compromise_probability_chan",
]

# Limits of the exact path. The cost of the coverage distribution grows like
# min(mK, P)**2 big-integer products, so that support length is what is capped;
# the pool size itself only enters through cheap binomials.
MAX_POOL_SIZE = 1_000_000
MAX_CAPTURES = 256
MAX_COVERAGE = 8192


class ExactProbability(Fraction):
    """A rational number in [0, 1], always stored in lowest terms.

    Arithmetic falls back to plain :class:`~fractions.Fraction` results, since
    sums and ratios of probabilities need not be probabilities. Use ``float(p)``
    for an explicitly rounded value.
    """

    __slots__ = ()

    def __new__(cls, numerator=0, denominator=None):
        self = super().__new__(cls, numerator, denominator)
        if self < 0 or self > 1:
            raise ValueError(f"probability out of range: {Fraction(self)}")
        return self

    def __repr__(self) -> str:
        return f"ExactProbability({self.numerator}, {self.denominator})"


def _check_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class SchemeParams:
    """Configuration of the q-composite scheme.

    ``n`` is optional because every key-level formula is independent of the
    network size; simulations require it.
    """

    K: int
    P: int
    q: int = 1
    n: Optional[int] = None

    def __post_init__(self):
        _check_int("K", self.K)
        _check_int("P", self.P)
        _check_int("q", self.q)
        if self.n is not None:
            _check_int("n", self.n)
        if not self.q <= self.K <= self.P:
            raise ParameterError(
                f"need 1 <= q <= K <= P, got q={self.q}, K={self.K}, P={self.P}"
            )
        if self.P > MAX_POOL_SIZE:
            raise CapacityError(f"P={self.P} exceeds the exact-path limit {MAX_POOL_SIZE}")


@dataclass(frozen=True)
class OverlapDistribution:
    """Distribution of the number ``u`` of keys shared by two random rings."""

    probabilities: tuple

    def __getitem__(self, u: int) -> ExactProbability:
        return self.probabilities[u]

    def __len__(self) -> int:
        return len(self.probabilities)

    def __iter__(self) -> Iterator[ExactProbability]:
        return iter(self.probabilities)


@dataclass(frozen=True)
class CoverageDistribution:
    """Distribution of the number ``tau`` of distinct keys held by ``m`` rings.

    ``probabilities[i]`` is the probability of ``tau = start + i``.
    """

    attack_size: int
    start: int
    probabilities: tuple

    @property
    def support(self) -> range:
        return range(self.start, self.start + len(self.probabilities))

    def __getitem__(self, tau: int) -> ExactProbability:
        if tau in self.support:
            return self.probabilities[tau - self.start]
        return ExactProbability(0)

    def items(self):
        return zip(self.support, self.probabilities)


def binomial(a: int, b: int) -> int:
    """C(a, b) for nonnegative integers, zero when ``b > a``."""
    return math.comb(a, b)


def _falling(x: int, k: int) -> int:
    return math.perm(x, k) if x >= 0 else 0


@lru_cache(maxsize=4096)
def _overlap_counts(K: int, P: int) -> tuple:
    # number of K-subsets of the pool sharing exactly u keys with a fixed ring
    return tuple(math.comb(K, u) * math.comb(P - K, K - u) for u in range(K + 1))


def _linked_count(K: int, P: int, q: int) -> int:
    return sum(_overlap_counts(K, P)[q:])


def overlap_distribution(params: SchemeParams) -> OverlapDistribution:
    """Exact probabilities that two independent rings share exactly ``u`` keys."""
    K, P = params.K, params.P
    total = math.comb(P, K)
    return OverlapDistribution(
        tuple(ExactProbability(c, total) for c in _overlap_counts(K, P))
    )


def _link_probability(K: int, P: int, q: int) -> Fraction:
    return Fraction(_linked_count(K, P, q), math.comb(P, K))


def link_probability(params: SchemeParams) -> ExactProbability:
    """Probability p_s that two rings share at least ``q`` keys."""
    return ExactProbability(_link_probability(params.K, params.P, params.q))


def find_pool_size(K: int, q: int, target_ps: float) -> int:
    """Integer pool size whose link probability is closest to ``target_ps``.

    p_s is nonincreasing in P, equal to 1 at P = K, so a doubling bracket followed
    by bisection locates the crossing. Ties go to the smaller pool.
    """
    _check_int("K", K)
    _check_int("q", q)
    if q > K:
        raise ParameterError(f"q={q} exceeds K={K}")
    if not 0 < target_ps <= 1:
        raise ParameterError(f"target p_s must lie in (0, 1], got {target_ps}")
    target = Fraction(target_ps)

    def ps(P: int) -> Fraction:
        return _link_probability(K, P, q)

    if ps(K) <= target:
        return K
    lo, hi = K, 2 * K
    while ps(hi) > target:
        if hi >= MAX_POOL_SIZE:
            raise CapacityError(
                f"p_s={target_ps} needs a pool larger than {MAX_POOL_SIZE} (K={K}, q={q})"
            )
        lo, hi = hi, min(2 * hi, MAX_POOL_SIZE)
    # invariant: ps(lo) > target >= ps(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ps(mid) > target:
            lo = mid
        else:
            hi = mid
    if abs(ps(lo) - target) <= abs(ps(hi) - target):
        return lo
    return hi


def _check_attack(params: SchemeParams, m: int) -> int:
    _check_int("m", m)
    if m > MAX_CAPTURES:
        raise CapacityError(f"m={m} exceeds the exact-path limit {MAX_CAPTURES}")
    top = min(m * params.K, params.P)
    if top > MAX_COVERAGE:
        raise CapacityError(
            f"min(mK, P)={top} exceeds the exact-path limit {MAX_COVERAGE}"
        )
    return top


@lru_cache(maxsize=256)
def _cover_counts(K: int, m: int, top: int) -> tuple:
    """Number of m-tuples of K-subsets of a tau-set whose union is the whole set.

    Entry ``tau - K`` holds the count for tau in [K, top], via inclusion-exclusion
    over the keys left uncovered.
    """
    powers = [math.comb(s, K) ** m for s in range(top + 1)]
    counts = []
    for tau in range(K, top + 1):
        acc = 0
        c = 1  # C(tau, j)
        for j in range(tau - K + 1):
            if j & 1:
                acc -= c * powers[tau - j]
            else:
                acc += c * powers[tau - j]
            c = c * (tau - j) // (j + 1)
        counts.append(acc)
    return tuple(counts)


def _coverage_numerators(params: SchemeParams, m: int, top: int) -> list:
    # A_tau = numerators[tau - K] / C(P, K)**m
    K, P = params.K, params.P
    covers = _cover_counts(K, m, top)
    return [math.comb(P, K + i) * s for i, s in enumerate(covers)]


def coverage_distribution(params: SchemeParams, m: int) -> CoverageDistribution:
    """Distribution A_tau of the number of distinct keys on ``m`` captured nodes."""
    top = _check_attack(params, m)
    total = math.comb(params.P, params.K) ** m
    numerators = _coverage_numerators(params, m, top)
    return CoverageDistribution(
        attack_size=m,
        start=params.K,
        probabilities=tuple(ExactProbability(a, total) for a in numerators),
    )


def all_distinct_probability(params: SchemeParams, m: int) -> ExactProbability:
    """Probability that ``m`` random rings are pairwise disjoint."""
    _check_int("m", m)
    K, P = params.K, params.P
    if m * K > P:
        raise DomainError(f"mK={m * K} exceeds P={P}: rings cannot all be disjoint")
    num = 1
    for j in range(m):
        num *= math.comb(P - j * K, K)
    return ExactProbability(num, math.comb(P, K) ** m)


def _linked_weights(params: SchemeParams) -> list:
    # (u, N_u) for every overlap that sets up a link
    counts = _overlap_counts(params.K, params.P)
    return [(u, counts[u]) for u in range(params.q, params.K + 1) if counts[u]]


def compromise_probability_exact(params: SchemeParams, m: int) -> ExactProbability:
    """Probability that a link between two non-captured nodes is compromised.

    Conditions on the two endpoints sharing at least ``q`` keys and averages over
    the number of distinct keys exposed by ``m`` random captures. A link is
    compromised when every key it shares lies in the exposed set.
    """
    top = _check_attack(params, m)
    K, P = params.K, params.P
    weights = _linked_weights(params)
    linked = sum(w for _, w in weights)
    if linked == 0:
        raise DomainError("p_s = 0: no link can be set up")
    # C(tau, u) / C(P, u) == perm(tau, u) * perm(P - u, K - u) / perm(P, K)
    scaled = [(u, w * _falling(P - u, K - u)) for u, w in weights]
    numer = 0
    for offset, a in enumerate(_coverage_numerators(params, m, top)):
        tau = K + offset
        inner = sum(math.perm(tau, u) * w for u, w in scaled if u <= tau)
        numer += a * inner
    denom = math.comb(P, K) ** m * math.perm(P, K) * linked
    return ExactProbability(numer, denom)


def compromise_probability_chan(params: SchemeParams, m: int) -> ExactProbability:
    """The historical formula, which treats the shared keys of a link as exposed
    independently of each other with probability ``1 - (1 - K/P)**m`` each.

    Incorrect whenever a link can share two or more keys; kept only for
    side-by-side comparisons with :func:`compromise_probability_exact`.
    """
    _check_int("m", m)
    K, P = params.K, params.P
    weights = _linked_weights(params)
    linked = sum(w for _, w in weights)
    if linked == 0:
        raise DomainError("p_s = 0: no link can be set up")
    exposed = 1 - (1 - Fraction(K, P)) ** m
    total = sum(exposed**u * w for u, w in weights)
    return ExactProbability(total / linked)
