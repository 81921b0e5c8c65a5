"""Node-replication attacks: success probabilities and the adversary's budget split.

A replica carries ``b`` pool keys and is deployed ``c`` times; each copy lands
next to ``d`` benign nodes. The attack succeeds when any copy shares at least
``q`` keys with any benign neighbour.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .asymptotics import RegimeWarning, log_factorial
from .errors import DomainError, ParameterError
from .exact import ExactProbability, SchemeParams

__all__ = [
    "ReplicationSpec",
    "BudgetModel",
    "Allocation",
    "miss_probability",
    "replication_success",
    "replication_success_asymptotic",
    "min_replicas",
    "optimal_allocation",
]


@dataclass(frozen=True)
class ReplicationSpec:
    b: int
    c: int
    d: float
    scheme: SchemeParams

    def __post_init__(self):
        if isinstance(self.b, bool) or not isinstance(self.b, int) or not 1 <= self.b <= self.scheme.P:
            raise ParameterError(f"need integer 1 <= b <= P, got b={self.b}, P={self.scheme.P}")
        if isinstance(self.c, bool) or not isinstance(self.c, int) or self.c < 1:
            raise ParameterError(f"need integer c >= 1, got {self.c}")
        if not self.d >= 1:
            raise ParameterError(f"need d >= 1, got {self.d}")


@dataclass(frozen=True)
class BudgetModel:
    """Cost ``b**p_b * c**p_c`` must stay within ``budget``."""

    budget: float
    p_b: float
    p_c: float

    def __post_init__(self):
        if not self.budget >= 1:
            raise ParameterError(f"need budget >= 1, got {self.budget}")
        if not (self.p_b > 0 and self.p_c > 0):
            raise ParameterError(f"cost exponents must be positive, got {self.p_b}, {self.p_c}")


def miss_probability(spec: ReplicationSpec) -> ExactProbability:
    """Probability alpha that one benign ring shares fewer than q keys with the replica."""
    K, P, q = spec.scheme.K, spec.scheme.P, spec.scheme.q
    b = spec.b
    misses = sum(math.comb(b, i) * math.comb(P - b, K - i) for i in range(q))
    return ExactProbability(misses, math.comb(P, K))


def _log_alpha(alpha: Fraction) -> float:
    if alpha == 0:
        return -math.inf
    hit = 1 - alpha
    if hit < Fraction(1, 2):
        return math.log1p(-float(hit))
    # math.log accepts arbitrarily large ints, so no float underflow here
    return math.log(alpha.numerator) - math.log(alpha.denominator)


def replication_success(spec: ReplicationSpec) -> float:
    """1 - alpha**(c d), evaluated as -expm1(c d ln alpha)."""
    log_alpha = _log_alpha(miss_probability(spec))
    if log_alpha == -math.inf:
        return 1.0
    return -math.expm1(spec.c * spec.d * log_alpha)


def replication_success_asymptotic(spec: ReplicationSpec) -> float:
    """(c d / q!) (b K / P)^q, for replicas far smaller than the pool."""
    K, P, q = spec.scheme.K, spec.scheme.P, spec.scheme.q
    if spec.b * K >= P:
        warnings.warn(
            RegimeWarning(
                f"replication approximation: bK={spec.b * K} is not small against P={P}",
                "bK",
                spec.b * K,
                P,
            ),
            stacklevel=2,
        )
    return math.exp(
        math.log(spec.c * spec.d) - log_factorial(q) + q * (math.log(spec.b * K) - math.log(P))
    )


def min_replicas(target: float, b: int, d: float, params: SchemeParams) -> int:
    """Smallest replica count c with 1 - alpha**(c d) >= target.

    The logarithmic closed form only brackets the answer; the returned value is
    checked against direct evaluation on both sides.
    """
    if not 0 < target < 1:
        raise ParameterError(f"target must lie in (0, 1), got {target}")
    probe = ReplicationSpec(b=b, c=1, d=d, scheme=params)
    log_alpha = _log_alpha(miss_probability(probe))
    if log_alpha == 0.0:
        raise DomainError("alpha = 1: no replica can ever link with a benign node")
    if log_alpha == -math.inf:
        return 1

    def success(c: int) -> float:
        return -math.expm1(c * d * log_alpha)

    c = max(1, math.ceil(math.log1p(-target) / (d * log_alpha)))
    while success(c) < target:
        c += 1
    while c > 1 and success(c - 1) >= target:
        c -= 1
    return c


class Allocation(NamedTuple):
    b: int
    c: int
    tie: bool
    regime: str


def _iroot(x: float, p: float) -> int:
    """Largest integer k >= 1 with k**p <= x."""
    k = max(1, int(math.floor(x ** (1.0 / p))))
    while (k + 1) ** p <= x:
        k += 1
    while k > 1 and k**p > x:
        k -= 1
    return k


# exhaustive integer search is used up to this many candidate values of b
_SEARCH_LIMIT = 1_000_000


def optimal_allocation(model: BudgetModel, q: int) -> Allocation:
    """Replica size and count maximizing b**q * c within the budget.

    Comparing p_b/p_c with q picks the regime: a single large replica, many
    one-key replicas, or (on equality) a whole indifference curve, flagged by
    ``tie``. Because b and c are integers the continuous corner is not always
    optimal, so when the range of b is small enough every feasible b is tried
    with its largest affordable c, ties going to the larger b.
    """
    if q < 1:
        raise ParameterError(f"need q >= 1, got {q}")
    ratio = model.p_b / model.p_c
    if math.isclose(ratio, q, rel_tol=1e-12):
        regime, tie = "indifferent", True
    elif ratio < q:
        regime, tie = "few-large", False
    else:
        regime, tie = "many-small", False

    b_max = _iroot(model.budget, model.p_b)
    if b_max > _SEARCH_LIMIT:
        if regime == "many-small":
            return Allocation(1, _iroot(model.budget, model.p_c), tie, regime)
        return Allocation(b_max, 1, tie, regime)

    best = None
    for b in range(1, b_max + 1):
        c = _iroot(model.budget / b**model.p_b, model.p_c)
        value = q * math.log(b) + math.log(c)
        if best is None or value >= best[0] - 1e-12:
            best = (value, b, c)
    _, b, c = best
    return Allocation(b, c, tie, regime)
