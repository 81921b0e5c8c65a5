"""Large-network approximations and the parameter rules derived from them.

All products of factorials and powers are evaluated as sums of logarithms and
exponentiated once at the end, so values far below the float range of the
intermediate factors still come out right.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Union

from .errors import ParameterError

__all__ = [
    "Q_MAX",
    "RegimeWarning",
    "OptimalQ",
    "BudgetAdversary",
    "DesignGuidelineInput",
    "log_factorial",
    "link_probability_asymptotic",
    "compromise_asymptotic",
    "compromise_ratio_asymptotic",
    "optimal_q_given_captures",
    "optimal_q_given_target",
    "q_sharp_boundary",
    "required_captures",
    "critical_parameter",
    "edge_probability_asymptotic",
]

Q_MAX = 64


class RegimeWarning(UserWarning):
    """An approximation is evaluated outside the regime where it is accurate."""

    def __init__(self, message: str, quantity: str, value: float, limit: float):
        super().__init__(message)
        self.quantity = quantity
        self.value = value
        self.limit = limit


def _warn(quantity: str, value: float, limit: float, what: str) -> None:
    warnings.warn(
        RegimeWarning(
            f"{what}: {quantity}={value:.6g} is not small against {limit:.6g}",
            quantity,
            value,
            limit,
        ),
        stacklevel=3,
    )


@lru_cache(maxsize=None)
def log_factorial(k: int) -> float:
    """ln(k!) by direct summation."""
    if k < 0:
        raise ParameterError(f"factorial of negative number {k}")
    return math.fsum(math.log(i) for i in range(2, k + 1))


def link_probability_asymptotic(K: float, P: float, q: int) -> float:
    """p_s ~ (K^2/P)^q / q!, accurate when K^2/P is small and K is large."""
    if K * K >= P:
        _warn("K^2", K * K, P, "link probability approximation")
    return math.exp(q * (2 * math.log(K) - math.log(P)) - log_factorial(q))


def compromise_asymptotic(m: float, K: float, P: float, q: int) -> float:
    """p_compromised ~ (mK/P)^q."""
    if m < 1:
        raise ParameterError(f"need m >= 1, got {m}")
    if m >= math.sqrt(P) / K:
        _warn("m", m, math.sqrt(P) / K, "compromise approximation")
    return math.exp(q * (math.log(m) + math.log(K) - math.log(P)))


def compromise_ratio_asymptotic(m: float, K: float, q: int) -> float:
    """p_compromised / p_s ~ q! (m/K)^q."""
    if m < 1:
        raise ParameterError(f"need m >= 1, got {m}")
    return math.exp(log_factorial(q) + q * (math.log(m) - math.log(K)))


class OptimalQ(NamedTuple):
    q: int
    tie: bool = False


def optimal_q_given_captures(K: int, m: int) -> OptimalQ:
    """The q minimizing q!(m/K)^q against an adversary holding ``m`` nodes.

    When K/m is an integer above 1, q - 1 is equally good and ``tie`` is set.
    """
    if K < 1 or m < 1:
        raise ParameterError(f"need K, m >= 1, got K={K}, m={m}")
    q, rem = divmod(K, m)
    if q <= 1:
        return OptimalQ(1)
    return OptimalQ(q, tie=(rem == 0))


@dataclass(frozen=True)
class BudgetAdversary:
    """Adversary aiming at a given fraction of compromised links."""

    target_fraction: float
    link_probability: float
    K: float = 1.0

    def __post_init__(self):
        if not 0 < self.target_fraction <= 1:
            raise ParameterError(f"target fraction must lie in (0, 1], got {self.target_fraction}")
        if not 0 < self.link_probability <= 1:
            raise ParameterError(f"p_s must lie in (0, 1], got {self.link_probability}")

    @property
    def ratio(self) -> float:
        return self.target_fraction / self.link_probability


def _ratio(adv: Union[BudgetAdversary, float]) -> float:
    x = adv.ratio if isinstance(adv, BudgetAdversary) else float(adv)
    if not x > 0:
        raise ParameterError(f"compromise ratio must be positive, got {x}")
    return x


def optimal_q_given_target(adv: Union[BudgetAdversary, float], q_max: int = Q_MAX) -> int:
    """The q maximizing the captures needed to reach a compromise ratio.

    Maximizes ``(ln x - ln q!)/q`` over ``1 <= q <= q_max`` where ``x`` is the
    ratio p_compromised/p_s; ``adv`` may be a :class:`BudgetAdversary` or ``x``.
    Near-equal scores (relative 1e-12) resolve to the smaller q.
    """
    if q_max < 1:
        raise ParameterError(f"q_max must be >= 1, got {q_max}")
    lx = math.log(_ratio(adv))
    best_q, best = 1, lx
    for q in range(2, q_max + 1):
        score = (lx - log_factorial(q)) / q
        if score > best + 1e-12 * abs(best):
            best_q, best = q, score
    return best_q


def q_sharp_boundary(q: int) -> float:
    """Ratio at which the optimal q switches between ``q`` and ``q + 1``: q!/(q+1)^q."""
    if q < 1:
        raise ParameterError(f"need q >= 1, got {q}")
    return math.exp(log_factorial(q) - q * math.log(q + 1))


def required_captures(adv: BudgetAdversary, q: int) -> float:
    """Captures needed for the adversary's target: K (x/q!)^(1/q)."""
    x = _ratio(adv)
    return adv.K * math.exp((math.log(x) - log_factorial(q)) / q)


@dataclass(frozen=True)
class DesignGuidelineInput:
    """Network description for the connectivity design rule.

    Exactly one of ``K``, ``P``, ``r`` is named by ``solve_for``; the other two
    must be given. ``m`` captured nodes shrink the network to ``n - m``.
    """

    n: int
    solve_for: str
    K: Optional[float] = None
    P: Optional[float] = None
    r: Optional[float] = None
    q: int = 1
    m: int = 0

    def __post_init__(self):
        if self.solve_for not in ("K", "P", "r"):
            raise ParameterError(f"solve_for must be one of K, P, r; got {self.solve_for!r}")
        for name in ("K", "P", "r"):
            value = getattr(self, name)
            if name != self.solve_for and (value is None or value <= 0):
                raise ParameterError(f"{name} must be a positive number to solve for {self.solve_for}")
        if self.r is not None and self.solve_for != "r" and not 0 < self.r <= 0.5:
            raise ParameterError(f"r must lie in (0, 1/2], got {self.r}")
        if self.q < 1:
            raise ParameterError(f"need q >= 1, got {self.q}")
        if not 0 <= self.m < self.n:
            raise ParameterError(f"need 0 <= m < n, got m={self.m}, n={self.n}")
        if self.n - self.m < 2:
            raise ParameterError(f"effective network size n - m = {self.n - self.m} is below 2")

    @property
    def effective_size(self) -> int:
        return self.n - self.m


def critical_parameter(inp: DesignGuidelineInput) -> float:
    """Solve (K^2/P)^q / q! * pi r^2 = ln(n')/n' for the unknown, n' = n - m."""
    q = inp.q
    n_eff = inp.effective_size
    log_target = math.log(math.log(n_eff)) - math.log(n_eff)
    lqf = log_factorial(q)
    if inp.solve_for == "K":
        log_k = (
            (lqf - math.log(math.pi) + log_target) / (2 * q)
            + 0.5 * math.log(inp.P)
            - math.log(inp.r) / q
        )
        return math.exp(log_k)
    if inp.solve_for == "P":
        log_p = (
            (math.log(math.pi) - lqf - log_target) / q
            + 2 * math.log(inp.K)
            + 2 * math.log(inp.r) / q
        )
        return math.exp(log_p)
    log_r = 0.5 * (lqf + log_target - math.log(math.pi)) + 0.5 * q * (
        math.log(inp.P) - 2 * math.log(inp.K)
    )
    return math.exp(log_r)


def edge_probability_asymptotic(K: float, P: float, r: float, q: int) -> float:
    """Secure-link probability (K^2/P)^q / q! * pi r^2, without regime checks."""
    return math.exp(q * (2 * math.log(K) - math.log(P)) - log_factorial(q) + math.log(math.pi * r * r))
