import math
import warnings

import pytest
from hypothesis import given, strategies as st

from qcomposite.asymptotics import (
    BudgetAdversary,
    DesignGuidelineInput,
    RegimeWarning,
    compromise_asymptotic,
    compromise_ratio_asymptotic,
    critical_parameter,
    edge_probability_asymptotic,
    link_probability_asymptotic,
    log_factorial,
    optimal_q_given_captures,
    optimal_q_given_target,
    q_sharp_boundary,
    required_captures,
)
from qcomposite.errors import ParameterError
from qcomposite.exact import SchemeParams, compromise_probability_exact, find_pool_size, link_probability


def test_log_factorial():
    for k in range(0, 30):
        assert log_factorial(k) == pytest.approx(math.log(math.factorial(k)), rel=1e-14, abs=1e-14)


class TestLinkProbability:
    def test_examples(self):
        assert link_probability_asymptotic(10, 1000, 1) == pytest.approx(0.1, rel=1e-12)
        assert link_probability_asymptotic(10, 1000, 2) == pytest.approx(0.005, rel=1e-12)

    def test_against_exact_at_solved_pool(self):
        P = find_pool_size(40, 2, 0.05)
        exact = float(link_probability(SchemeParams(K=40, P=P, q=2)))
        asym = link_probability_asymptotic(40, P, 2)
        # K^2/P = 0.36 here, far from the small-K^2/P regime
        assert (asym - exact) / exact == pytest.approx(0.30503, rel=1e-3)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_converges_as_ratio_shrinks(self, q):
        gaps = []
        for K in (10, 20, 40, 80):
            P = K**3
            exact = float(link_probability(SchemeParams(K=K, P=P, q=q)))
            gaps.append(abs(link_probability_asymptotic(K, P, q) - exact) / exact)
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] < 0.1

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning) as record:
            link_probability_asymptotic(10, 50, 1)
        assert record[0].message.quantity == "K^2"


class TestCompromise:
    @pytest.mark.filterwarnings("ignore::qcomposite.asymptotics.RegimeWarning")
    def test_examples(self):
        assert compromise_asymptotic(1, 10, 1000, 1) == pytest.approx(0.01, rel=1e-12)
        assert compromise_asymptotic(5, 10, 1000, 2) == pytest.approx(0.0025, rel=1e-12)

    @pytest.mark.filterwarnings("ignore::qcomposite.asymptotics.RegimeWarning")
    def test_against_exact(self):
        exact = float(compromise_probability_exact(SchemeParams(K=10, P=1000, q=2), 5))
        assert abs(compromise_asymptotic(5, 10, 1000, 2) - exact) / exact < 0.15

    def test_ratio_examples(self):
        assert compromise_ratio_asymptotic(10, 100, 1) == pytest.approx(0.1, rel=1e-12)
        assert compromise_ratio_asymptotic(10, 100, 3) == pytest.approx(0.006, rel=1e-12)
        assert compromise_ratio_asymptotic(20, 40, 2) == pytest.approx(0.5, rel=1e-12)

    @staticmethod
    def _gaps(q, m, c=0.1):
        out = []
        for K in (8, 16, 32, 64):
            P = round(K * K / c)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                asym = compromise_asymptotic(m, K, P, q)
            exact = float(compromise_probability_exact(SchemeParams(K=K, P=P, q=q), m))
            out.append(abs(asym - exact) / exact)
        return out

    @pytest.mark.parametrize("q, m", [(2, 2), (2, 3), (3, 2)])
    def test_gap_shrinks_on_doubling_ladder(self, q, m):
        gaps = self._gaps(q, m)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_q1_gap_approaches_poisson_limit(self):
        c = 0.1
        # exact/asymptotic -> rho_1/p_s for Poisson(c) overlaps
        limit = (1 - math.exp(-c)) / (c * math.exp(-c)) - 1
        dist = [abs(g - limit) for g in self._gaps(1, 2, c)]
        assert all(a > b for a, b in zip(dist, dist[1:]))

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning):
            compromise_asymptotic(20, 10, 1000, 1)


class TestOptimalQCaptures:
    @pytest.mark.parametrize(
        "K, m, q, tie",
        [(40, 10, 4, True), (20, 30, 1, False), (80, 30, 2, False), (40, 20, 2, True), (40, 40, 1, False)],
    )
    def test_examples(self, K, m, q, tie):
        assert optimal_q_given_captures(K, m) == (q, tie)

    @given(st.integers(1, 300), st.integers(1, 100))
    def test_is_minimizer(self, K, m):
        log_f = {q: math.lgamma(q + 1) + q * math.log(m / K) for q in range(1, K + 3)}
        best = min(log_f.values())
        res = optimal_q_given_captures(K, m)
        assert log_f[res.q] == pytest.approx(best, abs=1e-9)
        if res.tie:
            assert log_f[res.q - 1] == pytest.approx(best, abs=1e-9)

    @given(st.integers(1, 200), st.integers(1, 60), st.integers(1, 20))
    def test_scale_invariant(self, K, m, c):
        assert optimal_q_given_captures(c * K, c * m) == optimal_q_given_captures(K, m)


class TestOptimalQTarget:
    @pytest.mark.parametrize("x, q", [(0.3, 2), (0.6, 1), (0.01, 6)])
    def test_examples(self, x, q):
        assert optimal_q_given_target(x) == q

    def test_accepts_adversary(self):
        adv = BudgetAdversary(target_fraction=0.015, link_probability=0.05, K=40)
        assert optimal_q_given_target(adv) == 2

    @pytest.mark.parametrize("q", range(1, 17))
    def test_crossover(self, q):
        b = q_sharp_boundary(q)
        assert optimal_q_given_target(b * (1 + 1e-6)) == q
        assert optimal_q_given_target(b * (1 - 1e-6)) == q + 1
        assert optimal_q_given_target(b) == q

    def test_bad_ratio(self):
        with pytest.raises(ParameterError):
            optimal_q_given_target(0.0)


class TestBoundary:
    def test_examples(self):
        assert q_sharp_boundary(1) == pytest.approx(0.5, rel=1e-12)
        assert q_sharp_boundary(2) == pytest.approx(2 / 9, rel=1e-12)
        assert q_sharp_boundary(3) == pytest.approx(6 / 64, rel=1e-12)

    @pytest.mark.parametrize("q", range(1, 12))
    def test_solves_crossover(self, q):
        x = q_sharp_boundary(q)
        lhs = (x / math.factorial(q)) ** (1 / q)
        rhs = (x / math.factorial(q + 1)) ** (1 / (q + 1))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_required_captures():
    assert required_captures(BudgetAdversary(0.5, 1.0, K=100), 1) == pytest.approx(50, rel=1e-12)
    assert required_captures(BudgetAdversary(0.5, 1.0, K=100), 2) == pytest.approx(50, rel=1e-12)
    assert required_captures(BudgetAdversary(0.1, 1.0, K=40), 2) == pytest.approx(40 * 0.05**0.5, abs=1e-6)
    assert required_captures(BudgetAdversary(0.1, 1.0, K=40), 2) == pytest.approx(8.944272, abs=1e-6)


class TestCriticalParameter:
    def test_transmission_range(self):
        r = critical_parameter(DesignGuidelineInput(n=1000, solve_for="r", K=40, P=20000, q=1))
        direct = math.sqrt(math.log(1000) / (math.pi * 1000)) * (20000 / 40**2) ** 0.5
        assert r == pytest.approx(direct, abs=1e-6)
        assert r == pytest.approx(0.16579, abs=1e-5)

    @pytest.mark.parametrize("unknown", ["K", "P", "r"])
    def test_round_trip(self, unknown):
        given = dict(K=35.0, P=15000.0, r=0.12)
        given.pop(unknown)
        inp = DesignGuidelineInput(n=2000, m=150, q=2, solve_for=unknown, **given)
        given[unknown] = critical_parameter(inp)
        pe = edge_probability_asymptotic(given["K"], given["P"], given["r"], 2)
        assert pe == pytest.approx(math.log(1850) / 1850, rel=1e-9)

    @pytest.mark.parametrize("unknown", ["K", "P", "r"])
    def test_depends_on_effective_size_only(self, unknown):
        given = dict(K=30.0, P=9000.0, r=0.2)
        given.pop(unknown)
        a = critical_parameter(DesignGuidelineInput(n=900, m=0, q=3, solve_for=unknown, **given))
        b = critical_parameter(DesignGuidelineInput(n=1000, m=100, q=3, solve_for=unknown, **given))
        assert a == b

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=1, solve_for="r", K=10, P=100),
            dict(n=10, m=9, solve_for="r", K=10, P=100),
            dict(n=100, solve_for="x", K=10, P=100),
            dict(n=100, solve_for="K", P=100),
            dict(n=100, solve_for="K", P=100, r=0.7),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            DesignGuidelineInput(**kwargs)
