"""Numbered acceptance criteria, each run at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import functools
import math
import random
import time
from fractions import Fraction
from itertools import product

import pytest

from oracles import compromise_by_enumeration
from qcomposite import experiments as ex
from qcomposite.asymptotics import (
    DesignGuidelineInput,
    critical_parameter,
    edge_probability_asymptotic,
    optimal_q_given_captures,
    optimal_q_given_target,
    q_sharp_boundary,
)
from qcomposite.cli import main
from qcomposite.exact import (
    SchemeParams,
    all_distinct_probability,
    compromise_probability_exact,
    find_pool_size,
    link_probability,
    overlap_distribution,
)
from qcomposite.network import estimate_compromise, estimate_connectivity
from qcomposite.replication import ReplicationSpec, miss_probability, min_replicas

SEED = 20240601


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


@acceptance(1, "exact compromise equals ring enumeration (m<=3, K<=3, P<=6)")
def test_enumeration_equivalence():
    start = time.perf_counter()
    checked = 0
    for m, K in product(range(1, 4), range(1, 4)):
        for P in range(K, 7):
            for q in range(1, K + 1):
                exact = compromise_probability_exact(SchemeParams(K=K, P=P, q=q), m)
                assert Fraction(exact) == compromise_by_enumeration(K, P, q, m), (K, P, q, m)
                checked += 1
    assert checked == 3 * sum(K * (7 - K) for K in range(1, 4))
    assert time.perf_counter() - start < 60


@acceptance(2, "simulated compromise within 3 SE of exact at 1e5 trials")
@pytest.mark.slow
@pytest.mark.parametrize("n, K, P, q, m", [(20, 10, 100, 2, 5), (3, 2, 4, 1, 1)])
def test_simulation_matches_exact(n, K, P, q, m):
    params = SchemeParams(K=K, P=P, q=q, n=n)
    exact = compromise_probability_exact(params, m)
    if (K, P) == (2, 4):
        assert exact == Fraction(13, 30)
    start = time.perf_counter()
    est = estimate_compromise(params, m, trials=100_000, seed=SEED)
    assert time.perf_counter() - start < 120
    assert est.standard_error > 0
    assert est.within(float(exact), sigmas=3)


@functools.lru_cache(maxsize=None)
def _exact_argmin(ps, m, K=40):
    curve = {}
    for q in range(1, 11):
        P = find_pool_size(K, q, ps)
        curve[q] = compromise_probability_exact(SchemeParams(K=K, P=P, q=q), m)
    return min(curve, key=curve.get)


@acceptance(3, "exact compromise curve minimized at q = 4, 2, 1 for m = 10, 20, 40")
@pytest.mark.parametrize("ps", [0.05, 0.1])
def test_optimal_q_reproduction(ps):
    argmins = [_exact_argmin(ps, m) for m in (10, 20, 40)]
    assert argmins == [4, 2, 1]


@acceptance(3, "exact compromise curve minimized at q = 4, 2, 1 for m = 10, 20, 40")
@pytest.mark.parametrize("ps", [0.05, 0.1])
def test_optimal_q_within_asymptotic_optimal_set(ps):
    # companion check: when K/m is an integer q* and q*-1 tie asymptotically
    for m in (10, 20, 40):
        best = optimal_q_given_captures(40, m)
        allowed = {best.q, best.q - 1} if best.tie else {best.q}
        assert _exact_argmin(ps, m) in allowed


@acceptance(4, "q# at interval midpoints and analytic boundaries within 20%")
def test_reference_intervals():
    start = time.perf_counter()
    for q, lo, hi in ex.REFERENCE_Q_SHARP_INTERVALS:
        mid = 2 * lo if math.isinf(hi) else (lo + hi) / 2
        assert optimal_q_given_target(mid) == q
        assert abs(q_sharp_boundary(q) - lo) / lo <= 0.2
        if not math.isinf(hi):
            assert abs(q_sharp_boundary(q - 1) - hi) / hi <= 0.2
    assert time.perf_counter() - start < 1


def _radius_for(a, n, params):
    ps = float(link_probability(params))
    return math.sqrt(a * math.log(n) / n / (math.pi * ps))


@acceptance(5, "connectivity zero-one behaviour at n=2000, 200 trials")
@pytest.mark.slow
def test_zero_one_behaviour():
    n = 2000
    params = SchemeParams(K=20, P=2000, q=1, n=n)
    start = time.perf_counter()
    low = estimate_connectivity(params, _radius_for(0.3, n, params), trials=200, seed=SEED)
    high = estimate_connectivity(params, _radius_for(3.0, n, params), trials=200, seed=SEED)
    assert time.perf_counter() - start < 600
    assert low.point_estimate <= 0.2
    assert high.point_estimate >= 0.8


def _design_grid():
    rng = random.Random(SEED)
    grid = []
    for i in range(100):
        n = rng.choice([100, 500, 1000, 5000, 20000, 100000])
        m = 0 if i % 2 == 0 else rng.randrange(1, n // 2)
        q = rng.randint(1, 5)
        values = {"K": rng.uniform(10, 200), "P": rng.uniform(1e3, 1e6), "r": rng.uniform(0.01, 0.5)}
        unknown = "KPr"[i % 3]
        values[unknown] = None
        grid.append(DesignGuidelineInput(n=n, m=m, q=q, solve_for=unknown, **values))
    return grid


@acceptance(6, "solved critical values reproduce ln(n')/n' within 1e-9")
def test_critical_parameter_consistency():
    grid = _design_grid()
    assert len(grid) == 100 and any(inp.m > 0 for inp in grid)
    start = time.perf_counter()
    for inp in grid:
        values = {"K": inp.K, "P": inp.P, "r": inp.r}
        values[inp.solve_for] = critical_parameter(inp)
        n_eff = inp.n - inp.m
        target = math.log(n_eff) / n_eff
        got = edge_probability_asymptotic(values["K"], values["P"], values["r"], inp.q)
        assert abs(got - target) / target <= 1e-9, inp
    assert time.perf_counter() - start < 1


@acceptance(7, "two nodes with a full ring connect with probability pi/4")
def test_two_node_closed_form():
    start = time.perf_counter()
    est = estimate_connectivity(SchemeParams(K=10, P=10, q=1, n=2), 0.5, trials=10_000, seed=SEED)
    assert time.perf_counter() - start < 10
    assert est.within(math.pi / 4, sigmas=3)


@acceptance(8, "replica ratio c(b)/c(2b) within 10% of 2^q; alpha(b=K) = 1 - p_s")
@pytest.mark.parametrize("q", [1, 2, 3])
def test_replication_ratio_law(q):
    K, b, P = 10, 100, 200_000
    assert P >= 100 * (2 * b) * K
    params = SchemeParams(K=K, P=P, q=q)
    for target in (0.5, 0.9):
        ratio = min_replicas(target, b, 1, params) / min_replicas(target, 2 * b, 1, params)
        assert abs(ratio - 2**q) / 2**q <= 0.1, (q, target, ratio)
    for small in (SchemeParams(K=4, P=30, q=q), SchemeParams(K=K, P=P, q=q)):
        alpha = miss_probability(ReplicationSpec(b=small.K, c=1, d=1, scheme=small))
        assert alpha == 1 - link_probability(small)


def _random_tuples(count):
    rng = random.Random(SEED)
    tuples = []
    while len(tuples) < count:
        K = rng.randint(1, 12)
        P = rng.randint(K + 1, 300)
        q = rng.randint(1, K)
        # stay inside the exact path's capture limit
        m = rng.randint(1, min(P // K, 64))
        tuples.append((K, P, q, m))
    return tuples


@acceptance(9, "exact compromise lies between the analytic bounds (500 tuples)")
def test_bound_sandwich():
    start = time.perf_counter()
    for K, P, q, m in _random_tuples(500):
        params = SchemeParams(K=K, P=P, q=q)
        exact = compromise_probability_exact(params, m)
        lower = (
            all_distinct_probability(params, m)
            * Fraction(math.comb(m * K, q), math.comb(P, q))
            * overlap_distribution(params)[q]
            / link_probability(params)
        )
        upper = Fraction(m * K, P - K) ** q
        assert lower <= exact <= upper, (K, P, q, m)
    assert time.perf_counter() - start < 300


_SIMULATED_COMMANDS = [
    ["connectivity", "simulate", "--n", "60", "--K", "4", "--P", "40", "--r", "0.25",
     "--sweep", "m", "--values", "0,5", "--trials", "10"],
    ["simulate", "compromise", "--n", "12", "--K", "3", "--P", "30", "--q", "2", "--m", "1,3", "--trials", "30"],
    ["simulate", "replication", "--K", "4", "--P", "50", "--q", "1,2", "--b", "4", "--c", "2",
     "--d", "3", "--trials", "30"],
]


def _preset_argv(name):
    argv = ["experiment", name]
    if ex.PRESETS[name].simulated:
        argv += ["--trials", "2"]
    if name.startswith("fig-"):
        argv += ["--factors", "0.9,1.1"]
    return argv


@acceptance(10, "simulate and experiment subcommands are byte-identical across runs")
@pytest.mark.parametrize(
    "argv",
    _SIMULATED_COMMANDS + [_preset_argv(name) for name in sorted(ex.PRESETS)],
    ids=lambda argv: "-".join(argv[:2]),
)
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_determinism(tmp_path, argv, fmt):
    outputs = []
    for run_dir in ("first", "second"):
        assert main([*argv, "--format", fmt, "--out", str(tmp_path / run_dir)]) == 0
        (path,) = list((tmp_path / run_dir).iterdir())
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) > 0
