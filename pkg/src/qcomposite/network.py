"""Monte Carlo realization of secure sensor networks on the unit torus.

A node holds a uniform K-subset of the key pool and a uniform position. Two
nodes form a secure link when their rings share at least q keys and their
torus distance is at most r. Every trial draws its randomness from a stream
derived only from ``(seed, trial_index)``, so estimates do not depend on the
order or the process in which trials run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .errors import DomainError, ParameterError
from .exact import SchemeParams

__all__ = [
    "RNG_ALGORITHM",
    "trial_rng",
    "NetworkInstance",
    "SecureGraph",
    "EstimateWithCI",
    "UnionFind",
    "sample_key_rings",
    "sample_positions",
    "torus_distance",
    "candidate_pairs",
    "shared_key_counts",
    "build_secure_graph",
    "build_network",
    "is_connected",
    "count_compromised_pairs",
    "estimate_connectivity",
    "estimate_compromise",
    "estimate_replication",
]

RNG_ALGORITHM = "numpy-PCG64/SeedSequence([seed, trial])"

_SEED_LIMIT = 2**64
# dense overlap products are used below this many incidence-matrix cells
_DENSE_CELLS = 250_000
# rows of (pair x K) lookups handled per chunk
_CHUNK_CELLS = 2_000_000


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < _SEED_LIMIT:
        raise ParameterError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([_check_seed(seed), trial])))


# ---------------------------------------------------------------------------
# sampling


def sample_key_rings(params: SchemeParams, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
    """``n`` uniform K-subsets of ``range(P)`` as an (n, K) array with sorted rows."""
    n = params.n if n is None else n
    if n is None or n < 0:
        raise ParameterError("number of nodes must be given as a non-negative integer")
    K, P = params.K, params.P
    if K == P:
        return np.tile(np.arange(P, dtype=np.int64), (n, 1))
    if K * K <= 2 * P:
        # rejection: a row of K independent draws is distinct with prob ~ exp(-K^2/2P)
        rings = rng.integers(0, P, size=(n, K), dtype=np.int64)
        rings.sort(axis=1)
        bad = np.flatnonzero((np.diff(rings, axis=1) == 0).any(axis=1))
        while bad.size:
            redraw = rng.integers(0, P, size=(bad.size, K), dtype=np.int64)
            redraw.sort(axis=1)
            rings[bad] = redraw
            bad = bad[(np.diff(redraw, axis=1) == 0).any(axis=1)]
        return rings
    rings = np.empty((n, K), dtype=np.int64)
    for row in range(n):
        rings[row] = np.sort(rng.choice(P, size=K, replace=False))
    return rings


def sample_positions(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform points of the unit torus as an (n, 2) array."""
    return rng.random((n, 2))


def _torus_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    delta = np.abs(a - b)
    delta = np.minimum(delta, 1.0 - delta)
    return (delta * delta).sum(axis=-1)


def torus_distance(p1: Sequence[float], p2: Sequence[float]) -> float:
    return float(math.sqrt(_torus_sq(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))))


# ---------------------------------------------------------------------------
# graph construction


def _all_pairs(n: int) -> Tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(n, 1)
    return i.astype(np.int64), j.astype(np.int64)


def candidate_pairs(positions: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs ``i < j`` that may lie within distance ``r``, from a wrap-around cell grid.

    Cells have side ``1/floor(1/r) >= r``, so every close pair sits in the same
    or adjacent cells. With fewer than three cells per side the neighbourhoods
    overlap and all pairs are returned instead.
    """
    n = len(positions)
    if r <= 0:
        raise ParameterError(f"need r > 0, got {r}")
    g = int(math.floor(1.0 / r))
    if g < 3:
        return _all_pairs(n)
    cell = np.minimum((positions * g).astype(np.int64), g - 1)
    cell_id = cell[:, 0] * g + cell[:, 1]
    order = np.argsort(cell_id, kind="stable")
    sorted_ids = cell_id[order]
    bins = np.arange(g * g)
    starts = np.searchsorted(sorted_ids, bins, "left")
    ends = np.searchsorted(sorted_ids, bins, "right")
    nodes = np.arange(n, dtype=np.int64)
    left, right = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            nb = ((cell[:, 0] + dx) % g) * g + (cell[:, 1] + dy) % g
            s, cnt = starts[nb], ends[nb] - starts[nb]
            i = np.repeat(nodes, cnt)
            within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            j = order[np.repeat(s, cnt) + within]
            keep = i < j
            left.append(i[keep])
            right.append(j[keep])
    i, j = np.concatenate(left), np.concatenate(right)
    idx = np.lexsort((j, i))
    return i[idx], j[idx]


def shared_key_counts(rings: np.ndarray, P: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Number of keys shared by rings ``i[t]`` and ``j[t]`` for every t."""
    n, K = rings.shape
    if len(i) == 0 or K == 0:
        return np.zeros(len(i), dtype=np.int64)
    # rows are sorted, so adding row*P keeps the flattened array sorted
    flat = (rings + (np.arange(n, dtype=np.int64) * P)[:, None]).ravel()
    out = np.empty(len(i), dtype=np.int64)
    step = max(1, _CHUNK_CELLS // K)
    for lo in range(0, len(i), step):
        hi = min(lo + step, len(i))
        probe = rings[j[lo:hi]] + (i[lo:hi] * P)[:, None]
        pos = np.minimum(np.searchsorted(flat, probe), flat.size - 1)
        out[lo:hi] = (flat[pos] == probe).sum(axis=1)
    return out


def _incidence(rings: np.ndarray, P: int, keep: Optional[np.ndarray] = None, force_sparse: bool = False):
    """Node-by-key incidence matrix, optionally dropping keys where ``keep`` is False."""
    n, K = rings.shape
    rows = np.repeat(np.arange(n), K)
    cols = rings.ravel()
    if keep is not None:
        mask = keep[cols]
        rows, cols = rows[mask], cols[mask]
    if not force_sparse and n * P <= _DENSE_CELLS:
        dense = np.zeros((n, P))
        dense[rows, cols] = 1.0
        return dense
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, P))


def _key_graph_edges(rings: np.ndarray, P: int, q: int) -> np.ndarray:
    n = len(rings)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    m = _incidence(rings, P, force_sparse=True)
    overlap = sparse.triu(m @ m.T, k=1).tocoo()
    hit = overlap.data >= q
    edges = np.stack([overlap.row[hit], overlap.col[hit]], axis=1).astype(np.int64)
    return _sorted_edges(edges)


def _sorted_edges(edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.empty((0, 2), dtype=np.int64)
    return edges[np.lexsort((edges[:, 1], edges[:, 0]))]


class SecureGraph(NamedTuple):
    secure_edges: np.ndarray
    geo_edges: np.ndarray
    key_edges: Optional[np.ndarray]


def build_secure_graph(
    rings: np.ndarray,
    positions: np.ndarray,
    r: float,
    q: int,
    P: int,
    key_graph: bool = False,
    method: str = "auto",
) -> SecureGraph:
    """Secure links among the given nodes, as (E, 2) arrays of pairs ``i < j``.

    Geometric edges come from :func:`candidate_pairs` filtered by distance.
    Their key condition is checked either per pair on the sorted rings
    (``method="lookup"``) or by intersecting with the key graph obtained from
    a sparse incidence product (``method="product"``); ``"auto"`` picks the
    cheaper one. The pure key graph is returned only when ``key_graph`` is set.
    """
    if method not in ("auto", "lookup", "product"):
        raise ParameterError(f"unknown method {method!r}")
    n, K = rings.shape
    i, j = candidate_pairs(positions, r)
    close = _torus_sq(positions[i], positions[j]) <= r * r
    i, j = i[close], j[close]
    geo = np.stack([i, j], axis=1)
    if method == "auto":
        lookup_cost = len(i) * K * max(1.0, math.log2(max(n * K, 2)))
        product_cost = 8.0 * n * K * (1.0 + n * K / P)
        method = "product" if key_graph or product_cost < lookup_cost else "lookup"
    keys = None
    if method == "lookup":
        secure = geo[shared_key_counts(rings, P, i, j) >= q]
    else:
        keys = _key_graph_edges(rings, P, q)
        key_codes = keys[:, 0] * n + keys[:, 1]
        secure = geo[np.isin(i * n + j, key_codes, assume_unique=True)]
    return SecureGraph(secure, geo, keys if key_graph else None)


@dataclass
class NetworkInstance:
    """One sampled network. Edge arrays hold pairs ``i < j`` in lexicographic order."""

    key_rings: np.ndarray
    positions: np.ndarray
    r: float
    q: int
    P: int
    secure_edges: np.ndarray
    geo_graph_edges: np.ndarray
    key_graph_edges: Optional[np.ndarray] = None
    captured: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    hardened: bool = False

    @property
    def n(self) -> int:
        return len(self.key_rings)

    @staticmethod
    def edge_set(edges: Optional[np.ndarray]) -> set:
        return set() if edges is None else set(map(tuple, edges.tolist()))


def build_network(
    params: SchemeParams,
    r: float,
    rng: np.random.Generator,
    captured_m: int = 0,
    hardened: bool = False,
    key_graph: bool = False,
) -> NetworkInstance:
    """Draw rings, then positions, then the captured set, and build every edge set."""
    if params.n is None:
        raise ParameterError("params.n is required to build a network")
    rings = sample_key_rings(params, rng)
    positions = sample_positions(params.n, rng)
    captured = np.sort(rng.choice(params.n, size=captured_m, replace=False)) if captured_m else np.empty(0, np.int64)
    graph = build_secure_graph(rings, positions, r, params.q, params.P, key_graph=key_graph)
    return NetworkInstance(
        key_rings=rings,
        positions=positions,
        r=r,
        q=params.q,
        P=params.P,
        secure_edges=graph.secure_edges,
        geo_graph_edges=graph.geo_edges,
        key_graph_edges=graph.key_edges,
        captured=captured.astype(np.int64),
        hardened=hardened,
    )


# ---------------------------------------------------------------------------
# connectivity


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            ra, rb = rb, ra
        self.parent[ra] = rb
        self.components -= 1
        return True


def is_connected(edges, n: int) -> bool:
    """Whether the graph on nodes ``0..n-1`` is connected; one node counts as connected."""
    if n < 1:
        raise DomainError("connectivity is undefined for an empty graph")
    if n == 1:
        return True
    if isinstance(edges, np.ndarray):
        edges = edges.tolist()
    if len(edges) < n - 1:
        return False
    uf = UnionFind(n)
    for a, b in edges:
        if uf.union(a, b) and uf.components == 1:
            return True
    return uf.components == 1


# ---------------------------------------------------------------------------
# compromise counting


def count_compromised_pairs(
    rings: np.ndarray,
    P: int,
    q: int,
    captured: np.ndarray,
    among: Optional[np.ndarray] = None,
    positions: Optional[np.ndarray] = None,
    r: Optional[float] = None,
) -> Tuple[int, int]:
    """Linked pairs and compromised linked pairs among the nodes ``among``.

    ``among`` defaults to the nodes outside ``captured``. A linked pair is
    compromised when every key it shares belongs to some captured ring. If
    ``positions`` and ``r`` are given, only pairs within distance ``r`` count.
    """
    n = len(rings)
    captured = np.asarray(captured, dtype=np.int64)
    if among is None:
        alive = np.ones(n, dtype=bool)
        alive[captured] = False
        among = np.flatnonzero(alive)
    among = np.asarray(among, dtype=np.int64)
    if len(among) < 2:
        return 0, 0
    exposed = np.zeros(P, dtype=bool)
    exposed[rings[captured].ravel()] = True
    sub = rings[among]
    full = _incidence(sub, P)
    hidden = _incidence(sub, P, keep=~exposed)

    if isinstance(full, np.ndarray):
        i, j = _all_pairs(len(sub))
        shared = (full @ full.T)[i, j]
        unexposed = (hidden @ hidden.T)[i, j]
    else:
        overlap = sparse.triu(full @ full.T, k=1).tocoo()
        i, j, shared = overlap.row.astype(np.int64), overlap.col.astype(np.int64), overlap.data
        still_hidden = sparse.triu(hidden @ hidden.T, k=1).tocoo()
        size = len(sub)
        hidden_codes = still_hidden.row.astype(np.int64) * size + still_hidden.col
        unexposed = np.isin(i * size + j, hidden_codes).astype(np.int64)

    linked = shared >= q
    if positions is not None and r is not None:
        pts = positions[among]
        linked &= _torus_sq(pts[i], pts[j]) <= r * r
    compromised = linked & (unexposed == 0)
    return int(linked.sum()), int(compromised.sum())


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo estimate ``numerator / denominator`` with its standard error.

    For Bernoulli estimates the denominator is the trial count. A ratio
    estimate with a zero denominator is flagged ``degenerate`` and reports 0.
    """

    point_estimate: float
    standard_error: float
    trial_count: int
    seed: int
    numerator: int
    denominator: int
    degenerate: bool = False
    rng_algorithm: str = RNG_ALGORITHM

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.point_estimate - value) <= sigmas * self.standard_error

    def as_dict(self) -> dict:
        return {
            "point_estimate": self.point_estimate,
            "standard_error": self.standard_error,
            "trial_count": self.trial_count,
            "seed": self.seed,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "degenerate": self.degenerate,
            "rng_algorithm": self.rng_algorithm,
        }


def _bernoulli(successes: int, trials: int, seed: int) -> EstimateWithCI:
    p = successes / trials
    return EstimateWithCI(p, math.sqrt(p * (1 - p) / trials), trials, seed, successes, trials)


def _ratio(pairs: List[Tuple[int, int]], seed: int) -> EstimateWithCI:
    trials = len(pairs)
    linked = np.array([p[0] for p in pairs], dtype=np.float64)
    hits = np.array([p[1] for p in pairs], dtype=np.float64)
    den, num = int(linked.sum()), int(hits.sum())
    if den == 0:
        return EstimateWithCI(0.0, 0.0, trials, seed, num, den, degenerate=True)
    p = num / den
    if trials < 2:
        return EstimateWithCI(p, math.inf, trials, seed, num, den)
    # delta method for a ratio of per-trial sums
    resid = hits - p * linked
    se = math.sqrt(float(resid @ resid) / (trials * (trials - 1))) / (den / trials)
    return EstimateWithCI(p, se, trials, seed, num, den)


def _map_trials(func: Callable[[int, int], object], trials: int, seed: int, workers: Optional[int]) -> list:
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ParameterError(f"need trials >= 1, got {trials!r}")
    seed = _check_seed(seed)
    if not workers or workers == 1:
        return [func(seed, t) for t in range(trials)]
    chunk = max(1, trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, [seed] * trials, range(trials), chunksize=chunk))


def _connectivity_trial(params: SchemeParams, r: float, captured_m: int, seed: int, trial: int) -> bool:
    rng = trial_rng(seed, trial)
    rings = sample_key_rings(params, rng)
    positions = sample_positions(params.n, rng)
    survivors = np.ones(params.n, dtype=bool)
    if captured_m:
        survivors[rng.choice(params.n, size=captured_m, replace=False)] = False
    rings, positions = rings[survivors], positions[survivors]
    alive = len(rings)
    if alive == 1:
        return True
    graph = build_secure_graph(rings, positions, r, params.q, params.P)
    return is_connected(graph.secure_edges, alive)


def estimate_connectivity(
    params: SchemeParams,
    r: float,
    trials: int,
    seed: int,
    captured_m: int = 0,
    workers: Optional[int] = None,
) -> EstimateWithCI:
    """Fraction of trials whose secure graph on the surviving nodes is connected."""
    if params.n is None or params.n < 1:
        raise ParameterError("params.n must be a positive node count")
    if not 0 < r:
        raise ParameterError(f"need r > 0, got {r}")
    if not 0 <= captured_m < params.n:
        raise ParameterError(f"need 0 <= captured_m < n, got {captured_m}")
    outcomes = _map_trials(partial(_connectivity_trial, params, r, captured_m), trials, seed, workers)
    return _bernoulli(sum(outcomes), trials, seed)


def _compromise_trial(
    params: SchemeParams, m: int, hardened: bool, geometric_r: Optional[float], seed: int, trial: int
) -> Tuple[int, int]:
    rng = trial_rng(seed, trial)
    rings = sample_key_rings(params, rng)
    captured = rng.choice(params.n, size=m, replace=False)
    positions = sample_positions(params.n, rng) if geometric_r is not None else None
    linked, compromised = count_compromised_pairs(rings, params.P, params.q, captured, positions=positions, r=geometric_r)
    return linked, 0 if hardened else compromised


def estimate_compromise(
    params: SchemeParams,
    m: int,
    trials: int,
    seed: int,
    hardened: bool = False,
    geometric_r: Optional[float] = None,
    workers: Optional[int] = None,
) -> EstimateWithCI:
    """Fraction of linked non-captured pairs whose shared keys are all captured.

    Pooled over trials as a ratio estimate. ``hardened`` models link keys
    renewed after discovery, which leaves nothing to compromise.
    ``geometric_r`` restricts the linked pairs to those within range.
    """
    if params.n is None:
        raise ParameterError("params.n is required for compromise simulation")
    if not 1 <= m <= params.n - 2:
        raise ParameterError(f"need 1 <= m <= n - 2, got m={m}, n={params.n}")
    pairs = _map_trials(partial(_compromise_trial, params, m, hardened, geometric_r), trials, seed, workers)
    return _ratio(pairs, seed)


def _replication_trial(
    params: SchemeParams, b: int, c: int, d: float, poisson: bool, seed: int, trial: int
) -> bool:
    rng = trial_rng(seed, trial)
    payload = np.zeros(params.P, dtype=bool)
    payload[rng.choice(params.P, size=b, replace=False)] = True
    neighbours = int(rng.poisson(d, size=c).sum()) if poisson else c * int(d)
    if neighbours == 0:
        return False
    rings = sample_key_rings(params, rng, n=neighbours)
    return bool((payload[rings].sum(axis=1) >= params.q).any())


def estimate_replication(
    K: int,
    P: int,
    q: int,
    b: int,
    c: int,
    d: float,
    trials: int,
    seed: int,
    poisson: bool = False,
    workers: Optional[int] = None,
) -> EstimateWithCI:
    """Success rate of ``c`` replicas sharing one uniform b-key payload.

    Each replica meets ``d`` fresh benign rings, or a Poisson(d) number of
    them when ``poisson`` is set; the attack succeeds when any benign ring
    shares at least ``q`` keys with the payload.
    """
    params = SchemeParams(K=K, P=P, q=q)
    if isinstance(b, bool) or not isinstance(b, int) or not 1 <= b <= P:
        raise ParameterError(f"need integer 1 <= b <= P, got {b}")
    if isinstance(c, bool) or not isinstance(c, int) or c < 1:
        raise ParameterError(f"need integer c >= 1, got {c}")
    if not d >= 1:
        raise ParameterError(f"need d >= 1, got {d}")
    if not poisson and d != int(d):
        raise ParameterError(f"a fixed neighbour count needs integer d, got {d}")
    outcomes = _map_trials(partial(_replication_trial, params, b, c, d, poisson), trials, seed, workers)
    return _bernoulli(sum(outcomes), trials, seed)
