"""Table-producing experiments behind the command line.

Each experiment declares its parameters in a schema, takes the resolved values
as a plain dict and returns a :class:`Table`. Rendering is deterministic: the
same resolved parameters always give the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from .asymptotics import (
    BudgetAdversary,
    DesignGuidelineInput,
    RegimeWarning,
    compromise_asymptotic,
    critical_parameter,
    edge_probability_asymptotic,
    log_factorial,
    optimal_q_given_captures,
    optimal_q_given_target,
    q_sharp_boundary,
)
from .errors import CapacityError, ParameterError
from .exact import (
    SchemeParams,
    compromise_probability_chan,
    compromise_probability_exact,
    find_pool_size,
)
from .network import RNG_ALGORITHM, estimate_compromise, estimate_connectivity, estimate_replication
from .replication import (
    BudgetModel,
    ReplicationSpec,
    min_replicas,
    optimal_allocation,
    replication_success,
    replication_success_asymptotic,
)

DEFAULT_SEED = 42
DEFAULT_TRIALS = 500


@dataclass
class Table:
    columns: List[str]
    rows: List[List[Any]]
    meta: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parameter schemas


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, ints, floats, flag, str
    default: Any = None
    required: bool = False
    help: str = ""


def parse_value(kind: str, text: Any) -> Any:
    """Convert a flag or config-file string to the schema type."""
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "ints":
            out: List[int] = []
            for part in text.split(","):
                if ":" in part:
                    lo, hi = part.split(":")
                    out.extend(range(int(lo), int(hi) + 1))
                elif part:
                    out.append(int(part))
            return out
        if kind == "floats":
            return [float(p) for p in text.split(",") if p]
        if kind == "flag":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "str":
            return text
    except ValueError as exc:
        raise ParameterError(f"cannot read {text!r} as {kind}") from exc
    raise ParameterError(f"unknown parameter kind {kind}")


def resolve(schema: Dict[str, Param], *layers: Dict[str, Any]) -> Dict[str, Any]:
    """Merge defaults with later layers (later wins) and check required names."""
    out: Dict[str, Any] = {}
    for name, spec in schema.items():
        value = spec.default
        for layer in layers:
            if layer.get(name) is not None:
                value = parse_value(spec.kind, layer[name])
        if value is None and spec.required:
            raise ParameterError(f"missing required parameter --{name}")
        if isinstance(value, list) and not value and spec.required:
            raise ParameterError(f"--{name} must not be empty")
        out[name] = value
    return out


_SIM = {
    "trials": Param("int", DEFAULT_TRIALS),
    "seed": Param("int", DEFAULT_SEED),
}


def _params(K: int, P: int, q: int = 1, n: Optional[int] = None) -> SchemeParams:
    return SchemeParams(K=K, P=P, q=q, n=n)


def _quiet(fn: Callable[[], float]) -> Tuple[float, bool]:
    """Evaluate an approximation, reporting whether it stayed in its regime."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        value = fn()
    return value, not any(issubclass(w.category, RegimeWarning) for w in caught)


# ---------------------------------------------------------------------------
# resilience


RESILIENCE = {
    "K": Param("int", 40),
    "ps": Param("float", 0.05),
    "q": Param("ints", list(range(1, 11))),
    "m": Param("ints", [10, 20, 40]),
    "chan": Param("flag", False),
    "asym": Param("flag", False),
}


def run_resilience(cfg: Dict[str, Any]) -> Table:
    K, ps = cfg["K"], cfg["ps"]
    if not cfg["m"] or min(cfg["m"]) < 1:
        raise ParameterError("captured node counts m must be >= 1")
    if not cfg["q"] or min(cfg["q"]) < 1:
        raise ParameterError("q values must be >= 1")
    columns = ["q", "m", "P", "p_exact"]
    if cfg["chan"]:
        columns.append("p_chan")
    if cfg["asym"]:
        columns += ["p_asym", "asym_in_regime"]
    columns.append("is_min")

    rows = []
    for q in cfg["q"]:
        if q > K:
            raise ParameterError(f"q={q} exceeds K={K}")
        P = find_pool_size(K, q, ps)
        params = _params(K, P, q)
        for m in cfg["m"]:
            row: Dict[str, Any] = {"q": q, "m": m, "P": P}
            row["p_exact"] = float(compromise_probability_exact(params, m))
            if cfg["chan"]:
                row["p_chan"] = float(compromise_probability_chan(params, m))
            if cfg["asym"]:
                row["p_asym"], row["asym_in_regime"] = _quiet(lambda: compromise_asymptotic(m, K, P, q))
            rows.append(row)
    for m in cfg["m"]:
        mine = [r for r in rows if r["m"] == m]
        best = min(r["p_exact"] for r in mine)
        for r in mine:
            r["is_min"] = r["p_exact"] == best
    rows.sort(key=lambda r: (r["m"], r["q"]))
    return Table(columns, [[r[c] for c in columns] for r in rows])


# ---------------------------------------------------------------------------
# optimal q


OPTIMAL_Q_CAPTURE = {"K": Param("ints", required=True), "m": Param("ints", required=True)}


def run_optimal_q_capture(cfg: Dict[str, Any]) -> Table:
    rows = []
    for K in cfg["K"]:
        for m in cfg["m"]:
            res = optimal_q_given_captures(K, m)
            rows.append([K, m, res.q, res.tie])
    return Table(["K", "m", "q_star", "tie"], rows)


OPTIMAL_Q_BUDGET = {
    "x": Param("floats"),
    "target": Param("float"),
    "ps": Param("float"),
    "K": Param("float"),
    "q_max": Param("int", 64),
}


def run_optimal_q_budget(cfg: Dict[str, Any]) -> Table:
    if cfg["x"]:
        ratios = cfg["x"]
    elif cfg["target"] is not None and cfg["ps"] is not None:
        ratios = [BudgetAdversary(cfg["target"], cfg["ps"]).ratio]
    else:
        raise ParameterError("give --x, or both --target and --ps")
    columns = ["x", "q_sharp", "lower_boundary", "upper_boundary"]
    if cfg["K"] is not None:
        columns.append("required_captures")
    rows = []
    for x in ratios:
        q = optimal_q_given_target(x, cfg["q_max"])
        upper = None if q == 1 else q_sharp_boundary(q - 1)
        row = [x, q, q_sharp_boundary(q), upper]
        if cfg["K"] is not None:
            row.append(cfg["K"] * math.exp((math.log(x) - log_factorial(q)) / q))
        rows.append(row)
    return Table(columns, rows)


# ---------------------------------------------------------------------------
# connectivity


CONNECTIVITY_CRITICAL = {
    "n": Param("int", required=True),
    "m": Param("int", 0),
    "q": Param("int", 1),
    "K": Param("float"),
    "P": Param("float"),
    "r": Param("float"),
}


def _unknown(cfg: Dict[str, Any]) -> str:
    missing = [k for k in ("K", "P", "r") if cfg.get(k) is None]
    if len(missing) != 1:
        raise ParameterError("give exactly two of --K, --P, --r; the third is solved for")
    return missing[0]


def run_connectivity_critical(cfg: Dict[str, Any]) -> Table:
    unknown = _unknown(cfg)
    inp = DesignGuidelineInput(n=cfg["n"], m=cfg["m"], q=cfg["q"], solve_for=unknown,
                               K=cfg["K"], P=cfg["P"], r=cfg["r"])
    value = critical_parameter(inp)
    solved = {k: cfg[k] for k in ("K", "P", "r")}
    solved[unknown] = value
    edge = edge_probability_asymptotic(solved["K"], solved["P"], solved["r"], cfg["q"])
    n_eff = inp.effective_size
    return Table(
        ["solve_for", "value", "K", "P", "r", "edge_probability", "threshold"],
        [[unknown, value, solved["K"], solved["P"], solved["r"], edge, math.log(n_eff) / n_eff]],
    )


def _criticals(n: int, m: int, q: int, K: float, P: float, r: float) -> Dict[str, Optional[float]]:
    out: Dict[str, Optional[float]] = {}
    for unknown in ("K", "P", "r"):
        given = {"K": K, "P": P, "r": r}
        given[unknown] = None
        try:
            out[unknown] = critical_parameter(
                DesignGuidelineInput(n=n, m=m, q=q, solve_for=unknown, **given)
            )
        except ParameterError:
            out[unknown] = None
    return out


CONNECTIVITY_SIMULATE = {
    "n": Param("int", 1000),
    "K": Param("int", required=True),
    "P": Param("int", required=True),
    "q": Param("int", 1),
    "r": Param("float", required=True),
    "m": Param("int", 0),
    "sweep": Param("str"),
    "values": Param("floats"),
    **_SIM,
}

_CONN_COLUMNS = ["K", "P", "r", "m", "p_connected", "standard_error", "connected_trials",
                 "critical_K", "critical_P", "critical_r"]


def _connectivity_rows(base: Dict[str, Any], points: List[Dict[str, Any]], workers: Optional[int]) -> List[list]:
    rows = []
    for point in points:
        v = {**base, **point}
        params = _params(int(v["K"]), int(v["P"]), v["q"], v["n"])
        est = estimate_connectivity(params, v["r"], v["trials"], v["seed"], captured_m=int(v["m"]), workers=workers)
        crit = _criticals(v["n"], int(v["m"]), v["q"], v["K"], v["P"], v["r"])
        rows.append([int(v["K"]), int(v["P"]), v["r"], int(v["m"]), est.point_estimate, est.standard_error,
                     est.numerator, crit["K"], crit["P"], crit["r"]])
    return rows


def _sweep_points(name: Optional[str], values: Optional[List[float]]) -> List[Dict[str, Any]]:
    if name is None:
        return [{}]
    if name not in ("K", "P", "r", "m"):
        raise ParameterError(f"--sweep must be one of K, P, r, m; got {name!r}")
    if not values:
        raise ParameterError("--sweep needs --values")
    if name == "r":
        return [{"r": v} for v in values]
    return [{name: int(round(v))} for v in values]


def run_connectivity_simulate(cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    points = _sweep_points(cfg["sweep"], cfg["values"])
    rows = _connectivity_rows(cfg, points, workers)
    return Table(list(_CONN_COLUMNS), rows, {"rng_algorithm": RNG_ALGORITHM})


# ---------------------------------------------------------------------------
# compromise and replication simulation


SIMULATE_COMPROMISE = {
    "n": Param("int", required=True),
    "K": Param("int", required=True),
    "P": Param("int", required=True),
    "q": Param("int", 1),
    "m": Param("ints", required=True),
    "hardened": Param("flag", False),
    "geo_r": Param("float"),
    **_SIM,
}


def _maybe_exact(fn: Callable[[], Any]) -> Optional[float]:
    try:
        return float(fn())
    except CapacityError:
        return None


def run_simulate_compromise(cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    params = _params(cfg["K"], cfg["P"], cfg["q"], cfg["n"])
    rows = []
    for m in cfg["m"]:
        exact = _maybe_exact(lambda: compromise_probability_exact(params, m))
        chan = _maybe_exact(lambda: compromise_probability_chan(params, m))
        est = estimate_compromise(params, m, cfg["trials"], cfg["seed"], hardened=cfg["hardened"],
                                  geometric_r=cfg["geo_r"], workers=workers)
        rows.append([m, exact, chan, est.point_estimate, est.standard_error, est.numerator, est.denominator,
                     est.degenerate])
    columns = ["m", "p_exact", "p_chan", "p_simulated", "standard_error", "compromised_pairs", "linked_pairs",
               "degenerate"]
    return Table(columns, rows, {"rng_algorithm": RNG_ALGORITHM})


SIMULATE_REPLICATION = {
    "K": Param("int", required=True),
    "P": Param("int", required=True),
    "q": Param("ints", [1]),
    "b": Param("ints", required=True),
    "c": Param("ints", required=True),
    "d": Param("floats", [1.0]),
    "poisson": Param("flag", False),
    **_SIM,
}

_REPL_COLUMNS = ["q", "b", "c", "d", "p_exact", "p_asym", "asym_in_regime", "p_simulated", "standard_error"]


def _replication_row(K: int, P: int, q: int, b: int, c: int, d: float, trials: int, seed: int,
                     poisson: bool, workers: Optional[int]) -> list:
    spec = ReplicationSpec(b=b, c=c, d=d, scheme=_params(K, P, q))
    exact = replication_success(spec)
    asym, ok = _quiet(lambda: replication_success_asymptotic(spec))
    d_arg = int(d) if not poisson and d == int(d) else d
    est = estimate_replication(K, P, q, b, c, d_arg, trials, seed, poisson=poisson, workers=workers)
    return [q, b, c, d, exact, asym, ok, est.point_estimate, est.standard_error]


def run_simulate_replication(cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    rows = []
    for q in cfg["q"]:
        for d in cfg["d"]:
            for b in cfg["b"]:
                for c in cfg["c"]:
                    rows.append(_replication_row(cfg["K"], cfg["P"], q, b, c, d, cfg["trials"], cfg["seed"],
                                                 cfg["poisson"], workers))
    return Table(list(_REPL_COLUMNS), rows, {"rng_algorithm": RNG_ALGORITHM})


REPLICATION_PLAN = {
    "budget": Param("float", required=True),
    "pb": Param("float", 1.0),
    "pc": Param("float", 1.0),
    "q": Param("int", required=True),
}


def run_replication_plan(cfg: Dict[str, Any]) -> Table:
    alloc = optimal_allocation(BudgetModel(cfg["budget"], cfg["pb"], cfg["pc"]), cfg["q"])
    return Table(
        ["b", "c", "tie", "regime", "objective", "cost"],
        [[alloc.b, alloc.c, alloc.tie, alloc.regime, alloc.b ** cfg["q"] * alloc.c,
          alloc.b ** cfg["pb"] * alloc.c ** cfg["pc"]]],
    )


# ---------------------------------------------------------------------------
# presets


def _fig_resilience(ps: float) -> Dict[str, Param]:
    return {**RESILIENCE, "ps": Param("float", ps), "chan": Param("flag", True), "asym": Param("flag", True)}


_FACTORS = [0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3]


def _connectivity_preset(sweep: str, defaults: Dict[str, Any]) -> Dict[str, Param]:
    schema = {
        "n": Param("int", defaults["n"]),
        "q": Param("int", defaults["q"]),
        "m": Param("int", defaults.get("m", 0)),
        "factors": Param("floats", list(_FACTORS)),
        **_SIM,
    }
    for name in ("K", "P", "r"):
        if name != sweep:
            schema[name] = Param("float" if name == "r" else "int", defaults[name])
    return schema


def run_connectivity_sweep(sweep: str, cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    given = {k: cfg.get(k) for k in ("K", "P", "r")}
    given[sweep] = None
    critical = critical_parameter(
        DesignGuidelineInput(n=cfg["n"], m=cfg["m"], q=cfg["q"], solve_for=sweep, **given)
    )
    points: List[Dict[str, Any]] = []
    seen = set()
    for f in cfg["factors"]:
        v = critical * f
        if sweep != "r":
            v = int(round(v))
        if v in seen:
            continue
        seen.add(v)
        points.append({sweep: v})
    base = {**cfg, sweep: None}
    for point in points:
        if sweep == "K" and point["K"] > cfg["P"]:
            raise ParameterError("a swept K exceeds P; lower the factors")
        if sweep == "r" and point["r"] > 0.5:
            raise ParameterError("a swept r exceeds 1/2; lower the factors")
    rows = _connectivity_rows(base, points, workers)
    return Table(list(_CONN_COLUMNS), rows, {"rng_algorithm": RNG_ALGORITHM, "swept": sweep,
                                             "critical_value": critical})


FIG8 = {
    "K": Param("int", 50),
    "P": Param("int", 10000),
    **_SIM,
}

_FIG8_C = [1, 2, 4, 6, 8, 10, 15, 20, 30, 50, 75, 100, 150, 200]
_FIG8_B = [10, 20, 50, 100, 150, 200, 300, 500]


def run_fig8(cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    K, P, trials, seed = cfg["K"], cfg["P"], cfg["trials"], cfg["seed"]
    rows = []
    for panel, d in (("a", 1), ("b", 8)):
        for q in (1, 3):
            for b in (100, 200):
                for c in _FIG8_C:
                    rows.append([panel] + _replication_row(K, P, q, b, c, d, trials, seed, False, workers))
    for panel, c in (("c", 10), ("d", 1)):
        for q in (1, 2, 3):
            for b in _FIG8_B:
                rows.append([panel] + _replication_row(K, P, q, b, c, 1, trials, seed, False, workers))
    return Table(["panel"] + _REPL_COLUMNS, rows, {"rng_algorithm": RNG_ALGORITHM})


# reference intervals of x = p_compromised/p_s for each optimal q, rounded as tabulated
REFERENCE_Q_SHARP_INTERVALS = [
    (1, 0.5, math.inf),
    (2, 0.222, 0.5),
    (3, 0.094, 0.222),
    (4, 0.038, 0.094),
    (5, 0.016, 0.038),
    (6, 0.0053, 0.016),
    (7, 0.0023, 0.0053),
    (8, 0.0009, 0.0023),
]

TABLE1: Dict[str, Param] = {}


def run_table1(cfg: Dict[str, Any]) -> Table:
    rows = []
    for q, lo, hi in REFERENCE_Q_SHARP_INTERVALS:
        mid = 2 * lo if math.isinf(hi) else (lo + hi) / 2
        analytic_lo = q_sharp_boundary(q)
        rows.append([q, lo, None if math.isinf(hi) else hi, mid, optimal_q_given_target(mid),
                     analytic_lo, abs(analytic_lo - lo) / lo])
    return Table(["q", "reference_lower", "reference_upper", "midpoint", "q_sharp_at_midpoint",
                  "analytic_lower", "relative_gap_lower"], rows)


TABLE2_RATIO = {
    "K": Param("int", 10),
    "P": Param("int", 200_000),
    "b": Param("int", 100),
    "d": Param("float", 1.0),
    "q": Param("ints", [1, 2, 3]),
    "targets": Param("floats", [0.3, 0.5, 0.7, 0.8, 0.9, 0.97, 0.99]),
}


def run_table2_ratio(cfg: Dict[str, Any]) -> Table:
    b = cfg["b"]
    rows = []
    for q in cfg["q"]:
        params = _params(cfg["K"], cfg["P"], q)
        for t in cfg["targets"]:
            c1 = min_replicas(t, b, cfg["d"], params)
            c2 = min_replicas(t, 2 * b, cfg["d"], params)
            ratio = c1 / c2
            rows.append([q, t, c1, c2, ratio, ratio ** (1 / q), ratio / 2**q, abs(ratio / 2**q - 1) <= 0.1])
    return Table(["q", "target", "c_b", "c_2b", "ratio", "ratio_root_q", "ratio_over_2_pow_q", "within_10pct"],
                 rows, {"regime_margin": cfg["P"] / (2 * b * cfg["K"])})


TWO_NODE = {
    "K": Param("int", 10),
    "r": Param("float", 0.5),
    "trials": Param("int", 10_000),
    "seed": Param("int", DEFAULT_SEED),
}


def run_two_node(cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    params = _params(cfg["K"], cfg["K"], 1, 2)
    est = estimate_connectivity(params, cfg["r"], cfg["trials"], cfg["seed"], workers=workers)
    closed = math.pi * cfg["r"] ** 2
    return Table(["p_connected", "standard_error", "closed_form", "z_score"],
                 [[est.point_estimate, est.standard_error, closed,
                   (est.point_estimate - closed) / est.standard_error if est.standard_error else None]],
                 {"rng_algorithm": RNG_ALGORITHM})


_CONN_BASE = {"n": 1000, "q": 1, "K": 33, "P": 20000, "r": 0.2}


@dataclass(frozen=True)
class Experiment:
    schema: Dict[str, Param]
    runner: Callable[..., Table]
    simulated: bool = False


COMMANDS: Dict[str, Experiment] = {
    "resilience": Experiment(RESILIENCE, run_resilience),
    "optimal-q-capture": Experiment(OPTIMAL_Q_CAPTURE, run_optimal_q_capture),
    "optimal-q-budget": Experiment(OPTIMAL_Q_BUDGET, run_optimal_q_budget),
    "connectivity-critical": Experiment(CONNECTIVITY_CRITICAL, run_connectivity_critical),
    "connectivity-simulate": Experiment(CONNECTIVITY_SIMULATE, run_connectivity_simulate, True),
    "simulate-compromise": Experiment(SIMULATE_COMPROMISE, run_simulate_compromise, True),
    "simulate-replication": Experiment(SIMULATE_REPLICATION, run_simulate_replication, True),
    "replication-plan": Experiment(REPLICATION_PLAN, run_replication_plan),
}

PRESETS: Dict[str, Experiment] = {
    "fig2": Experiment(_fig_resilience(0.05), run_resilience),
    "fig3": Experiment(_fig_resilience(0.1), run_resilience),
    "fig-connectivity-K": Experiment(_connectivity_preset("K", _CONN_BASE),
                                     lambda cfg, workers=None: run_connectivity_sweep("K", cfg, workers), True),
    "fig-connectivity-P": Experiment(_connectivity_preset("P", _CONN_BASE),
                                     lambda cfg, workers=None: run_connectivity_sweep("P", cfg, workers), True),
    "fig-connectivity-r": Experiment(_connectivity_preset("r", _CONN_BASE),
                                     lambda cfg, workers=None: run_connectivity_sweep("r", cfg, workers), True),
    "fig-capture": Experiment(_connectivity_preset("K", {**_CONN_BASE, "m": 300}),
                              lambda cfg, workers=None: run_connectivity_sweep("K", cfg, workers), True),
    "fig8": Experiment(FIG8, run_fig8, True),
    "table1": Experiment(TABLE1, run_table1),
    "table2-ratio": Experiment(TABLE2_RATIO, run_table2_ratio),
    "two-node": Experiment(TWO_NODE, run_two_node, True),
}


def run(experiment: Experiment, cfg: Dict[str, Any], workers: Optional[int] = None) -> Table:
    if experiment.simulated:
        return experiment.runner(cfg, workers=workers)
    return experiment.runner(cfg)


# ---------------------------------------------------------------------------
# rendering


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _dumps(obj: Any, **kw: Any) -> str:
    return json.dumps(_json_safe(obj), sort_keys=True, allow_nan=False, **kw)


def render_csv(config: Dict[str, Any], table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {_dumps(config)}\n")
    buf.write(f"# meta: {_dumps(table.meta)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_json(config: Dict[str, Any], table: Table) -> str:
    doc = {
        "config": config,
        "meta": table.meta,
        "columns": table.columns,
        "rows": table.rows,
    }
    return _dumps(doc, indent=2) + "\n"


def render(config: Dict[str, Any], table: Table, fmt: str) -> str:
    if fmt == "csv":
        return render_csv(config, table)
    if fmt == "json":
        return render_json(config, table)
    raise ParameterError(f"unknown format {fmt!r}")


def read_output(text: str) -> Dict[str, Any]:
    """Parse an emitted CSV or JSON document back into config, meta, columns and rows.

    CSV cells come back as strings.
    """
    if text.lstrip().startswith("{"):
        return json.loads(text)
    config: Dict[str, Any] = {}
    meta: Dict[str, Any] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif line.startswith("# meta: "):
            meta = json.loads(line[len("# meta: "):])
        elif not line.startswith("#"):
            body.append(line)
    records = list(csv.reader(body))
    return {"config": config, "meta": meta, "columns": records[0] if records else [], "rows": records[1:]}
