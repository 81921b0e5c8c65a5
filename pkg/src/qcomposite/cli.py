"""Command-line entry point.

Exit codes: 0 success, 2 invalid parameters, 3 exact-path capacity exceeded,
4 input/output failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Dict, List, Optional

from . import experiments as ex
from .errors import CapacityError, ParameterError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAPACITY = 3
EXIT_IO = 4

# flag name -> schema key
_FLAGS = {
    "n": "n", "K": "K", "P": "P", "q": "q", "m": "m", "r": "r", "b": "b", "c": "c", "d": "d",
    "ps": "ps", "trials": "trials", "seed": "seed", "x": "x", "target": "target", "budget": "budget",
    "pb": "pb", "pc": "pc", "sweep": "sweep", "values": "values", "geo-r": "geo_r", "q-max": "q_max",
    "factors": "factors", "targets": "targets",
}
_SWITCHES = {"chan": "chan", "asym": "asym", "hardened": "hardened", "poisson": "poisson"}


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag, dest in _FLAGS.items():
        common.add_argument(f"--{flag}", dest=dest, default=None, metavar="VALUE")
    for flag, dest in _SWITCHES.items():
        common.add_argument(f"--{flag}", dest=dest, action="store_const", const="true", default=None)
    common.add_argument("--out", default=None, help="output directory (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--config", default=None, help="key=value file; flags override it")
    common.add_argument("--workers", type=int, default=None, help="processes for Monte Carlo trials")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="qcomposite", description="q-composite key predistribution analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("resilience", parents=[common], help="exact compromise curves over q")

    oq = sub.add_parser("optimal-q", help="best q against a capturing adversary")
    oq_sub = oq.add_subparsers(dest="mode", required=True)
    oq_sub.add_parser("capture", parents=[common], help="given the number of captured nodes")
    oq_sub.add_parser("budget", parents=[common], help="given the adversary's target compromise ratio")

    conn = sub.add_parser("connectivity", help="connectivity design rule and simulation")
    conn_sub = conn.add_subparsers(dest="mode", required=True)
    conn_sub.add_parser("critical", parents=[common], help="solve the critical K, P or r")
    conn_sub.add_parser("simulate", parents=[common], help="Monte Carlo connectivity probability")

    sim = sub.add_parser("simulate", help="Monte Carlo attacks")
    sim_sub = sim.add_subparsers(dest="mode", required=True)
    sim_sub.add_parser("compromise", parents=[common], help="node capture")
    sim_sub.add_parser("replication", parents=[common], help="node replication")

    rep = sub.add_parser("replication", help="replication attack planning")
    rep_sub = rep.add_subparsers(dest="mode", required=True)
    rep_sub.add_parser("plan", parents=[common], help="budget split between replica size and count")

    exp = sub.add_parser("experiment", parents=[common], help="run a named preset")
    exp.add_argument("preset", choices=sorted(ex.PRESETS))
    return parser


def read_config_file(path: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = _FLAGS.get(key, _SWITCHES.get(key, key.replace("-", "_")))
            values[key] = value
    return values


def _name(args: argparse.Namespace) -> str:
    if args.command == "experiment":
        return args.preset
    mode = getattr(args, "mode", None)
    return f"{args.command}-{mode}" if mode else args.command


def execute(args: argparse.Namespace) -> Optional[str]:
    """Run the parsed command; return the written path, or None when printed."""
    name = _name(args)
    experiment = ex.PRESETS[name] if args.command == "experiment" else ex.COMMANDS[name]
    file_layer = read_config_file(args.config) if args.config else {}
    flag_layer = {k: v for k, v in vars(args).items() if v is not None}
    unknown = set(file_layer) - set(experiment.schema) - {"format", "out", "workers"}
    if unknown:
        raise ParameterError(f"unknown config keys for {name}: {', '.join(sorted(unknown))}")
    ignored = [f for f, dest in {**_FLAGS, **_SWITCHES}.items()
               if flag_layer.get(dest) is not None and dest not in experiment.schema]
    if ignored:
        raise ParameterError(f"{name} does not take --{', --'.join(ignored)}")

    params = ex.resolve(experiment.schema, file_layer, flag_layer)
    fmt = args.format or file_layer.get("format") or "csv"
    out = args.out or file_layer.get("out")
    workers = args.workers if args.workers is not None else (
        int(file_layer["workers"]) if "workers" in file_layer else None)

    table = ex.run(experiment, params, workers=workers)
    config = {"command": name, "format": fmt, "params": params}
    text = ex.render(config, table, fmt)

    if out is None:
        sys.stdout.write(text)
        return None
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{name}.{fmt}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        path = execute(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if path is not None:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
