"""Command-line entry point.

Exit status: 0 success, 1 bad input (arguments, config, incompatible files),
2 runtime failure (I/O or simulation errors).

Config files hold one ``key = value`` per line (``#`` starts a comment); keys
are the long option names with ``-`` or ``_``. Flags on the command line
override file values. Lists are comma separated; ``a:b:step`` expands to an
inclusive range.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .experiments import (
    ANALYSIS_COMMANDS,
    SIM_COMMANDS,
    ExperimentSpec,
    analyze_ceff,
    analyze_collapse,
    analyze_table,
    read_header,
    run_trajectories,
    spec_from_header,
    summarize,
)
from .storage import merge_trajectories, write_trajectories

log = logging.getLogger("weakmipt")

EXIT_OK, EXIT_BAD_INPUT, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_list(text, kind=float) -> list:
    out = []
    for tok in str(text).replace(" ", ",").split(","):
        if not tok:
            continue
        if ":" in tok:
            parts = tok.split(":")
            if len(parts) != 3:
                raise InvalidArgument(f"range {tok!r} must be start:stop:step")
            a, b, s = (float(x) for x in parts)
            if s <= 0:
                raise InvalidArgument(f"range {tok!r} needs a positive step")
            n = int(np.floor((b - a) / s + 1e-9)) + 1
            out += [kind(round(a + k * s, 12)) for k in range(n)]
        else:
            out.append(kind(tok) if kind is not int else int(float(tok)))
    if not out:
        raise InvalidArgument(f"empty list {text!r}")
    return out


def read_config(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        values[k.replace("-", "_")] = v
    return values


def _common(sp):
    sp.add_argument("--config", help="key = value file; flags override it")
    sp.add_argument("--output", default="out", help="output directory")
    sp.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")
    sp.add_argument("--quiet", action="store_true")


def _sim_args(sp, command):
    sp.add_argument("--L", default="8", help="system sizes, e.g. 8,10,12")
    sp.add_argument("--p", default="0.19", help="measurement rates, list or start:stop:step")
    sp.add_argument("--J", default="1.0",
                    help="strength: lambda/Delta (cgpm, dgpm) or Lambda (spmm)")
    sp.add_argument("--model", default="projective",
                    choices=["projective", "cgpm", "dgpm", "spmm"])
    sp.add_argument("--delta", type=float, default=1.0, help="pointer width Delta")
    sp.add_argument("--epsilon-ratio", type=float, default=1e-5, help="DGPM bin width / Delta")
    sp.add_argument("--gate-set", default="HDU", choices=["HDU", "Haar"])
    sp.add_argument("--trajectories", type=int, default=100)
    sp.add_argument("--index-offset", type=int, default=0,
                    help="first trajectory index (for split runs)")
    sp.add_argument("--master-seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--t-max", type=int, default=None, help="absolute number of steps")
    sp.add_argument("--t-factor", type=float, default=None, help="steps in units of L")
    sp.add_argument("--wait-factor", type=int, default=20,
                    help="mutual-info: monitored steps before entangling, in units of L")
    sp.add_argument("--warmup-factor", type=int, default=None,
                    help="free energies: steps dropped before fitting, in units of L "
                         "(default 5, or 4 for spmm)")
    sp.add_argument("--alpha", type=float, default=1.0, help="space-time anisotropy factor")
    sp.add_argument("--initial-state", default="product", choices=["product", "haar"])
    sp.add_argument("--label", default=None, help="model label in results tables")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="weakmipt", description="Monitored random-circuit experiments")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "phase-map": "var(S) of the half-cut entropy over a (p, J) grid",
        "ancilla-crossing": "ancilla order parameter at t = 2L and the (p_c, nu) collapse",
        "ancilla-dynamics": "ancilla entropy versus time and the z collapse",
        "mutual-info": "two-ancilla mutual information and the eta collapse",
        "free-energy": "free-energy density f(L) and the c_eff double fit",
        "generalized-free-energy": "paired-state free energies, cumulants and H(s)",
    }
    for name in SIM_COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        _common(sp)
        _sim_args(sp, name)
    sp = sub.add_parser("collapse", help="collapse a summary CSV")
    _common(sp)
    sp.add_argument("--input", nargs="+", required=True)
    sp.add_argument("--kind", default="pc-nu", choices=["pc-nu", "z", "eta"])
    sp.add_argument("--label", default=None, help="model label in results tables")
    sp = sub.add_parser("ceff-fit", help="c_eff double fit of a free_energy.csv")
    _common(sp)
    sp.add_argument("--input", nargs="+", required=True)
    sp.add_argument("--label", default=None)
    sp = sub.add_parser("table1", help="collect results.json files into one table")
    _common(sp)
    sp.add_argument("--input", nargs="+", required=True)
    sp = sub.add_parser("merge", help="merge trajectory files and summarize the union")
    _common(sp)
    sp.add_argument("inputs", nargs="+", help="trajectories.jsonl files")
    return ap


def _apply_config(ap, argv):
    """Re-parse with config-file values installed as subparser defaults."""
    args = ap.parse_args(argv)
    if not args.config:
        return args
    sub = ap._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in read_config(args.config).items():
        action = dests.get(k)
        if action is None or k in ("config", "help"):
            raise InvalidArgument(f"{args.config}: unknown key {k!r} for {args.command}")
        if action.nargs in ("+", "*"):
            defaults[k] = v.replace(",", " ").split()
        elif isinstance(action, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[k] = action.type(v)
            except ValueError:
                raise InvalidArgument(f"{args.config}: bad value for {k}: {v!r}") from None
        else:
            if action.choices and v not in action.choices:
                raise InvalidArgument(f"{args.config}: {k} must be one of {list(action.choices)}")
            defaults[k] = v
    sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def spec_from_args(args) -> ExperimentSpec:
    d = {k: v for k, v in vars(args).items() if k not in ("quiet", "inputs")}
    if args.command in SIM_COMMANDS:
        d["L"] = parse_list(args.L, int)
        d["p"] = parse_list(args.p, float)
        d["J"] = parse_list(args.J, float)
    return ExperimentSpec(**d).validate()


def _merge(args):
    for p in args.inputs:
        if not Path(p).is_file():
            raise InvalidArgument(f"input {p} does not exist")
    header, records = merge_trajectories(args.inputs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectories.jsonl"
    if any(Path(p).resolve() == path.resolve() for p in args.inputs):
        raise InvalidArgument("merge output must not overwrite one of its inputs")
    write_trajectories(path, header, records)
    import json

    spec = spec_from_header(json.loads(header), str(out))
    spec.bootstrap = args.bootstrap
    summarize(spec, path, out)
    log.info("merged %d trajectories into %s", len(records), path)


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(message)s", stream=sys.stderr)
        if args.command == "merge":
            _merge(args)
            return EXIT_OK
        spec = spec_from_args(args)
        out = Path(spec.output)
        out.mkdir(parents=True, exist_ok=True)
        if spec.command in SIM_COMMANDS:
            path = run_trajectories(spec, log=log.info)
            summarize(spec, path, out)
        elif spec.command == "collapse":
            analyze_collapse(spec, out)
        elif spec.command == "ceff-fit":
            analyze_ceff(spec, out)
        else:
            analyze_table(spec, out)
        log.info("results in %s", out)
        return EXIT_OK
    except (UsageError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_BAD_INPUT
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())
