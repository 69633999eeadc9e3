"""JSONL trajectory files and CSV summaries.

A trajectory file starts with one header line::

    {"type": "header", "schema": "weakmipt.trajectories", "version": 1,
     "command": ..., "spec": {...}}

followed by one line per trajectory::

    {"type": "trajectory", "cell": {"L": 8, "p": 0.19, "J": 1.0}, "index": 17,
     "seed": ..., "protocol": ..., "config": {...}, "n_measurements": ...,
     "discarded": false, "cum_log_born": [...], "series": {"S_anc": [...]}}

Floats are written with ``repr`` precision, so a reload is exact. The
canonical order is by ``(L, p, J, index)``.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .circuit import TrajectoryRecord
from .errors import InvalidArgument

SCHEMA = "weakmipt.trajectories"
SCHEMA_VERSION = 1


class SchemaError(InvalidArgument):
    pass


def cell_tuple(cell: dict) -> tuple:
    return (int(cell["L"]), float(cell["p"]), float(cell["J"]))


def record_to_line(rec: TrajectoryRecord, cell: dict) -> str:
    d = {
        "type": "trajectory",
        "cell": {"L": int(cell["L"]), "p": float(cell["p"]), "J": float(cell["J"])},
        "index": int(rec.index),
        "seed": int(rec.seed),
        "protocol": rec.protocol,
        "config": rec.config,
        "n_measurements": int(rec.n_measurements),
        "discarded": bool(rec.discarded),
        "cum_log_born": np.asarray(rec.cum_log_born, float).tolist(),
        "series": {k: np.asarray(v, float).tolist() for k, v in sorted(rec.series.items())},
    }
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def record_from_dict(d: dict) -> TrajectoryRecord:
    return TrajectoryRecord(
        seed=d["seed"],
        index=d["index"],
        protocol=d["protocol"],
        config=d["config"],
        cum_log_born=np.asarray(d["cum_log_born"], float),
        series={k: np.asarray(v, float) for k, v in d["series"].items()},
        n_measurements=d["n_measurements"],
        discarded=d["discarded"],
    )


def header_line(command: str, spec: dict) -> str:
    d = {"type": "header", "schema": SCHEMA, "version": SCHEMA_VERSION, "command": command,
         "spec": spec}
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def read_trajectories(path, tolerate_partial: bool = False):
    """Return ``(header, [record dicts])``.

    With ``tolerate_partial`` a truncated final line (an interrupted write) is
    dropped; any other malformed line raises :class:`SchemaError`.
    """
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: unreadable header: {exc}") from None
    if header.get("type") != "header" or header.get("schema") != SCHEMA:
        raise SchemaError(f"{path}: not a {SCHEMA} file")
    if header.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {header.get('version')} "
                          f"(expected {SCHEMA_VERSION})")
    out = []
    for n, line in enumerate(lines[1:], start=2):
        try:
            d = json.loads(line)
        except json.JSONDecodeError:
            if tolerate_partial and n == len(lines):
                break
            raise SchemaError(f"{path}: line {n} is not valid JSON") from None
        if d.get("type") != "trajectory":
            raise SchemaError(f"{path}: line {n} is not a trajectory record")
        out.append(d)
    return header, out


def sort_key(d: dict) -> tuple:
    return cell_tuple(d["cell"]) + (int(d["index"]),)


def write_trajectories(path, header: str, records: list):
    """Atomically (re)write a trajectory file in canonical order."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(header + "\n")
        for d in sorted(records, key=sort_key):
            fh.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")
    os.replace(tmp, path)


# spec keys that may differ between files covering disjoint index ranges
RANGE_KEYS = ("trajectories", "index_offset", "workers", "output", "config")


def _compatible_spec(spec: dict) -> dict:
    return {k: v for k, v in spec.items() if k not in RANGE_KEYS}


def merge_trajectories(paths) -> tuple:
    """Union of trajectory files; returns ``(header_line, records)`` in canonical order.

    Files must share schema, command and physics parameters. A ``(cell, index)``
    pair present twice is an error. The merged header records the union's
    index range, so merging disjoint ranges reproduces a single run.
    """
    if not paths:
        raise InvalidArgument("nothing to merge")
    ref = None
    seen = {}
    records = []
    for path in paths:
        header, recs = read_trajectories(path)
        key = (header["command"], _compatible_spec(header["spec"]))
        if ref is None:
            ref, ref_path, ref_header = key, path, header
        elif key != ref:
            raise SchemaError(f"{path}: incompatible with {ref_path} (command or parameters differ)")
        for d in recs:
            k = sort_key(d)
            if k in seen:
                raise SchemaError(f"{path}: duplicate trajectory cell={d['cell']} index={d['index']} "
                                  f"(also in {seen[k]})")
            seen[k] = str(path)
            records.append(d)
    records.sort(key=sort_key)
    per_cell = {}
    for d in records:
        per_cell.setdefault(cell_tuple(d["cell"]), []).append(int(d["index"]))
    lo = min(min(v) for v in per_cell.values())
    hi = max(max(v) for v in per_cell.values())
    spec = dict(ref_header["spec"])
    spec["index_offset"] = lo
    spec["trajectories"] = hi - lo + 1
    return header_line(ref_header["command"], spec), records


def write_csv(path, rows: list, columns: list):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r.get(c)) for c in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
