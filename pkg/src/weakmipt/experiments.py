"""Experiment pipelines behind the CLI: cells, seed blocks, resume and summaries.

An experiment is a grid of cells ``(L, p, J)``; each cell runs
``trajectories`` trajectories with indices ``index_offset + k`` in blocks of
``BLOCK`` consecutive indices. A cell's generator seed is derived from
``(master_seed, L, p, J)``, so cells are statistically independent and every
trajectory depends only on its cell and index.
"""
from __future__ import annotations

import json
import math
import os
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import plotting
from .circuit import PROTOCOLS, CircuitConfig
from .errors import InvalidArgument
from .lyapunov import (
    FreeEnergySeries,
    correlator_samples,
    cumulant_rates,
    free_energy_density,
    generalized_free_energy_density,
    multifractal_curve,
    scaling_dimension_fit,
    warmup,
)
from .observables import crossing_points, ensemble_stat, var_s_ensemble
from .scaling import (
    ceff_double_fit,
    collapse_fit_eta,
    collapse_fit_pc_nu,
    collapse_fit_z,
    results_table,
)
from .storage import (
    SchemaError,
    _compatible_spec,
    cell_tuple,
    header_line,
    record_from_dict,
    record_to_line,
    write_csv,
)
from .weakmeas import CGPM, DGPM, SPMM, Projective

BLOCK = 100

SIM_COMMANDS = ("phase-map", "ancilla-crossing", "ancilla-dynamics", "mutual-info",
                "free-energy", "generalized-free-energy")
ANALYSIS_COMMANDS = ("collapse", "ceff-fit", "table1")

PROTOCOL = {
    "phase-map": "trajectory",
    "ancilla-crossing": "ancilla",
    "ancilla-dynamics": "ancilla",
    "mutual-info": "mutual_info",
    "free-energy": "trajectory",
    "generalized-free-energy": "paired",
}
# default t_max in units of L
T_FACTOR = {
    "ancilla-crossing": 2,
    "ancilla-dynamics": 4,
    "mutual-info": 2,
    "free-energy": 32,
    "generalized-free-energy": 32,
}


@dataclass
class ExperimentSpec:
    command: str
    L: list = field(default_factory=lambda: [8])
    p: list = field(default_factory=lambda: [0.19])
    J: list = field(default_factory=lambda: [1.0])
    model: str = "projective"
    delta: float = 1.0
    epsilon_ratio: float = 1e-5
    gate_set: str = "HDU"
    trajectories: int = 100
    index_offset: int = 0
    master_seed: int = 0
    workers: int = 1
    output: str = "out"
    t_max: Optional[int] = None
    t_factor: Optional[float] = None
    wait_factor: int = 20
    warmup_factor: Optional[int] = None
    alpha: float = 1.0
    initial_state: str = "product"
    bootstrap: int = 1000
    input: list = field(default_factory=list)
    kind: str = "pc-nu"
    label: Optional[str] = None
    config: Optional[str] = None

    def validate(self):
        if self.command not in SIM_COMMANDS + ANALYSIS_COMMANDS:
            raise InvalidArgument(f"unknown command {self.command!r}")
        if self.command in SIM_COMMANDS:
            if not (self.L and self.p and self.J):
                raise InvalidArgument("the (L, p, J) grid must be nonempty")
            if self.trajectories < 1:
                raise InvalidArgument("trajectories must be >= 1")
            if self.index_offset < 0:
                raise InvalidArgument("index_offset must be >= 0")
            if self.model not in ("projective", "cgpm", "dgpm", "spmm"):
                raise InvalidArgument(f"unknown model {self.model!r}")
            if self.model == "cgpm" and self.command in ("free-energy", "generalized-free-energy"):
                raise InvalidArgument("free energies need discrete outcomes; use dgpm, not cgpm")
            for L in self.L:
                if L < 2 or L % 2:
                    raise InvalidArgument(f"L must be even and >= 2, got {L}")
            for p in self.p:
                if not 0 <= p <= 1:
                    raise InvalidArgument(f"p must lie in [0, 1], got {p}")
        else:
            if not self.input:
                raise InvalidArgument(f"{self.command} needs --input")
            for path in self.input:
                if not Path(path).is_file():
                    raise InvalidArgument(f"input {path} does not exist")
            if self.command == "collapse" and self.kind not in ("pc-nu", "z", "eta"):
                raise InvalidArgument(f"unknown collapse kind {self.kind!r}")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")
        return self

    def header_spec(self) -> dict:
        d = asdict(self)
        for k in ("workers", "output", "config", "input", "kind", "label"):
            d.pop(k)
        return d

    def cells(self) -> list:
        return sorted({(int(L), float(p), float(J)) for L in self.L for p in self.p
                       for J in self.J})

    def model_for(self, J: float):
        if self.model == "projective":
            return Projective()
        if self.model == "cgpm":
            return CGPM(lam=J * self.delta, delta=self.delta)
        if self.model == "dgpm":
            return DGPM(lam=J * self.delta, delta=self.delta,
                        epsilon=self.epsilon_ratio * self.delta)
        return SPMM(J)

    def t_max_for(self, L: int) -> int:
        if self.t_max:
            return int(self.t_max)
        if self.command == "phase-map":
            return max(2 * L, 100)
        return int(round((self.t_factor or T_FACTOR[self.command]) * L))

    def config_for(self, cell) -> CircuitConfig:
        L, p, J = cell
        return CircuitConfig(L=L, p=p, model=self.model_for(J), gate_set=self.gate_set,
                             t_max=self.t_max_for(L), master_seed=cell_seed(self.master_seed, cell),
                             alpha=self.alpha, initial_state=self.initial_state)

    def protocol_kwargs(self, L: int) -> dict:
        if self.command == "free-energy":
            return {"record_entropy": False}
        if self.command == "mutual-info":
            return {"wait_time": self.wait_factor * L}
        return {}

    def warmup_steps(self, L: int) -> int:
        if self.warmup_factor is not None:
            return self.warmup_factor * L
        return warmup(L, self.model)

    def model_label(self, J: float) -> str:
        if self.label:
            return self.label
        return self.model if self.model == "projective" else f"{self.model} J={J:g}"


def cell_seed(master_seed: int, cell) -> int:
    L, p, J = cell
    ss = np.random.SeedSequence([int(master_seed), int(L), int(round(p * 1e9)),
                                 int(round(J * 1e9))])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def blocks(spec: ExperimentSpec):
    """``(cell, indices)`` tasks in canonical order."""
    lo = spec.index_offset
    hi = lo + spec.trajectories
    out = []
    for cell in spec.cells():
        for start in range(lo, hi, BLOCK):
            out.append((cell, list(range(start, min(start + BLOCK, hi)))))
    return out


def _run_block(args):
    spec, cell, indices = args
    config = spec.config_for(cell)
    fn = PROTOCOLS[PROTOCOL[spec.command]]
    kw = spec.protocol_kwargs(cell[0])
    c = {"L": cell[0], "p": cell[1], "J": cell[2]}
    return [record_to_line(fn(config, i, **kw), c) for i in indices]


# -- resumable trajectory file ----------------------------------------------

def _scan(path: Path):
    """Header plus ``{(cell, index): (offset, length)}`` for every complete line."""
    index = {}
    header = None
    with open(path, "rb") as fh:
        offset = 0
        for n, raw in enumerate(fh):
            length = len(raw)
            if not raw.endswith(b"\n"):
                break  # interrupted write
            d = json.loads(raw)
            if n == 0:
                header = d
            else:
                key = cell_tuple(d["cell"]) + (int(d["index"]),)
                index[key] = (offset, length)
            offset += length
    return header, index


def _rewrite(path: Path, header: str, index: dict, keep):
    tmp = path.with_suffix(".jsonl.tmp")
    with open(path, "rb") as src, open(tmp, "wb") as dst:
        dst.write(header.encode() + b"\n")
        for key in sorted(k for k in index if k in keep):
            off, length = index[key]
            src.seek(off)
            dst.write(src.read(length))
    os.replace(tmp, path)


def run_trajectories(spec: ExperimentSpec, log=print) -> Path:
    """Simulate every missing seed block; returns the trajectory file path.

    Completed blocks of an earlier run with the same header are kept;
    partially written blocks are recomputed.
    """
    out = Path(spec.output)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectories.jsonl"
    header = header_line(spec.command, spec.header_spec())
    tasks = blocks(spec)
    resumed = False
    if path.exists() and path.stat().st_size > 0:
        old_header, index = _scan(path)
        if old_header is None or (old_header.get("command"), _compatible_spec(old_header["spec"])) \
                != (spec.command, _compatible_spec(json.loads(header)["spec"])):
            raise SchemaError(f"{path} belongs to a different experiment; choose another --output")
        keep = set()
        todo = []
        for cell, idx in tasks:
            keys = [cell + (i,) for i in idx]
            if all(k in index for k in keys):
                keep.update(keys)
            else:
                todo.append((cell, idx))
        _rewrite(path, header, index, keep)
        resumed = bool(keep)
        log(f"resume: {len(tasks) - len(todo)} of {len(tasks)} blocks already done")
        tasks = todo
    else:
        with open(path, "w") as fh:
            fh.write(header + "\n")
    if tasks:
        args = [(spec, cell, idx) for cell, idx in tasks]
        with open(path, "a") as fh:
            for n, lines in enumerate(_map(_run_block, args, spec.workers), 1):
                fh.write("\n".join(lines) + "\n")
                fh.flush()
                log(f"block {n}/{len(args)} done")
        if resumed:
            _, index = _scan(path)
            _rewrite(path, header, index, set(index))
    return path


def _map(fn, args, workers):
    if workers <= 1:
        for a in args:
            yield fn(a)
        return
    import multiprocessing as mp

    with mp.get_context("fork").Pool(workers) as pool:
        yield from pool.imap(fn, args)


def iter_cells(path):
    """Yield ``(cell, [TrajectoryRecord])`` from a canonical trajectory file."""
    cur, recs = None, []
    with open(path) as fh:
        next(fh)
        for line in fh:
            d = json.loads(line)
            c = cell_tuple(d["cell"])
            if c != cur and recs:
                yield cur, recs
                recs = []
            cur = c
            recs.append(record_from_dict(d))
    if recs:
        yield cur, recs


def read_header(path) -> dict:
    with open(path) as fh:
        return json.loads(fh.readline())


def spec_from_header(header: dict, output: str) -> ExperimentSpec:
    s = dict(header["spec"])
    return ExperimentSpec(output=output, **s)


# -- summaries ---------------------------------------------------------------

SERIES_COLUMNS = ["L", "p", "J", "t", "mean", "stderr"]


def _series_rows(cell, mean, err):
    L, p, J = cell
    return [{"L": L, "p": p, "J": J, "t": t, "mean": m, "stderr": e}
            for t, (m, e) in enumerate(zip(mean, err))]


def _mean_err(m: np.ndarray):
    n = m.shape[0]
    err = m.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(m.shape[1])
    return m.mean(axis=0), err


def _err_half_width(res) -> dict:
    # 95% percentile interval -> one-sigma equivalent
    return {k: [res.params[k], (hi - lo) / 3.92] for k, (lo, hi) in res.intervals.items()}


def summarize(spec: ExperimentSpec, path, out: Path) -> dict:
    fn = {
        "phase-map": _summary_phase_map,
        "ancilla-crossing": _summary_crossing,
        "ancilla-dynamics": _summary_dynamics,
        "mutual-info": _summary_mutual_info,
        "free-energy": _summary_free_energy,
        "generalized-free-energy": _summary_generalized,
    }[spec.command]
    results = fn(spec, iter_cells(path), out)
    results = {"command": spec.command, **results}
    with open(out / "results.json", "w") as fh:
        json.dump(results, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    return results


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _summary_phase_map(spec, cells, out):
    rows, srows = [], []
    for cell, recs in cells:
        L, p, J = cell
        st = var_s_ensemble(recs, L, n_boot=spec.bootstrap)
        rows.append({"L": L, "p": p, "J": J, "mean": st.mean, "variance": st.variance,
                     "stderr": st.stderr, "n_samples": st.n_samples})
        srows += _series_rows(cell, *_mean_err(np.vstack([r.series["S_half"] for r in recs])))
    write_csv(out / "var_s.csv", rows, ["L", "p", "J", "mean", "variance", "stderr", "n_samples"])
    write_csv(out / "entropy_series.csv", srows, SERIES_COLUMNS)
    for L in sorted({r["L"] for r in rows}):
        sub = [r for r in rows if r["L"] == L]
        ps = sorted({r["p"] for r in sub})
        Js = sorted({r["J"] for r in sub})
        if len(ps) > 1 and len(Js) > 1:
            Z = np.full((len(Js), len(ps)), np.nan)
            for r in sub:
                Z[Js.index(r["J"]), ps.index(r["p"])] = r["variance"]
            plotting.plot_heatmap(ps, Js, Z, "p", "J", out / f"var_s_L{L}.png",
                                  f"var(S), L={L}", "var(S)")
        else:
            curves = {}
            for J in Js:
                s = sorted((r for r in sub if r["J"] == J), key=lambda r: r["p"])
                curves[f"J={J:g}"] = ([r["p"] for r in s], [r["variance"] for r in s],
                                      [r["stderr"] for r in s])
            plotting.plot_curves(curves, "p", "var(S)", out / f"var_s_L{L}.png", f"L={L}")
    return {"cells": rows}


def _summary_crossing(spec, cells, out):
    rows, samples = [], {}
    for cell, recs in cells:
        L, p, J = cell
        v = np.array([r.series["S_anc"][2 * L] for r in recs])
        st = ensemble_stat(v)
        rows.append({"L": L, "p": p, "J": J, "t": 2 * L, "mean": st.mean, "stderr": st.stderr,
                     "n_samples": st.n_samples})
        samples[cell] = v
    write_csv(out / "s_anc.csv", rows, ["L", "p", "J", "t", "mean", "stderr", "n_samples"])
    fits, table = {}, {}
    for J in sorted({c[2] for c in samples}):
        curves, smp = {}, {}
        for L in sorted({c[0] for c in samples if c[2] == J}):
            ps = sorted(c[1] for c in samples if c[0] == L and c[2] == J)
            arrs = [samples[(L, p, J)] for p in ps]
            curves[L] = (np.array(ps), np.array([a.mean() for a in arrs]),
                         np.array([max(a.std(ddof=1) / math.sqrt(a.size), 1e-12)
                                   if a.size > 1 else 1e-12 for a in arrs]))
            smp[L] = arrs
        entry = {"crossings": {f"{a}-{b}": x for (a, b), x in crossing_points(curves).items()}}
        plotting.plot_curves({f"L={L}": c for L, c in curves.items()}, "p", "S_anc(t=2L) [bits]",
                             out / f"s_anc_J{J:g}.png", spec.model_label(J))
        if len(curves) >= 3 and all(len(c[0]) >= 3 for c in curves.values()):
            res = collapse_fit_pc_nu(curves, smp, n_boot=spec.bootstrap)
            entry["collapse"] = res.to_dict()
            table[spec.model_label(J)] = _err_half_width(res)
            pc, nu = res.params["p_c"], res.params["nu"]
            plotting.plot_curves({f"L={L}": ((c[0] - pc) * L ** (1 / nu), c[1], c[2])
                                  for L, c in curves.items()},
                                 "(p - p_c) L^(1/nu)", "S_anc", out / f"s_anc_collapse_J{J:g}.png",
                                 f"p_c={pc:.3f} nu={nu:.2f}")
        fits[f"J={J:g}"] = entry
    return {"cells": rows, "fits": fits, "table": table}


def _time_collapse(spec, samples, out, key, ylabel, fit, name, xform):
    """Shared by ancilla-dynamics (z) and mutual-info (eta)."""
    fits, table = {}, {}
    for p, J in sorted({(c[1], c[2]) for c in samples}):
        curves, smp = {}, {}
        for L in sorted(c[0] for c in samples if c[1] == p and c[2] == J):
            m = samples[(L, p, J)]
            mean, err = _mean_err(m)
            t = np.arange(mean.size)
            sel = t >= (1 if name == "z" else 0)
            curves[L] = (t[sel], mean[sel], np.maximum(err[sel], 1e-12))
            smp[L] = m[:, sel]
        tag = f"p={p:g} J={J:g}"
        entry = {}
        if len(curves) >= 2:
            res = fit(curves, smp, n_boot=spec.bootstrap)
            entry["collapse"] = res.to_dict()
            label = spec.model_label(J)
            table[label if len({c[1] for c in samples}) == 1 else f"{label} p={p:g}"] = \
                _err_half_width(res)
            v = res.params[name]
            plotting.plot_curves({f"L={L}": xform(L, v, *c) for L, c in curves.items()},
                                 *_collapse_axes(name), out / f"{key}_collapse_{tag.replace(' ', '_')}.png",
                                 f"{name}={v:.3f}", markers=False)
        plotting.plot_curves({f"L={L}": c for L, c in curves.items()}, "t", ylabel,
                             out / f"{key}_{tag.replace(' ', '_')}.png", tag, markers=False)
        fits[tag] = entry
    return fits, table


def _collapse_axes(name):
    return {"z": ("t / L^z", "S_anc"), "eta": ("(t - t0) / L", "C L^eta")}[name]


def _summary_dynamics(spec, cells, out):
    rows, samples = [], {}
    for cell, recs in cells:
        m = np.vstack([r.series["S_anc"] for r in recs])
        samples[cell] = m
        rows += _series_rows(cell, *_mean_err(m))
    write_csv(out / "s_anc_series.csv", rows, SERIES_COLUMNS)
    fits, table = _time_collapse(spec, samples, out, "s_anc", "S_anc [bits]", collapse_fit_z, "z",
                                 lambda L, z, t, y, e: (t / L**z, y, e))
    return {"fits": fits, "table": table}


def _summary_mutual_info(spec, cells, out):
    rows, samples = [], {}
    for cell, recs in cells:
        m = np.vstack([r.series["C"] for r in recs])
        samples[cell] = m
        rows += _series_rows(cell, *_mean_err(m))
    write_csv(out / "correlator.csv", rows, SERIES_COLUMNS)
    fits, table = _time_collapse(spec, samples, out, "correlator", "C(t - t0)", collapse_fit_eta,
                                 "eta", lambda L, eta, t, y, e: (t / L, y * L**eta, e * L**eta))
    return {"fits": fits, "table": table}


def _free_energy_rows(spec, cells, paired):
    rows, frows, ysamples = [], [], {}
    for cell, recs in cells:
        L, p, J = cell
        ser = FreeEnergySeries.from_records(recs, alpha=spec.alpha)
        win = (spec.warmup_steps(L), ser.F.shape[1] - 1)
        f, fe = free_energy_density(ser, win, n_boot=spec.bootstrap)
        row = {"L": L, "p": p, "J": J, "f": f, "stderr": fe, "n_traj": ser.n_traj,
               "n_discarded": ser.n_discarded}
        frows += _series_rows(cell, *_mean_err(ser.F))
        if paired:
            f1, f1e = generalized_free_energy_density(ser, win, n_boot=spec.bootstrap)
            tau, Y = correlator_samples(ser, spec.warmup_steps(L))
            k = cumulant_rates(Y, tau, L, alpha=spec.alpha, n_boot=spec.bootstrap)
            row.update({"f1": f1, "f1_err": f1e, "k1_over_Lt": k["k1_rate"],
                        "k1_err": k["k1_err"], "k2_over_Lt": k["k2_rate"], "k2_err": k["k2_err"],
                        "flagged": k["flagged"]})
            ysamples[cell] = (tau, Y)
        rows.append(row)
    return rows, frows, ysamples


def _summary_free_energy(spec, cells, out):
    rows, frows, _ = _free_energy_rows(spec, cells, False)
    write_csv(out / "free_energy.csv", rows, ["L", "p", "J", "f", "stderr", "n_traj", "n_discarded"])
    write_csv(out / "F_series.csv", frows, SERIES_COLUMNS)
    return {"cells": rows, **_ceff_fits(spec, rows, out)}


def _ceff_fits(spec, rows, out):
    fits, table = {}, {}
    groups = defaultdict(list)
    for r in rows:
        groups[(float(r["p"]), float(r["J"]))].append((int(r["L"]), float(r["f"]),
                                                       float(r["stderr"])))
    curves = {}
    for (p, J), pts in sorted(groups.items()):
        tag = f"p={p:g} J={J:g}"
        pts.sort()
        curves[tag] = ([1 / L**2 for L, _, _ in pts], [f for _, f, _ in pts], [e for *_, e in pts])
        if len(pts) >= 4:
            res = ceff_double_fit(pts, n_boot=spec.bootstrap)
            fits[tag] = res
            label = spec.model_label(J)
            table[label if len({k[0] for k in groups}) == 1 else f"{label} p={p:g}"] = {
                "c_eff": [res["c_eff"], res["c_eff_err"]]}
    if curves:
        plotting.plot_curves(curves, "1/L^2", "f(L)", out / "free_energy.png")
    return {"fits": fits, "table": table}


def _summary_generalized(spec, cells, out):
    rows, frows, ysamples = _free_energy_rows(spec, cells, True)
    cols = ["L", "p", "J", "f", "stderr", "f1", "f1_err", "k1_over_Lt", "k1_err", "k2_over_Lt",
            "k2_err", "n_traj", "n_discarded", "flagged"]
    write_csv(out / "generalized_free_energy.csv", rows, cols)
    write_csv(out / "F_series.csv", frows, SERIES_COLUMNS)
    fits, table, hrows = {}, {}, []
    for p, J in sorted({(c[1], c[2]) for c in ysamples}):
        tag = f"p={p:g} J={J:g}"
        sub = sorted((r for r in rows if r["p"] == p and r["J"] == J and not r["flagged"]),
                     key=lambda r: r["L"])
        entry = {}
        if len(sub) >= 2:
            Ls = [r["L"] for r in sub]
            x1, x1e = scaling_dimension_fit(Ls, [r["k1_over_Lt"] for r in sub],
                                            [r["k1_err"] for r in sub])
            x2, x2e = scaling_dimension_fit(Ls, [r["k2_over_Lt"] for r in sub],
                                            [r["k2_err"] for r in sub])
            entry.update({"x1_typ": [x1, x1e], "x1_2": [x2, x2e]})
            label = spec.model_label(J)
            table[label if len({c[1] for c in ysamples}) == 1 else f"{label} p={p:g}"] = {
                "x1_typ": [x1, x1e], "x1_2": [x2, x2e]}
            plotting.plot_curves(
                {"k1/Lt": ([1 / L**2 for L in Ls], [r["k1_over_Lt"] for r in sub],
                           [r["k1_err"] for r in sub]),
                 "k2/Lt": ([1 / L**2 for L in Ls], [r["k2_over_Lt"] for r in sub],
                           [r["k2_err"] for r in sub])},
                "1/L^2", "k_i / L t", out / f"cumulants_{tag.replace(' ', '_')}.png", tag)
        s_o, groups = {}, {}
        for L in sorted(c[0] for c in ysamples if c[1] == p and c[2] == J):
            tau, Y = ysamples[(L, p, J)]
            w = spec.warmup_steps(L)
            try:
                cur = multifractal_curve(Y, tau, L, (w, tau[-1]), spec.alpha)
            except InvalidArgument as exc:
                entry.setdefault("histogram_errors", {})[str(L)] = str(exc)
                continue
            s_o[str(L)] = cur.s_o
            groups[f"L={L}"] = (cur.s, cur.H)
            hrows += [{"L": L, "p": p, "J": J, "t": int(t), "s": s, "H": h}
                      for s, h, t in zip(cur.s, cur.H, cur.tau)]
        if groups:
            entry["s_o"] = s_o
            plotting.plot_scatter(groups, "s", "H(s)", out / f"histogram_{tag.replace(' ', '_')}.png",
                                  tag)
        fits[tag] = entry
    write_csv(out / "histogram.csv", hrows, ["L", "p", "J", "t", "s", "H"])
    return {"cells": rows, "fits": fits, "table": table}


# -- analysis-only commands --------------------------------------------------

def _read_rows(path):
    from .storage import read_csv

    rows = read_csv(path)
    if not rows:
        raise InvalidArgument(f"{path}: no rows")
    return rows


def analyze_collapse(spec: ExperimentSpec, out: Path) -> dict:
    """Collapse a series CSV (``L, p, J, t, mean, stderr``)."""
    rows = []
    for path in spec.input:
        try:
            rows += [{k: float(v) for k, v in r.items() if k in SERIES_COLUMNS}
                     for r in _read_rows(path)]
        except (KeyError, ValueError) as exc:
            raise InvalidArgument(f"{path}: not a summary CSV ({exc})") from None
    missing = set(SERIES_COLUMNS) - set(rows[0])
    if missing:
        raise InvalidArgument(f"{spec.input[0]}: missing columns {sorted(missing)}")
    fits, table = {}, {}
    if spec.kind == "pc-nu":
        for J in sorted({r["J"] for r in rows}):
            curves = {}
            for L in sorted({int(r["L"]) for r in rows if r["J"] == J}):
                s = sorted((r for r in rows if r["J"] == J and int(r["L"]) == L
                            and int(r["t"]) == 2 * L), key=lambda r: r["p"])
                curves[L] = tuple(np.array([r[k] for r in s]) for k in ("p", "mean", "stderr"))
            res = collapse_fit_pc_nu({L: (x, y, np.maximum(e, 1e-12))
                                      for L, (x, y, e) in curves.items()}, n_boot=spec.bootstrap)
            fits[f"J={J:g}"] = res.to_dict()
            table[f"{spec.label or 'collapse'} J={J:g}"] = _err_half_width(res)
    else:
        fit = collapse_fit_z if spec.kind == "z" else collapse_fit_eta
        for p, J in sorted({(r["p"], r["J"]) for r in rows}):
            curves = {}
            for L in sorted({int(r["L"]) for r in rows if r["p"] == p and r["J"] == J}):
                s = sorted((r for r in rows if r["p"] == p and r["J"] == J and int(r["L"]) == L
                            and (spec.kind == "eta" or r["t"] >= 1)), key=lambda r: r["t"])
                curves[L] = (np.array([r["t"] for r in s]), np.array([r["mean"] for r in s]),
                             np.maximum(np.array([r["stderr"] for r in s]), 1e-12))
            res = fit(curves, n_boot=spec.bootstrap)
            fits[f"p={p:g} J={J:g}"] = res.to_dict()
            table[f"{spec.label or 'collapse'} p={p:g} J={J:g}"] = _err_half_width(res)
    result = {"command": "collapse", "kind": spec.kind, "fits": fits, "table": table}
    _write_json(out / "collapse.json", result)
    return result


def analyze_ceff(spec: ExperimentSpec, out: Path) -> dict:
    rows = []
    for path in spec.input:
        try:
            rows += [{"L": int(r["L"]), "p": float(r["p"]), "J": float(r["J"]), "f": float(r["f"]),
                      "stderr": float(r["stderr"])} for r in _read_rows(path)]
        except (KeyError, ValueError) as exc:
            raise InvalidArgument(f"{path}: not a free-energy CSV ({exc})") from None
    result = {"command": "ceff-fit", **_ceff_fits(spec, rows, out)}
    _write_json(out / "ceff.json", result)
    return result


def analyze_table(spec: ExperimentSpec, out: Path) -> dict:
    merged = defaultdict(dict)
    for path in spec.input:
        try:
            with open(path) as fh:
                res = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{path}: not a results file ({exc})") from None
        for label, qs in res.get("table", {}).items():
            for q, v in qs.items():
                merged[label][q] = tuple(v)
    rows = results_table(merged)
    write_csv(out / "table1.csv", rows, ["quantity", "model", "value", "err"])
    return {"command": "table1", "rows": rows}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
