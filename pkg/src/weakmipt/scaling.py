"""Finite-size scaling: data collapse for ``(p_c, nu)``, ``z`` and ``eta``, and the ``c_eff`` double fit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from ._stats import boot_rng, weighted_line
from .errors import InvalidArgument

N_NEIGHBORS = 6


@dataclass
class CollapseResult:
    params: dict
    intervals: dict
    quality: float
    sizes: list
    counts: dict = field(default_factory=dict)
    converged: bool = True
    message: str = ""
    n_boot: int = 0

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "intervals": {k: list(v) for k, v in self.intervals.items()},
            "quality": self.quality,
            "sizes": list(self.sizes),
            "counts": {str(k): v for k, v in self.counts.items()},
            "converged": self.converged,
            "message": self.message,
            "n_boot": self.n_boot,
        }


def collapse_quality(xs, ys, errs, k: int = N_NEIGHBORS) -> float:
    """Mean squared normalized residual of each point against its neighbours on other curves.

    For every point, a local quadratic is fitted to the other curves'
    points within a bandwidth equal to the distance of the ``(k+1)``-th
    nearest one, with tricube kernel times inverse-variance weights (LOESS).
    The point contributes ``(y - y_fit)^2 / (err^2 + var(y_fit))``. The
    quadratic term keeps the curvature of the master curve from biasing the
    fit. The kernel makes neighbours enter and leave at zero weight, and a
    point's own weight ramps with the kernel mass on its thinner side, so
    the objective is continuous in the scaling parameters even when scaled
    abscissas of different sizes coincide. Unbracketed points (no kernel
    mass on one side) drop out. Returns ``inf`` when fewer than 3 points
    are usable.
    """
    n_curves = len(xs)
    total = 0.0
    wsum = 0.0
    used = 0
    for i in range(n_curves):
        others = [j for j in range(n_curves) if j != i]
        ox = np.concatenate([xs[j] for j in others])
        if ox.size < 4:
            continue
        oy = np.concatenate([ys[j] for j in others])
        ow = 1.0 / np.maximum(np.concatenate([errs[j] for j in others]), 1e-300) ** 2
        x0 = np.asarray(xs[i], float)
        kk = min(k + 1, ox.size)
        dist = np.abs(x0[:, None] - ox[None, :])
        nn = np.argpartition(dist, kk - 1, axis=1)[:, :kk]
        dx, ny = ox[nn] - x0[:, None], oy[nn]
        h = np.abs(dx).max(1)
        hs = np.where(h > 0, h, 1.0)[:, None]
        kern = np.clip(1 - (np.abs(dx) / hs) ** 3, 0, None) ** 3
        right = np.clip(0.5 + 2 * dx / hs, 0, 1)
        taper = np.clip(np.minimum((kern * right).sum(1), (kern * (1 - right)).sum(1)), 0, 1)
        w = ow[nn] * kern
        A = np.stack([np.ones_like(dx), dx, dx * dx], axis=2)
        M = np.einsum("pki,pk,pkj->pij", A, w, A)
        ok = (h > 0) & (taper > 0) & (np.linalg.det(M) > 0)
        if not ok.any():
            continue
        M[~ok] = np.eye(3)
        Minv = np.linalg.inv(M)
        coef = np.einsum("pij,pkj,pk,pk->pi", Minv, A, w, ny)
        e0 = np.asarray(errs[i], float)
        r = (np.asarray(ys[i], float) - coef[:, 0]) ** 2 / (e0 * e0 + Minv[:, 0, 0])
        total += (taper * r)[ok].sum()
        wsum += taper[ok].sum()
        used += int(ok.sum())
    return total / wsum if used >= 3 else math.inf


def _minimize(objective: Callable, grid: list, restarts: int = 3):
    """Nelder-Mead from the ``restarts`` best points of a coarse grid."""
    scored = sorted(((objective(np.array(g, float)), tuple(g)) for g in grid), key=lambda t: t[0])
    starts = [np.array(g) for q, g in scored[:restarts] if np.isfinite(q)]
    if not starts:
        return None, [], "collapse objective is infinite on the whole start grid"
    runs = [minimize(objective, x0, method="Nelder-Mead",
                     options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 4000}) for x0 in starts]
    best = min(runs, key=lambda r: r.fun)
    return best, runs, ""


def _interval(samples, est):
    if len(samples) < 2:
        return (est, est)
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return (float(min(lo, est)), float(max(hi, est)))


def _collapse(transform, curves: dict, names, grid, samples=None, n_boot: int = 1000,
              seed=None) -> CollapseResult:
    """Shared driver; ``transform(params, L, x, y, e)`` returns scaled ``(x, y, e)``.

    ``samples`` maps ``L`` either to a list (one entry per abscissa point) of
    independent per-trajectory arrays, or to a ``(n_traj, n_points)`` matrix
    whose rows are resampled jointly. Without samples, points are redrawn
    from ``N(mean, stderr)``.
    """
    sizes = sorted(curves)
    if len(sizes) < 2:
        raise InvalidArgument("a collapse needs at least 2 sizes")
    data = {L: tuple(np.asarray(a, float) for a in curves[L]) for L in sizes}

    def objective_for(d):
        def obj(params):
            sc = [transform(params, L, *d[L]) for L in sizes]
            return collapse_quality([s[0] for s in sc], [s[1] for s in sc], [s[2] for s in sc])
        return obj

    best, runs, msg = _minimize(objective_for(data), grid)
    if best is None:
        return CollapseResult({n: math.nan for n in names}, {}, math.inf, sizes,
                              converged=False, message=msg)
    est = best.x
    converged = bool(best.success) and np.isfinite(best.fun)
    rng = boot_rng(seed)
    reps = []
    for _ in range(n_boot):
        d = {}
        for L in sizes:
            x, y, e = data[L]
            if samples is not None and isinstance(samples[L], np.ndarray):
                # one row per trajectory: points along a curve share trajectories
                m = samples[L]
                r = m[rng.integers(0, m.shape[0], m.shape[0])]
                err = r.std(axis=0, ddof=1) / math.sqrt(r.shape[0])
                d[L] = (x, r.mean(axis=0), np.maximum(err, 1e-12))
            elif samples is not None:
                means, errs = [], []
                for arr in samples[L]:
                    arr = np.asarray(arr, float)
                    r = arr[rng.integers(0, arr.size, arr.size)]
                    means.append(r.mean())
                    errs.append(r.std(ddof=1) / math.sqrt(r.size) if r.size > 1 else 0.0)
                d[L] = (x, np.array(means), np.maximum(np.array(errs), 1e-12))
            else:
                d[L] = (x, y + e * rng.standard_normal(y.size), e)
        r = minimize(objective_for(d), est, method="Nelder-Mead",
                     options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000})
        if np.isfinite(r.fun):
            reps.append(r.x)
    reps = np.array(reps).reshape(-1, len(names))
    params = {n: float(v) for n, v in zip(names, est)}
    intervals = {n: _interval(reps[:, i], params[n]) for i, n in enumerate(names)}
    counts = {}
    if samples is not None:
        counts = {L: (samples[L].shape[0] if isinstance(samples[L], np.ndarray)
                      else [len(a) for a in samples[L]]) for L in sizes}
    if not converged:
        msg = f"Nelder-Mead did not converge: {best.message}"
    return CollapseResult(params, intervals, float(best.fun), sizes, counts, converged, msg,
                          n_boot)


def collapse_fit_pc_nu(curves: dict, samples: Optional[dict] = None, n_boot: int = 1000,
                       pc_range=None, nu_range=(0.5, 3.0), seed=None) -> CollapseResult:
    """Collapse ``{L: (p, mean, stderr)}`` on ``(p - p_c) L^(1/nu)``."""
    if len(curves) < 3:
        raise InvalidArgument("need at least 3 sizes")
    allp = np.concatenate([np.asarray(c[0], float) for c in curves.values()])
    lo, hi = pc_range if pc_range is not None else (allp.min(), allp.max())
    grid = [(pc, nu) for pc in np.linspace(lo, hi, 9) for nu in np.linspace(*nu_range, 6)]

    def transform(params, L, x, y, e):
        pc, nu = params
        if nu <= 0.05:
            nu = 0.05
        return (x - pc) * L ** (1.0 / nu), y, e

    return _collapse(transform, curves, ["p_c", "nu"], grid, samples, n_boot, seed)


def collapse_fit_z(curves: dict, samples: Optional[dict] = None, n_boot: int = 1000,
                   z_range=(0.3, 2.0), seed=None) -> CollapseResult:
    """Collapse ``{L: (t, S, stderr)}`` on ``t / L^z``."""
    grid = [(z,) for z in np.linspace(*z_range, 12)]

    def transform(params, L, x, y, e):
        return x / L ** params[0], y, e

    return _collapse(transform, curves, ["z"], grid, samples, n_boot, seed)


def collapse_fit_eta(curves: dict, samples: Optional[dict] = None, n_boot: int = 1000,
                     eta_range=(-0.5, 1.5), seed=None) -> CollapseResult:
    """Collapse ``{L: (t - t0, C, stderr)}`` as ``C L^eta`` against ``(t - t0)/L``."""
    grid = [(eta,) for eta in np.linspace(*eta_range, 12)]

    def transform(params, L, x, y, e):
        s = L ** params[0]
        return x / L, y * s, e * s

    return _collapse(transform, curves, ["eta"], grid, samples, n_boot, seed)


def ceff_from_fit(L, f, err):
    """``c_eff = -6 slope / pi`` from a weighted fit ``f = f_inf + slope / L^2``."""
    _, b, cov = weighted_line(1.0 / np.asarray(L, float) ** 2, f, err)
    return -6.0 * b / math.pi, 6.0 * math.sqrt(cov[1, 1]) / math.pi


def _double_fit(L, f, err, L_mins):
    per = {}
    for lm in L_mins:
        sel = L >= lm
        if sel.sum() < 3:
            continue
        per[int(lm)] = ceff_from_fit(L[sel], f[sel], err[sel])
    if not per:
        raise InvalidArgument("no L_min leaves 3 sizes for the restricted fit")
    values = {k: v[0] for k, v in per.items()}
    if len(per) == 1:
        return next(iter(values.values())), values
    lm = np.array(sorted(per), float)
    c = np.array([per[int(k)][0] for k in lm])
    ce = np.array([per[int(k)][1] for k in lm])
    # c_eff(L_min) = c_inf + b / L_min^2, weighted by each restricted fit's error
    a, _, _ = weighted_line(1.0 / lm**2, c, ce if np.all(ce > 0) else None)
    return float(a), values


def ceff_double_fit(f_by_L, L_mins=None, n_boot: int = 1000, seed=None) -> dict:
    """Double-fitting ``c_eff``: restricted ``1/L^2`` fits per ``L_min``, then extrapolation in ``1/L_min^2``.

    ``f_by_L`` is a list of ``(L, f, stderr)``. Errors come from a parametric
    bootstrap redrawing each ``f`` from ``N(f, stderr)``.
    """
    arr = np.array(sorted(f_by_L), dtype=float)
    if arr.shape[0] < 4:
        raise InvalidArgument("need at least 4 sizes")
    L, f, err = arr.T
    if np.any(err <= 0):
        # exact data: equal weights
        err = np.ones_like(err)
    L_mins = sorted(set(int(x) for x in L)) if L_mins is None else sorted(L_mins)
    c_inf, per = _double_fit(L, f, err, L_mins)
    rng = boot_rng(seed)
    reps, per_reps = [], {k: [] for k in per}
    for _ in range(n_boot):
        fb = f + err * rng.standard_normal(f.size) if np.any(arr[:, 2] > 0) else f
        c, p = _double_fit(L, fb, err, L_mins)
        reps.append(c)
        for k in per:
            per_reps[k].append(p[k])
    return {
        "c_eff": c_inf,
        "c_eff_err": float(np.std(reps, ddof=1)) if n_boot > 1 else math.nan,
        "per_L_min": {k: {"c_eff": v, "err": float(np.std(per_reps[k], ddof=1)) if n_boot > 1
                          else math.nan} for k, v in per.items()},
        "sizes": [int(x) for x in L],
    }


def consistency_x1typ_eta(x1typ: float, x1typ_err: float, eta: float, eta_err: float,
                          threshold: float = 2.0) -> dict:
    """Compare ``x1_typ`` with ``eta / 2`` in units of the combined error."""
    diff = abs(x1typ - eta / 2)
    comb = math.hypot(x1typ_err, eta_err / 2)
    sigma = diff / comb if comb > 0 else (0.0 if diff == 0 else math.inf)
    return {"difference": diff, "combined_err": comb, "sigma": sigma,
            "status": "pass" if sigma <= threshold else "warn"}


TABLE_ROWS = ["p_c", "nu", "z", "eta", "c_eff", "x1_typ", "x1_2"]


def results_table(results: dict) -> list:
    """``{model: {row: (value, err)}}`` -> CSV rows ``quantity, model, value, err``."""
    rows = []
    for q in TABLE_ROWS:
        for model in sorted(results):
            v = results[model].get(q)
            if v is None:
                continue
            val, e = v if isinstance(v, (tuple, list)) else (v, math.nan)
            rows.append({"quantity": q, "model": model, "value": val, "err": e})
    return rows
