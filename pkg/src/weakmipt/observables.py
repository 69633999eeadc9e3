"""Ensemble observables over trajectory records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stats import boot_rng, bootstrap_mean_std, bootstrap_std
from .errors import InvalidArgument


@dataclass
class EnsembleStat:
    mean: float
    variance: float
    stderr: float
    n_samples: int


def ensemble_stat(samples) -> EnsembleStat:
    """Mean with the i.i.d. standard error."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    var = float(np.var(x, ddof=1)) if n > 1 else 0.0
    return EnsembleStat(float(np.mean(x)), var, float(np.sqrt(var / n)) if n else np.nan, n)


def series_matrix(records, key: str) -> np.ndarray:
    if key == "cum_log_born":
        rows = [r.cum_log_born for r in records]
    else:
        rows = [r.series[key] for r in records]
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise InvalidArgument(f"series {key!r} has unequal lengths {sorted(lengths)}")
    return np.vstack(rows)


def series_mean(records, key: str):
    """Trajectory average of a time series and its standard error per time."""
    m = series_matrix(records, key)
    n = m.shape[0]
    err = m.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(m.shape[1], np.nan)
    return m.mean(axis=0), err


def var_s_ensemble(records, L: int, window=None, steady_t=None, trajectory: int = 0,
                   n_boot: int = 1000) -> EnsembleStat:
    """Variance of the half-cut entropy from the pooled two-source sample.

    The pool holds (i) ``S(steady_t)`` of every trajectory (default
    ``steady_t = 2L``) and (ii) the time series ``S(t)`` of one trajectory for
    ``t`` in ``window`` (default ``[L/2, 100]``, clipped to the recorded
    range). Both sources enter with their raw sample counts. The standard
    error of the variance is a bootstrap over the pool.
    """
    if not records:
        raise InvalidArgument("no records")
    steady_t = 2 * L if steady_t is None else steady_t
    lo, hi = (L // 2, 100) if window is None else window
    T = len(records[0].series["S_half"]) - 1
    hi = min(hi, T)
    if hi < lo:
        raise InvalidArgument(f"empty time window [{lo}, {hi}]")
    steady = [r.series["S_half"][min(steady_t, T)] for r in records]
    within = list(records[trajectory].series["S_half"][lo : hi + 1])
    pool = np.asarray(steady + within, dtype=float)
    var = float(np.var(pool, ddof=1)) if pool.size > 1 else 0.0
    err = float(bootstrap_std(pool, lambda a: np.var(a, ddof=1), n_boot)) if pool.size > 1 else 0.0
    return EnsembleStat(float(pool.mean()), var, err, pool.size)


def order_parameter_curves(groups: dict, t_of_L=lambda L: 2 * L) -> dict:
    """``{(L, p): records}`` -> ``{(L, p): EnsembleStat}`` of ``S_anc`` at ``t = 2L``."""
    out = {}
    for (L, p), recs in groups.items():
        if not recs:
            raise InvalidArgument(f"empty group L={L} p={p}")
        t = t_of_L(L)
        out[(L, p)] = ensemble_stat([r.series["S_anc"][t] for r in recs])
    return out


def curves_by_size(stats: dict) -> dict:
    """Reshape ``{(L, p): EnsembleStat}`` into ``{L: (p, mean, stderr)}`` sorted by p."""
    out = {}
    for L in sorted({k[0] for k in stats}):
        ps = sorted(p for (l, p) in stats if l == L)
        out[L] = (
            np.array(ps),
            np.array([stats[(L, p)].mean for p in ps]),
            np.array([stats[(L, p)].stderr for p in ps]),
        )
    return out


def mutual_info_correlator(groups: dict) -> dict:
    """``{L: records}`` -> ``{L: (tau, mean C, stderr)}`` with ``tau = t - t0``."""
    out = {}
    for L, recs in groups.items():
        mean, err = series_mean(recs, "C")
        out[L] = (np.arange(mean.size), mean, err)
    return out


def crossing_points(curves: dict) -> dict:
    """Pairwise crossings of ``{L: (x, y, err)}`` curves by linear interpolation.

    Returns ``{(L1, L2): [x_cross, ...]}`` over the common x grid.
    """
    sizes = sorted(curves)
    out = {}
    for a in range(len(sizes)):
        for b in range(a + 1, len(sizes)):
            xa, ya, _ = curves[sizes[a]]
            xb, yb, _ = curves[sizes[b]]
            grid = np.intersect1d(xa, xb)
            d = np.interp(grid, xa, ya) - np.interp(grid, xb, yb)
            xs = []
            for k in range(len(grid) - 1):
                if d[k] == 0:
                    xs.append(float(grid[k]))
                elif d[k] * d[k + 1] < 0:
                    xs.append(float(grid[k] - d[k] * (grid[k + 1] - grid[k]) / (d[k + 1] - d[k])))
            out[(sizes[a], sizes[b])] = xs
    return out


def bootstrap_series_stderr(records, key, n_boot=1000):
    return bootstrap_mean_std(series_matrix(records, key), n_boot, boot_rng())
