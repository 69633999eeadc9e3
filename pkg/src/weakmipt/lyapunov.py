"""Free energies of the trajectory transfer matrix and the correlator statistics built on them.

``F(t) = -ln p_m(t)`` is the negative log Born probability of the record up
to step ``t``; sampling trajectories already realizes the Born weighting, so
plain trajectory averages estimate the Shannon-entropy form. The paired
evolution supplies ``F1(t) = -ln p'_m(t)`` and the correlator
``Y = F1 - F = -ln C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._stats import boot_rng, bootstrap_mean_std, ols_weights, weighted_line
from .errors import ContinuousOutcomes, InvalidArgument

MIN_WINDOW_POINTS = 10
MIN_CUMULANT_SAMPLES = 100


@dataclass
class FreeEnergySeries:
    """Per-trajectory ``F`` (and optionally ``F1``) matrices for one ``(L, p, model)`` cell.

    Rows are trajectories, columns timesteps ``0..T``. ``F1`` rows are the
    paired-state values of the same (non-discarded) trajectories.
    """

    L: int
    p: float
    model: dict
    F: np.ndarray
    F1: Optional[np.ndarray] = None
    n_discarded: int = 0
    alpha: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_traj(self) -> int:
        return self.F.shape[0]

    @property
    def F_of_t(self) -> np.ndarray:
        return self.F.mean(axis=0)

    @property
    def F1_of_t(self) -> Optional[np.ndarray]:
        return None if self.F1 is None else self.F1.mean(axis=0)

    @classmethod
    def from_records(cls, records, alpha: float = 1.0) -> "FreeEnergySeries":
        if not records:
            raise InvalidArgument("no records")
        kept = [r for r in records if not r.discarded]
        c = records[0].config
        if not kept:
            F = np.zeros((0, c["t_max"] + 1))
        else:
            F = -np.vstack([r.cum_log_born for r in kept])
        F1 = None
        if records[0].protocol == "paired":
            F1 = (-np.vstack([r.series["cum_log_born_paired"] for r in kept]) if kept
                  else np.zeros((0, c["t_max"] + 1)))
        return cls(c["L"], c["p"], c["model"], F, F1, len(records) - len(kept),
                   alpha if alpha is not None else c.get("alpha", 1.0))


def warmup(L: int, kind: str = "") -> int:
    """Steps discarded before fitting: ``5L``, or ``4L`` for the softened projective model."""
    return (4 if kind == "spmm" else 5) * L


def default_window(L: int, kind: str = "") -> tuple:
    return warmup(L, kind), 32 * L


def _window(series: FreeEnergySeries, window) -> np.ndarray:
    lo, hi = default_window(series.L, series.model.get("kind", "")) if window is None else window
    T = series.F.shape[1] - 1
    if lo < 0 or hi > T or hi < lo:
        raise InvalidArgument(f"window [{lo}, {hi}] outside recorded range [0, {T}]")
    if hi - lo + 1 < MIN_WINDOW_POINTS:
        raise InvalidArgument(f"window [{lo}, {hi}] has fewer than {MIN_WINDOW_POINTS} points")
    return np.arange(lo, hi + 1)


def _require_discrete(series: FreeEnergySeries):
    if series.model.get("kind") == "cgpm":
        raise ContinuousOutcomes("free energies need discrete outcomes; use DGPM instead of CGPM")


def trajectory_slopes(M: np.ndarray, t: np.ndarray) -> np.ndarray:
    """OLS slope of each row of ``M[:, t]`` against ``t``."""
    return M[:, t] @ ols_weights(t)


def _density(M, series, window, alpha, n_boot):
    t = _window(series, window)
    if M.shape[0] == 0:
        raise InvalidArgument("no usable trajectories")
    a = series.alpha if alpha is None else alpha
    slopes = trajectory_slopes(M, t) / (a * series.L)
    err = float(bootstrap_mean_std(slopes, n_boot, boot_rng())) if slopes.size > 1 else math.nan
    return float(slopes.mean()), err


def free_energy_density(series: FreeEnergySeries, window=None, alpha=None, n_boot: int = 1000):
    """``f = dF/dt / (alpha L)`` from an OLS fit over ``window`` (default ``[5L, 32L]``, ``[4L, 32L]`` for SPMM).

    The slope is linear in the data, so it is computed per trajectory and the
    error is a bootstrap over trajectories.
    """
    _require_discrete(series)
    return _density(series.F, series, window, alpha, n_boot)


def generalized_free_energy_density(series: FreeEnergySeries, window=None, alpha=None,
                                    n_boot: int = 1000):
    """``f1`` from the paired-state ``F1(t)``, discarded trajectories excluded."""
    _require_discrete(series)
    if series.F1 is None:
        raise InvalidArgument("series carries no paired-state data")
    return _density(series.F1, series, window, alpha, n_boot)


def epsilon_shift(f_eps: float, eps: float, eps_prime: float, p_c: float) -> float:
    """Predicted ``f(eps) - f(eps') = -p_c ln(eps/eps')`` for bin widths well below the pointer width.

    ``f_eps`` is not needed for the difference and is accepted for symmetry
    with callers that shift a measured value.
    """
    if eps <= 0 or eps_prime <= 0:
        raise InvalidArgument("bin widths must be positive")
    return -p_c * math.log(eps / eps_prime)


# -- correlator --------------------------------------------------------------

def correlator_samples(series: FreeEnergySeries, t_w: Optional[int] = None):
    """``Y(tau) = -ln C`` accumulated after the warm-up ``t_w`` (default :func:`warmup`).

    Returns ``(tau, Y)`` with ``Y`` of shape ``(n_traj, T - t_w + 1)``.
    """
    if series.F1 is None:
        raise InvalidArgument("series carries no paired-state data")
    t_w = warmup(series.L, series.model.get("kind", "")) if t_w is None else t_w
    T = series.F.shape[1] - 1
    if not 0 <= t_w < T:
        raise InvalidArgument(f"warm-up {t_w} outside [0, {T})")
    d = series.F1 - series.F
    Y = d[:, t_w:] - d[:, t_w : t_w + 1]
    return np.arange(T - t_w + 1), Y


def _resampled_moments(Y: np.ndarray, n_boot: int, rng):
    """Means and variances of ``Y`` columns over bootstrap resamples of rows."""
    n = Y.shape[0]
    Y2 = Y * Y
    means, variances = [], []
    chunk = max(1, int(4e6 // max(n, 1)))
    for start in range(0, n_boot, chunk):
        m = min(chunk, n_boot - start)
        counts = rng.multinomial(n, np.full(n, 1.0 / n), size=m).astype(float) / n
        mu = counts @ Y
        mu2 = counts @ Y2
        means.append(mu)
        variances.append((mu2 - mu * mu) * n / (n - 1))
    return np.vstack(means), np.vstack(variances)


@dataclass
class CumulantSeries:
    L: int
    tau: np.ndarray
    k1_over_Lt: np.ndarray
    k1_err: np.ndarray
    k2_over_Lt: np.ndarray
    k2_err: np.ndarray
    n_samples: int
    flagged: bool


def cumulants(Y: np.ndarray, tau: np.ndarray, L: int, alpha: float = 1.0,
              n_boot: int = 1000) -> CumulantSeries:
    """``k1 = <Y>``, ``k2 = var Y`` per time, divided by ``alpha L tau`` (``tau > 0`` only).

    Groups with fewer than 100 samples come back flagged; fits must skip them.
    """
    Y = np.asarray(Y, dtype=float)
    tau = np.asarray(tau)
    keep = tau > 0
    Y, tau = Y[:, keep], tau[keep]
    n = Y.shape[0]
    scale = alpha * L * tau
    k1 = Y.mean(axis=0) / scale
    k2 = (Y.var(axis=0, ddof=1) if n > 1 else np.zeros(tau.size)) / scale
    if n > 1:
        bm, bv = _resampled_moments(Y, n_boot, boot_rng())
        e1 = bm.std(axis=0, ddof=1) / scale
        e2 = bv.std(axis=0, ddof=1) / scale
    else:
        e1 = e2 = np.full(tau.size, np.nan)
    return CumulantSeries(L, tau, k1, e1, k2, e2, n, n < MIN_CUMULANT_SAMPLES)


def cumulant_rates(Y: np.ndarray, tau: np.ndarray, L: int, window=None, alpha: float = 1.0,
                   n_boot: int = 1000) -> dict:
    """Growth rates of ``k1`` and ``k2`` per unit ``alpha L t`` from OLS slopes over ``window``.

    ``k1`` rate equals ``f1 - f``. Slopes cancel the O(1) offset picked up
    before the correlator settles, unlike the pointwise ``k / (L t)``.
    """
    Y = np.asarray(Y, dtype=float)
    tau = np.asarray(tau)
    lo, hi = (tau[0], tau[-1]) if window is None else window
    sel = (tau >= lo) & (tau <= hi)
    if sel.sum() < MIN_WINDOW_POINTS:
        raise InvalidArgument(f"window [{lo}, {hi}] has fewer than {MIN_WINDOW_POINTS} points")
    Yw, tw = Y[:, sel], tau[sel]
    n = Yw.shape[0]
    w = ols_weights(tw) / (alpha * L)
    k1 = float(Yw.mean(axis=0) @ w)
    k2 = float(Yw.var(axis=0, ddof=1) @ w) if n > 1 else 0.0
    if n > 1:
        bm, bv = _resampled_moments(Yw, n_boot, boot_rng())
        e1, e2 = float(np.std(bm @ w, ddof=1)), float(np.std(bv @ w, ddof=1))
    else:
        e1 = e2 = math.nan
    return {"L": L, "k1_rate": k1, "k1_err": e1, "k2_rate": k2, "k2_err": e2,
            "n_samples": n, "flagged": n < MIN_CUMULANT_SAMPLES}


def scaling_dimension_fit(Ls, rates, errs, intercept: bool = False):
    """``rate = a + 2 pi x / L^2`` by weighted least squares; returns ``(x, err)``.

    Without ``intercept`` the line goes through the origin, i.e. the gap
    ``f1 - f`` closes in the thermodynamic limit.
    """
    Ls = np.asarray(Ls, float)
    r = np.asarray(rates, float)
    e = np.asarray(errs, float)
    u = 1.0 / Ls**2
    if intercept:
        if Ls.size < 3:
            raise InvalidArgument("an intercept fit needs at least 3 sizes")
        _, b, cov = weighted_line(u, r, e)
        return b / (2 * math.pi), math.sqrt(cov[1, 1]) / (2 * math.pi)
    w = 1.0 / e**2
    b = np.sum(w * u * r) / np.sum(w * u * u)
    err = 1.0 / math.sqrt(np.sum(w * u * u))
    return float(b / (2 * math.pi)), float(err / (2 * math.pi))


# -- multifractal histogram --------------------------------------------------

@dataclass
class MultifractalCurve:
    L: int
    s: np.ndarray
    H: np.ndarray
    tau: np.ndarray
    s_o: float
    b: float
    n_points: int


def _histogram_points(Y: np.ndarray, tau: np.ndarray, L: int, tau_window, alpha: float):
    """Raw ``(s, g, u, weight)`` points; ``H = g - b u`` for the offset ``b``."""
    lo, hi = tau_window
    rows = []
    for k in np.flatnonzero((tau >= lo) & (tau <= hi) & (tau > 0)):
        y = Y[:, k]
        y = y[np.isfinite(y)]
        if y.size < 2 or np.ptp(y) == 0:
            continue
        edges = np.histogram_bin_edges(y, bins="fd")
        counts, edges = np.histogram(y, bins=edges)
        nz = counts > 0  # empty bins are omitted
        width = np.diff(edges)[nz]
        centers = 0.5 * (edges[:-1] + edges[1:])[nz]
        scale = 2 * math.pi * alpha * tau[k] / L
        # density of s = Y/scale; its sqrt(scale) prefactor is the saddle-point normalization
        dens_s = scale * counts[nz] / (y.size * width)
        g = -(np.log(dens_s) - 0.5 * math.log(scale)) / scale
        rel = counts[nz] / counts.max()
        rows.append(np.column_stack([centers / scale, g, np.full(g.size, 1 / scale),
                                     rel, np.full(g.size, tau[k])]))
    if not rows:
        raise InvalidArgument("no usable histogram in the requested window")
    return np.vstack(rows)


def _vertex(s, h, w):
    c2, c1, c0 = np.polyfit(s, h, 2, w=np.sqrt(w))
    if c2 <= 0:
        return None
    return -c1 / (2 * c2), c0 - c1 * c1 / (4 * c2)


def multifractal_curve(Y: np.ndarray, tau: np.ndarray, L: int, tau_window=None,
                       alpha: float = 1.0, core: float = 0.3) -> MultifractalCurve:
    """``H(s)`` for one size from histograms of ``Y(tau)`` over ``tau_window``.

    ``P(s) ~ (2 pi t/L)^(1/2) exp(-(2 pi t/L) H(s) - b)`` with ``s = Y/(2 pi t/L)``,
    where ``P(s)`` is the density of ``s``. Read as a density of ``Y`` the
    prefactor would leave a ``ln(2 pi t/L)/(2 pi t/L)`` drift in ``H`` that no
    constant ``b`` absorbs.
    The minimum ``s_o`` is the vertex of a parabola fitted to the pooled
    points whose bin count is at least ``core`` times the peak count at
    their time, and the constant ``b`` is solved so that ``H(s_o) = 0``.
    Default window: ``tau`` in ``[5L, 27L]``, i.e. absolute times up to
    ``32L`` after a ``5L`` warm-up.
    """
    tau_window = (5 * L, 27 * L) if tau_window is None else tau_window
    pts = _histogram_points(np.asarray(Y, float), np.asarray(tau), L, tau_window, alpha)
    s, g, u, rel, tt = pts.T
    sel = rel >= core
    if sel.sum() < 3:
        raise InvalidArgument("too few histogram points near the minimum")

    def vertex_value(b):
        v = _vertex(s[sel], g[sel] - b * u[sel], rel[sel])
        if v is None:
            raise InvalidArgument("histogram core is not convex; cannot locate the minimum")
        return v[1]

    # vertex value is continuous in b; bracket the root by expansion
    b0 = float(np.min(g[sel] / u[sel]))
    lo, hi = b0 - 1.0, b0 + 1.0
    for _ in range(60):
        if vertex_value(lo) > 0 > vertex_value(hi):
            break
        lo, hi = lo - 2 * (hi - lo), hi + 2 * (hi - lo)
    else:
        raise InvalidArgument("could not bracket the histogram offset b")
    b = brentq(vertex_value, lo, hi, xtol=1e-12)
    s_o = _vertex(s[sel], g[sel] - b * u[sel], rel[sel])[0]
    order = np.lexsort((s, tt))
    return MultifractalCurve(L, s[order], (g - b * u)[order], tt[order], float(s_o), float(b),
                             int(s.size))


def multifractal_histogram(samples: dict, tau_window=None, alpha: float = 1.0) -> dict:
    """``{L: (tau, Y)}`` -> ``{L: MultifractalCurve}``; ``tau_window`` may be a callable of ``L``."""
    out = {}
    for L, (tau, Y) in sorted(samples.items()):
        win = tau_window(L) if callable(tau_window) else tau_window
        out[L] = multifractal_curve(Y, tau, L, win, alpha)
    return out
