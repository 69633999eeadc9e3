"""Weak and projective sigma_z measurements on a single qubit of a statevector.

Four measurement models are supported:

* :class:`Projective` -- Born-rule projection onto sigma_z eigenstates.
* :class:`CGPM` -- continuous Gaussian pointer: the pointer, shifted by
  ``+lam`` or ``-lam`` depending on the spin, is read out at a continuous
  position ``x_o``.
* :class:`DGPM` -- the same pointer read out in bins of width ``epsilon``
  centred at ``i * epsilon``; outcomes are discrete with finite probability.
* :class:`SPMM` -- two-outcome softened projectors
  ``(1 +- Lambda sigma_z) / sqrt(2 (1 + Lambda^2))``.

The pointer position density is the normalized Gaussian
``exp(-x^2/delta^2) / (delta sqrt(pi))`` (standard deviation ``delta/sqrt 2``),
so only ``lam/delta`` is physical.

Every measurement consumes one uniform from the generator to pick the spin
branch; the pointer models draw one extra standard normal for the position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import erf, erfc

from .errors import InvalidArgument, ZeroProbabilityBranch
from .qstate import ZERO_PROB, QuantumState, apply_diagonal_kraus, prob_up

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class Projective:
    kind = "projective"
    discrete = True

    @property
    def strength(self) -> float:
        return math.inf

    def measure(self, state, site, rng):
        return projective_measure(state, site, rng)[0]

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class CGPM:
    lam: float = 1.0
    delta: float = 1.0

    kind = "cgpm"
    # log_born holds a log *density*; unusable for free energies
    discrete = False

    def __post_init__(self):
        if self.delta <= 0 or self.lam < 0:
            raise InvalidArgument("CGPM needs delta > 0 and lam >= 0")

    @property
    def strength(self) -> float:
        return self.lam / self.delta

    def measure(self, state, site, rng):
        x = cgpm_sample(state, site, self, rng)
        return cgpm_apply(state, site, self, x)

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam, "delta": self.delta}


@dataclass(frozen=True)
class DGPM:
    lam: float = 1.0
    delta: float = 1.0
    epsilon: float = 1e-5

    kind = "dgpm"
    discrete = True

    def __post_init__(self):
        if self.delta <= 0 or self.lam < 0 or self.epsilon <= 0:
            raise InvalidArgument("DGPM needs delta > 0, lam >= 0, epsilon > 0")

    @property
    def strength(self) -> float:
        return self.lam / self.delta

    @classmethod
    def figure_preset(cls) -> "DGPM":
        """epsilon = 0.1 with lam = delta = 1e4."""
        return cls(lam=1e4, delta=1e4, epsilon=0.1)

    def measure(self, state, site, rng):
        return dgpm_measure(state, site, self, rng)[0]

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam, "delta": self.delta, "epsilon": self.epsilon}


@dataclass(frozen=True)
class SPMM:
    capital_lambda: float = 0.45

    kind = "spmm"
    discrete = True

    def __post_init__(self):
        if not 0.0 <= self.capital_lambda <= 1.0:
            raise InvalidArgument("SPMM softening must lie in [0, 1]")

    @property
    def strength(self) -> float:
        return self.capital_lambda

    def measure(self, state, site, rng):
        return spmm_measure(state, site, self, rng)[0]

    def to_dict(self):
        return {"kind": self.kind, "capital_lambda": self.capital_lambda}


MeasurementModel = Union[Projective, CGPM, DGPM, SPMM]


def model_from_dict(d: dict) -> MeasurementModel:
    d = dict(d)
    kind = d.pop("kind")
    cls = {"projective": Projective, "cgpm": CGPM, "dgpm": DGPM, "spmm": SPMM}.get(kind)
    if cls is None:
        raise InvalidArgument(f"unknown measurement model {kind!r}")
    return cls(**d)


@dataclass
class MeasurementOutcome:
    """Result of one measurement event.

    ``value`` is +1/-1 for spin outcomes, the pointer position for CGPM and
    the bin index for DGPM. ``weights`` are the diagonal entries
    ``(w_up, w_down)`` of the unnormalized Kraus operator that was applied.
    """

    kind: str
    value: float
    log_born: float
    weights: tuple

    @property
    def x_o(self) -> float:
        return self.value


# -- Gaussian pointer -------------------------------------------------------


def gaussian_sq(x, delta: float):
    """Normalized pointer density ``exp(-x^2/delta^2) / (delta sqrt(pi))``."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-((x / delta) ** 2)) / (delta * SQRT_PI)
    return float(out) if out.ndim == 0 else out


def _log_gaussian_sq(x: float, delta: float) -> float:
    return -((x / delta) ** 2) - math.log(delta * SQRT_PI)


def cgpm_density(x, p_up: float, model) -> np.ndarray:
    """Outcome density ``<Pi+> G^2(x - lam) + <Pi-> G^2(x + lam)``."""
    return p_up * gaussian_sq(x - model.lam, model.delta) + (1.0 - p_up) * gaussian_sq(
        x + model.lam, model.delta
    )


def cgpm_sample(state: QuantumState, site: int, model, rng) -> float:
    """Pointer readout: pick the spin branch by ``<Pi+->`` then a Gaussian around ``+-lam``."""
    p_up = prob_up(state, site)
    center = model.lam if rng.random() < p_up else -model.lam
    return center + model.delta / math.sqrt(2.0) * rng.standard_normal()


def cgpm_apply(state: QuantumState, site: int, model, x_o: float) -> MeasurementOutcome:
    """Apply ``G(x_o - lam) Pi+ + G(x_o + lam) Pi-`` and renormalize.

    ``log_born`` of the returned outcome is the log of the outcome density.
    """
    if not math.isfinite(x_o):
        raise InvalidArgument("pointer position must be finite")
    p_up = prob_up(state, site)
    la = 0.5 * _log_gaussian_sq(x_o - model.lam, model.delta)
    lb = 0.5 * _log_gaussian_sq(x_o + model.lam, model.delta)
    terms = []
    if p_up > 0:
        terms.append(math.log(p_up) + 2 * la)
    if p_up < 1:
        terms.append(math.log1p(-p_up) + 2 * lb)
    log_density = float(np.logaddexp.reduce(terms)) if terms else -math.inf
    if not math.isfinite(log_density):
        raise ZeroProbabilityBranch("both pointer branches underflow")
    half = 0.5 * log_density
    w_up = math.exp(la - half)
    w_dn = math.exp(lb - half)
    nrm = apply_diagonal_kraus(state, site, w_up, w_dn)
    if abs(nrm - 1.0) > 1e-6:
        # rescaled weights should already give a unit norm
        raise ZeroProbabilityBranch(f"pointer update lost norm ({nrm:g})")
    return MeasurementOutcome("cgpm", x_o, log_density, (math.exp(la), math.exp(lb)))


def _erf_interval(a: float, b: float) -> float:
    """``erf(b) - erf(a)`` for ``a <= b`` without tail cancellation."""
    if a >= 0.0:
        return float(erfc(a) - erfc(b))
    if b <= 0.0:
        return float(erfc(-b) - erfc(-a))
    return float(erf(b) - erf(a))


def dgpm_bin_probabilities(x_o: float, model) -> tuple:
    """Exact mass of ``G^2(x -+ lam)`` over the bin ``[x_o - eps/2, x_o + eps/2]``."""
    h = model.epsilon / 2.0
    d = model.delta
    p_plus = 0.5 * _erf_interval((x_o - model.lam - h) / d, (x_o - model.lam + h) / d)
    p_minus = 0.5 * _erf_interval((x_o + model.lam - h) / d, (x_o + model.lam + h) / d)
    return p_plus, p_minus


def dgpm_measure(state: QuantumState, site: int, model: DGPM, rng):
    """Sample a pointer bin, apply ``(sqrt p+ Pi+ + sqrt p- Pi-)/sqrt p``.

    Returns ``(outcome, log_born, state)``. The bin is the bin containing a
    continuous CGPM sample, which reproduces the bin distribution exactly.
    """
    x = cgpm_sample(state, site, model, rng)
    i = int(round(x / model.epsilon))
    x_o = i * model.epsilon
    p_plus, p_minus = dgpm_bin_probabilities(x_o, model)
    p_up = prob_up(state, site)
    p = p_up * p_plus + (1.0 - p_up) * p_minus
    if p < ZERO_PROB:
        raise ZeroProbabilityBranch(f"sampled DGPM bin {i} has probability {p:g}")
    w = (math.sqrt(p_plus), math.sqrt(p_minus))
    apply_diagonal_kraus(state, site, w[0], w[1])
    lb = math.log(p)
    return MeasurementOutcome("dgpm", i, lb, w), lb, state


# -- two-outcome models -----------------------------------------------------


def spmm_probs(state: QuantumState, site: int, model: SPMM) -> tuple:
    lam = model.capital_lambda
    z = 2.0 * prob_up(state, site) - 1.0
    den = 2.0 * (1.0 + lam * lam)
    p_plus = (1.0 + lam * lam + 2.0 * lam * z) / den
    return p_plus, 1.0 - p_plus


def spmm_kraus_weights(model: SPMM, sign: int) -> tuple:
    lam = model.capital_lambda
    c = 1.0 / math.sqrt(2.0 * (1.0 + lam * lam))
    return (1.0 + sign * lam) * c, (1.0 - sign * lam) * c


def spmm_measure(state: QuantumState, site: int, model: SPMM, rng):
    p_plus, p_minus = spmm_probs(state, site, model)
    sign = 1 if rng.random() < p_plus else -1
    p = p_plus if sign > 0 else p_minus
    if p < ZERO_PROB:
        raise ZeroProbabilityBranch("sampled an SPMM branch with zero probability")
    w = spmm_kraus_weights(model, sign)
    apply_diagonal_kraus(state, site, *w)
    lb = math.log(p)
    return MeasurementOutcome("spin", sign, lb, w), lb, state


def projective_measure(state: QuantumState, site: int, rng):
    p_up = prob_up(state, site)
    if rng.random() < p_up:
        sign, p, w = 1, p_up, (1.0, 0.0)
    else:
        sign, p, w = -1, 1.0 - p_up, (0.0, 1.0)
    if p < ZERO_PROB:
        raise ZeroProbabilityBranch("sampled a projective branch with zero probability")
    apply_diagonal_kraus(state, site, *w)
    lb = math.log(p)
    return MeasurementOutcome("spin", sign, lb, w), lb, state


def outcome_distribution(p_up: float, model, bins=None) -> np.ndarray:
    """Born probabilities of every discrete outcome for a qubit with ``<Pi+> = p_up``.

    For DGPM, ``bins`` are the bin indices to enumerate; by default all bins
    within ``10 delta`` beyond both peaks.
    """
    if isinstance(model, Projective):
        return np.array([p_up, 1.0 - p_up])
    if isinstance(model, SPMM):
        lam = model.capital_lambda
        z = 2.0 * p_up - 1.0
        pp = (1.0 + lam * lam + 2.0 * lam * z) / (2.0 * (1.0 + lam * lam))
        return np.array([pp, 1.0 - pp])
    if isinstance(model, DGPM):
        if bins is None:
            reach = model.lam + 10.0 * model.delta
            n = int(math.ceil(reach / model.epsilon))
            bins = np.arange(-n, n + 1)
        x = np.asarray(bins) * model.epsilon
        h = model.epsilon / 2.0
        d = model.delta
        # vectorized erf differences; central-difference form is accurate for the
        # bin widths used in completeness checks
        pp = 0.5 * (erf((x - model.lam + h) / d) - erf((x - model.lam - h) / d))
        pm = 0.5 * (erf((x + model.lam + h) / d) - erf((x + model.lam - h) / d))
        return p_up * pp + (1.0 - p_up) * pm
    raise InvalidArgument("continuous models have a density, not a distribution")
