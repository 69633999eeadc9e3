"""Brickwork monitored circuits: scheduling, trajectories and ancilla protocols.

Randomness
----------
Each trajectory owns a counter-based :class:`numpy.random.Philox` stream
seeded by a 64-bit value derived from ``(master_seed, trajectory_index)``.
Within a timestep the draws happen in this fixed order:

1. gate parameters: whenever a layer needs gates and the buffer is empty,
   the gates of the next ``GATE_BLOCK`` layers are drawn in one call to
   ``GateSource.layer``;
2. ``L`` uniforms, one measurement coin per system site (monitored steps only);
3. for every measured site, in increasing site order, the draws of the
   measurement model (one uniform, plus one normal for pointer models).

The initial product state is drawn before the first timestep, and the
two-ancilla entangling step draws one uniform per entangled site.

Clock
-----
Series are indexed by the number of completed timesteps: entry ``t`` is the
value after the measurement layer of timestep ``t``; entry 0 is the initial
(or post-encoding) value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .errors import DegeneratePair, InvalidArgument
from .gates import GateSource, gate_source
from .qstate import (
    QuantumState,
    apply_two_qubit_gate,
    entropy_of_subset,
    haar_random_state,
    new_product_state,
    random_qubit_state,
)
from .weakmeas import MeasurementModel, Projective, model_from_dict, projective_measure

DEGENERATE_NORM = 1e-150
GS_CANCELLATION = 1e-20
GATE_BLOCK = 32

H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
I2 = np.eye(2, dtype=np.complex128)
# control = first qubit of the pair, target = second
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
BELL_PREP = CNOT @ np.kron(H, I2)


@dataclass
class CircuitConfig:
    L: int
    p: float
    model: MeasurementModel = field(default_factory=Projective)
    gate_set: str = "HDU"
    t_max: int = 0
    encoding_time: Optional[int] = None
    master_seed: int = 0
    alpha: float = 1.0
    initial_state: str = "product"
    boundary: str = "periodic"

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise InvalidArgument(f"L must be even and >= 2, got {self.L}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidArgument(f"p must lie in [0, 1], got {self.p}")
        if self.t_max <= 0:
            self.t_max = 2 * self.L
        if self.boundary != "periodic":
            raise InvalidArgument("only periodic boundaries are supported")
        if self.initial_state not in ("product", "haar"):
            raise InvalidArgument(f"unknown initial state {self.initial_state!r}")
        if isinstance(self.model, dict):
            self.model = model_from_dict(self.model)

    def describe(self) -> dict:
        return {
            "L": self.L,
            "p": self.p,
            "model": self.model.to_dict(),
            "gate_set": self.gate_set,
            "t_max": self.t_max,
            "encoding_time": self.encoding_time,
            "alpha": self.alpha,
            "initial_state": self.initial_state,
        }


@dataclass
class TrajectoryRecord:
    """Per-trajectory log; series are numpy arrays indexed by timestep."""

    seed: int
    index: int
    protocol: str
    config: dict
    cum_log_born: np.ndarray
    series: dict = field(default_factory=dict)
    n_measurements: int = 0
    discarded: bool = False


def trajectory_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(trajectory_seed(master_seed, index)))


def bonds(L: int, t: int) -> np.ndarray:
    """Bricklayer bonds for step parity ``t``; odd layers wrap periodically."""
    if t % 2 == 0:
        pairs = [(2 * i, 2 * i + 1) for i in range(L // 2)]
    else:
        pairs = [(2 * i + 1, (2 * i + 2) % L) for i in range(L // 2)]
    return np.array(pairs, dtype=np.int64)


_BOND_CACHE: dict = {}


def _bonds(L, t):
    key = (L, t % 2)
    b = _BOND_CACHE.get(key)
    if b is None:
        b = _BOND_CACHE[key] = bonds(L, t)
    return b


def brickwork_layer(state: QuantumState, t: int, source: GateSource, L: int, rng) -> QuantumState:
    """One layer of freshly drawn gates on the system sites ``0..L-1``."""
    pairs = _bonds(L, t)
    gates = np.ascontiguousarray(source.layer(rng, len(pairs)))
    K.apply_layer(state.amplitudes, gates, pairs)
    return state


def measurement_layer(state: QuantumState, L: int, p: float, model, rng, on_event=None):
    """Measure each system site with probability ``p``.

    Returns ``(state, events, log_born_sum)`` where ``events`` is a list of
    ``(site, MeasurementOutcome)``. ``on_event(site, outcome)`` is called
    right after each event, before the next site is measured.
    """
    coins = rng.random(L)
    events = []
    total = 0.0
    for site in np.flatnonzero(coins < p):
        site = int(site)
        out = model.measure(state, site, rng)
        events.append((site, out))
        total += out.log_born
        if on_event is not None:
            on_event(site, out)
    return state, events, total


def initial_system_state(config: CircuitConfig, rng) -> QuantumState:
    if config.initial_state == "haar":
        return haar_random_state(config.L, rng)
    return new_product_state(config.L, "haar-random-product", rng)


class Trajectory:
    """Mutable evolution of one trajectory: state, generator and running Born log."""

    def __init__(self, config: CircuitConfig, index: int = 0, state: QuantumState = None,
                 source: GateSource = None):
        self.config = config
        self.index = index
        self.seed = trajectory_seed(config.master_seed, index)
        self.rng = np.random.Generator(np.random.Philox(self.seed))
        self.source = source if source is not None else gate_source(config.gate_set)
        self.state = state if state is not None else initial_system_state(config, self.rng)
        self.step_count = 0
        self.log_born = 0.0
        self.n_measurements = 0
        self._gates = None
        self._gate_pos = GATE_BLOCK

    def next_gates(self) -> np.ndarray:
        if self._gate_pos == GATE_BLOCK:
            nb = self.config.L // 2
            block = self.source.layer(self.rng, GATE_BLOCK * nb)
            self._gates = np.ascontiguousarray(block).reshape(GATE_BLOCK, nb, 4, 4)
            self._gate_pos = 0
        g = self._gates[self._gate_pos]
        self._gate_pos += 1
        return g

    def gate_layer(self, *states):
        pairs = _bonds(self.config.L, self.step_count)
        gates = self.next_gates()
        for st in states:
            K.apply_layer(st.amplitudes, gates, pairs)

    def unitary_step(self):
        self.gate_layer(self.state)
        self.step_count += 1

    def step(self, on_event=None):
        c = self.config
        self.gate_layer(self.state)
        _, events, total = measurement_layer(self.state, c.L, c.p, c.model, self.rng, on_event)
        self.log_born += total
        self.n_measurements += len(events)
        self.step_count += 1
        return events


def half_cut(L: int) -> list:
    return list(range(L // 2))


def run_trajectory(config: CircuitConfig, index: int = 0, record_entropy: bool = True,
                   source: GateSource = None, state: QuantumState = None) -> TrajectoryRecord:
    """Monitored evolution for ``t_max`` steps from the configured initial state.

    Records the cumulative log Born probability and, optionally, the half-cut
    von Neumann entropy (natural log) after every step.
    """
    tr = Trajectory(config, index, state=state, source=source)
    T = config.t_max
    cum = np.zeros(T + 1)
    ent = np.zeros(T + 1) if record_entropy else None
    cut = half_cut(config.L)
    if record_entropy:
        ent[0] = entropy_of_subset(tr.state, cut)
    for t in range(1, T + 1):
        tr.step()
        cum[t] = tr.log_born
        if record_entropy:
            ent[t] = entropy_of_subset(tr.state, cut)
    series = {"S_half": ent} if record_entropy else {}
    return TrajectoryRecord(tr.seed, index, "trajectory", config.describe(), cum, series,
                            tr.n_measurements)


def orthogonal_partner(config: CircuitConfig, rng):
    """Two orthonormal initial states for the paired evolution.

    Product start: the second state flips the single-qubit factor on site 0 to
    its orthogonal complement. Haar start: Gram-Schmidt of two Haar vectors.
    """
    L = config.L
    if config.initial_state == "haar":
        a = haar_random_state(L, rng)
        b = haar_random_state(L, rng)
        v = b.amplitudes - np.vdot(a.amplitudes, b.amplitudes) * a.amplitudes
        b.amplitudes = v / np.linalg.norm(v)
        return a, b
    kets = [random_qubit_state(rng) for _ in range(L)]
    flipped = list(kets)
    k0 = kets[0]
    flipped[0] = np.array([-np.conj(k0[1]), np.conj(k0[0])])
    return new_product_state(L, kets), new_product_state(L, flipped)


def paired_state_step(tr: Trajectory, psi2: QuantumState) -> float:
    """Advance ``tr.state`` (psi1) and ``psi2`` by one timestep with shared Kraus operators.

    Outcomes are sampled from psi1; psi2 receives the same unnormalized Kraus
    operators, is Gram-Schmidt orthogonalized against psi1 and renormalized.
    Returns ``ln ||P_GS K psi2||^2``.
    """
    c = tr.config
    tr.gate_layer(tr.state, psi2)
    amps2 = psi2.amplitudes

    def follow(site, out):
        K.scale_diag(amps2, site, out.weights[0], out.weights[1])

    _, events, total = measurement_layer(tr.state, c.L, c.p, c.model, tr.rng, follow)
    tr.log_born += total
    tr.n_measurements += len(events)
    tr.step_count += 1
    a1 = tr.state.amplitudes
    before = K.norm_sq(amps2)
    amps2 -= np.vdot(a1, amps2) * a1
    n2 = K.norm_sq(amps2)
    # exact annihilation by the projection leaves round-off of relative size ~1e-32
    if not (n2 > DEGENERATE_NORM and n2 > GS_CANCELLATION * before):
        raise DegeneratePair(f"second state annihilated (norm^2={n2:g}) at step {tr.step_count}")
    K.rescale(amps2, 1.0 / math.sqrt(n2))
    return math.log(n2)


def run_paired_trajectory(config: CircuitConfig, index: int = 0,
                          source: GateSource = None, states=None) -> TrajectoryRecord:
    """Paired-state evolution recording ``ln p_m(t)`` and ``ln p'_m(t)``.

    A trajectory whose second state is annihilated is returned with
    ``discarded=True`` and truncated series.
    """
    tr = Trajectory(config, index, state=QuantumState(1, np.array([1, 0])), source=source)
    psi1, psi2 = states if states is not None else orthogonal_partner(config, tr.rng)
    tr.state = psi1
    T = config.t_max
    cum = np.zeros(T + 1)
    cum2 = np.zeros(T + 1)
    lp2 = 0.0
    for t in range(1, T + 1):
        try:
            lp2 += paired_state_step(tr, psi2)
        except DegeneratePair:
            return TrajectoryRecord(tr.seed, index, "paired", config.describe(), cum[:t],
                                    {"cum_log_born_paired": cum2[:t]}, tr.n_measurements,
                                    discarded=True)
        cum[t] = tr.log_born
        cum2[t] = lp2
    return TrajectoryRecord(tr.seed, index, "paired", config.describe(), cum,
                            {"cum_log_born_paired": cum2}, tr.n_measurements)


def ancilla_order_parameter_protocol(config: CircuitConfig, index: int = 0, site: int = 0,
                                     source: GateSource = None,
                                     record_half: bool = False) -> TrajectoryRecord:
    """Ancilla purification probe; series ``S_anc`` in bits.

    Site ``site`` and one ancilla start in a Bell pair, every other site in a
    random single-qubit state. ``encoding_time`` (default ``2L``) unitary-only
    layers scramble the ancilla, the clock is reset, and monitored dynamics
    runs for ``t_max`` steps. ``record_half`` adds ``S_half``, the entropy
    (natural log) of system sites ``0..L/2-1``.
    """
    L = config.L
    tr = Trajectory(config, index, state=QuantumState(1, np.array([1, 0])), source=source)
    kets = [random_qubit_state(tr.rng) for _ in range(L)]
    kets[site] = np.array([1, 0])
    state = new_product_state(L + 1, kets + [np.array([1, 0])])
    state.labels[L] = ("ancilla", 0)
    apply_two_qubit_gate(state, BELL_PREP, site, L)
    tr.state = state
    t0 = config.encoding_time if config.encoding_time is not None else 2 * L
    for _ in range(t0):
        tr.unitary_step()
    T = config.t_max
    s_anc = np.zeros(T + 1)
    cum = np.zeros(T + 1)
    series = {"S_anc": s_anc}
    cut = half_cut(L)
    if record_half:
        series["S_half"] = np.zeros(T + 1)
        series["S_half"][0] = entropy_of_subset(state, cut)
    s_anc[0] = entropy_of_subset(state, [L], 2)
    for t in range(1, T + 1):
        tr.step()
        cum[t] = tr.log_born
        s_anc[t] = entropy_of_subset(state, [L], 2)
        if record_half:
            series["S_half"][t] = entropy_of_subset(state, cut)
    return TrajectoryRecord(tr.seed, index, "ancilla", config.describe(), cum,
                            series, tr.n_measurements)


def entangle_with_ancilla(state: QuantumState, site: int, ancilla: int, rng) -> int:
    """Measure ``site`` in sigma_z, then map ``|o>_site |0>_anc`` to a Bell pair.

    Returns the measured bit.
    """
    out, _, _ = projective_measure(state, site, rng)
    bit = 0 if out.value > 0 else 1
    gate = BELL_PREP @ np.kron(np.linalg.matrix_power(X, bit), I2)
    apply_two_qubit_gate(state, gate, site, ancilla)
    return bit


def mutual_information(state: QuantumState, a: int, b: int) -> float:
    sa = entropy_of_subset(state, [a])
    sb = entropy_of_subset(state, [b])
    sab = entropy_of_subset(state, [a, b])
    return sa + sb - sab


def two_ancilla_mutual_info_protocol(config: CircuitConfig, index: int = 0,
                                     wait_time: Optional[int] = None,
                                     sites: Optional[tuple] = None,
                                     source: GateSource = None) -> TrajectoryRecord:
    """Two-ancilla correlator ``C(t - t0)`` (natural log).

    Monitored dynamics runs for ``wait_time`` (default ``20L``) steps from a
    random product state; two ancillas are then entangled with antipodal
    sites (default ``0`` and ``L/2``) and dynamics continues for ``t_max``
    steps. Ancillas are only allocated at the entangling time.
    """
    L = config.L
    tr = Trajectory(config, index, source=source)
    t0 = wait_time if wait_time is not None else 20 * L
    for _ in range(t0):
        tr.step()
    r1, r2 = sites if sites is not None else (0, L // 2)
    a, b = tr.state.add_ancillas(["A", "B"])
    entangle_with_ancilla(tr.state, r1, a, tr.rng)
    entangle_with_ancilla(tr.state, r2, b, tr.rng)
    T = config.t_max
    c = np.zeros(T + 1)
    cum = np.full(T + 1, tr.log_born)
    c[0] = mutual_information(tr.state, a, b)
    for t in range(1, T + 1):
        tr.step()
        cum[t] = tr.log_born
        c[t] = mutual_information(tr.state, a, b)
    return TrajectoryRecord(tr.seed, index, "mutual_info", config.describe(),
                            cum, {"C": c}, tr.n_measurements)


PROTOCOLS: dict = {
    "trajectory": run_trajectory,
    "paired": run_paired_trajectory,
    "ancilla": ancilla_order_parameter_protocol,
    "mutual_info": two_ancilla_mutual_info_protocol,
}


def _run_one(args):
    protocol, config, index, kwargs = args
    return PROTOCOLS[protocol](config, index, **kwargs)


def run_ensemble(protocol: str, config: CircuitConfig, indices, workers: int = 1,
                 **kwargs) -> list:
    """Run ``protocol`` for each trajectory index; result order follows ``indices``.

    Records depend only on ``(config, index)``, so the output is identical for
    any ``workers``.
    """
    tasks = [(protocol, config, int(i), kwargs) for i in indices]
    if workers <= 1:
        return [_run_one(t) for t in tasks]
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(workers) as pool:
        return list(pool.imap(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
