"""Monitored hybrid random circuits with weak measurements.

Statevector trajectories of brickwork circuits of (hybrid) dual-unitary
gates interleaved with Gaussian-pointer or softened projective measurements,
plus the analyses built on them: ancilla order parameters, mutual-information
correlators, transfer-matrix free energies and finite-size scaling.
"""
from .circuit import (
    CircuitConfig,
    TrajectoryRecord,
    ancilla_order_parameter_protocol,
    run_ensemble,
    run_paired_trajectory,
    run_trajectory,
    two_ancilla_mutual_info_protocol,
)
from .errors import ContinuousOutcomes, DegeneratePair, InvalidArgument, ZeroProbabilityBranch
from .gates import build_hdu_gate, check_dual_unitary, sample_hdu_parameters
from .lyapunov import (
    FreeEnergySeries,
    cumulant_rates,
    free_energy_density,
    generalized_free_energy_density,
    multifractal_histogram,
)
from .qstate import QuantumState, new_product_state
from .scaling import (
    ceff_double_fit,
    collapse_fit_eta,
    collapse_fit_pc_nu,
    collapse_fit_z,
    consistency_x1typ_eta,
)
from .weakmeas import CGPM, DGPM, SPMM, Projective

__version__ = "0.1.0"
