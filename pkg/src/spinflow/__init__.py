"""Spinor flow on homogeneous spaces: energies, gradients, flows and analysis."""

from .analysis import LinearizationReport, SolitonReport, diagonal_standard_basis, linearize, soliton_check
from .clifford import SpinorModule, build_spinor_module, clifford_mul, complex_volume, herm, re_herm, spin_lift
from .energy import (
    FlowState,
    energy_3d,
    energy_almost_abelian,
    energy_at,
    energy_bianchi,
    energy_flag,
    energy_flag_restricted,
    energy_general,
)
from .flow import (
    FlowSpec,
    Trajectory,
    integrate,
    reference_solution,
    rhs_almost_abelian,
    rhs_bianchi_diag,
    rhs_flag,
    write_trajectory,
)
from .gradient import GradientValue, horizontal_velocity, q1, q2, q_tilde
from .homspace import (
    HomSpace,
    MetricFrame,
    frame_of,
    invariant_metric_basis,
    invariant_spinor_basis,
    metric_from_coeffs,
    preset_almost_abelian,
    preset_bianchi,
    preset_flag,
)

__version__ = "0.1.0"
