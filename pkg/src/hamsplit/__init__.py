"""Splitting integrators for Hamiltonian PDEs with spectral rounding.

The package separates a Hamiltonian evolution into its exactly solvable
linear part and a nonlinear remainder, composes the two flows (Lie or
Strang), and optionally rounds small spectral coefficients to zero after
every step. Companion tools quantify how step sizes interact with the
frequency table: zero-moment multi-index enumeration, small-divisor
minimization and scans, and a homological-equation solver for normal-form
coordinates.
"""

from .errors import ConfigError, IntegrationError, ResonanceError
from .lattice import FULL, HALF, ModeLattice, mode_weight
from .state import (
    DiagnosticsSample,
    SpectralState,
    actions,
    head_tail,
    load_state_binary,
    load_state_csv,
    project,
    save_state_binary,
    save_state_csv,
    sobolev_norm,
    weighted_action_distance,
)
from .models import (
    NLS,
    WAVE,
    FilterKind,
    NlsNonlinearity,
    PdeModel,
    WaveNonlinearity,
    load_model_json,
    mollifier_apply,
    mollifier_factors,
    nls_from_grid,
    nls_model,
    nls_to_grid,
    nonlinear_energy,
    nonlinear_gradient,
    save_model_json,
    wave_decode,
    wave_encode,
    wave_from_grid,
    wave_grid_points,
    wave_model,
    wave_to_grid,
)
from .integrators import (
    LIE,
    STRANG,
    EvolutionConfig,
    SplittingScheme,
    TrajectoryRecord,
    evolve,
    linear_flow,
    nonlinear_flow,
    split_step,
    write_trajectory_csv,
)
from .resonance import (
    DivisorReport,
    H1Report,
    H1Violation,
    MeasureReport,
    MultiIndex,
    ScanResult,
    ScanRow,
    check_h1,
    divisor_value,
    enumerate_zero_moment,
    is_action_type,
    min_divisor,
    moment,
    omega_sum,
    resonance_scan,
    resonant_measure,
    write_scan_csv,
)
from .normalform import (
    HomologicalSolution,
    JIndexClass,
    SparsePolynomial,
    homological_solve,
    jclass,
    load_polynomial_json,
    mu_and_S,
    normal_form_vanishing_check,
    poisson_bracket,
    save_polynomial_json,
    seminorm,
    verify_conjugacy,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "IntegrationError",
    "ResonanceError",
    "FULL",
    "HALF",
    "ModeLattice",
    "mode_weight",
    "DiagnosticsSample",
    "SpectralState",
    "actions",
    "head_tail",
    "load_state_binary",
    "load_state_csv",
    "project",
    "save_state_binary",
    "save_state_csv",
    "sobolev_norm",
    "weighted_action_distance",
    "NLS",
    "WAVE",
    "FilterKind",
    "NlsNonlinearity",
    "PdeModel",
    "WaveNonlinearity",
    "load_model_json",
    "mollifier_apply",
    "mollifier_factors",
    "nls_from_grid",
    "nls_model",
    "nls_to_grid",
    "nonlinear_energy",
    "nonlinear_gradient",
    "save_model_json",
    "wave_decode",
    "wave_encode",
    "wave_from_grid",
    "wave_grid_points",
    "wave_model",
    "wave_to_grid",
    "LIE",
    "STRANG",
    "EvolutionConfig",
    "SplittingScheme",
    "TrajectoryRecord",
    "evolve",
    "linear_flow",
    "nonlinear_flow",
    "split_step",
    "write_trajectory_csv",
    "DivisorReport",
    "H1Report",
    "H1Violation",
    "MeasureReport",
    "MultiIndex",
    "ScanResult",
    "ScanRow",
    "check_h1",
    "divisor_value",
    "enumerate_zero_moment",
    "is_action_type",
    "min_divisor",
    "moment",
    "omega_sum",
    "resonance_scan",
    "resonant_measure",
    "write_scan_csv",
    "HomologicalSolution",
    "JIndexClass",
    "SparsePolynomial",
    "homological_solve",
    "jclass",
    "load_polynomial_json",
    "mu_and_S",
    "normal_form_vanishing_check",
    "poisson_bracket",
    "save_polynomial_json",
    "seminorm",
    "verify_conjugacy",
    "__version__",
]
