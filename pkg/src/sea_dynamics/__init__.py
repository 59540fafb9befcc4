"""Steepest-entropy-ascent dissipative quantum dynamics and uncertainty relations."""

from ._kernels import BACKEND
from .boltzmann import (
    LEVELS,
    ReferenceStates,
    ScenarioConfig,
    build_initial_state,
    plateau_index,
    summarize,
    canonical_solve,
    reference_states,
    run_scenario,
)
from .lindblad import LindbladModel, PauliModel, compare_cardinality, entropy_rate_lindblad, lindblad_rhs, pauli_rhs
from .errors import *  # noqa: F401,F403
from .evolution import IntegratorConfig, RhsKind, TrajectoryRecord, integrate, rate_of_mean, rhs_diagonal, rhs_full
from .generator import (
    GeneratorSet,
    SeaEvaluation,
    TauPolicy,
    dissipation_time,
    evaluate,
    evolution_operator_C,
    is_nondissipative,
    massieu_deviation,
    mean_massieu,
    solve_multipliers,
)
from .operators import (
    DensityState,
    bilinear_form,
    commutator_form,
    correlation_coefficients,
    covariance,
    entropy,
    entropy_operator,
    inner_product,
    make_state,
    mean_value,
)
from .output import render_csv, render_json, series_header, series_rows
from .uncertainty import (
    CharacteristicTimes,
    UncertaintyReport,
    characteristic_time,
    entropy_time,
    inequality_suite,
    occupation_bounds,
    shortest_times,
)

__version__ = "0.1.0"
