"""Boundary-control synthesis and numerical verification for the heat
equation on a half-plane with bounded Dirichlet controls."""

from .hermite import (
    BasisSpec,
    QuadratureRule,
    basis_box_halfwidth,
    gauss_legendre_rule,
    hermite_eval,
    hermite_multiplication_check,
    inner_product,
    psi_hat_eval,
    psi_scaled_eval,
    theta_eval,
)
from .spectral import (
    GridSpec,
    HalfPlaneField,
    PhysicalField,
    SpectralField,
    boundary_trace,
    field_section,
    l2_norm,
    odd_extend,
    propagate_free,
    read_field,
    sample_field,
    smoothing_derivative_bound_check,
    transform_forward,
    transform_inverse,
    write_field,
)
from .synthesis import (
    AdmissibilityReport,
    CoefficientSet,
    ControlParams,
    ErrorBudget,
    SynthesizedControl,
    admissibility_profile,
    assemble_control_response,
    closed_form_coefficients,
    compute_Wnm_quadrature,
    compute_g_pm,
    compute_h_pn,
    delta_moment_residual,
    error_budget,
    example_Wnm,
    example_g_pm,
    phi_eval,
    phi_l_eval,
    pulse_eval,
    quadrature_coefficients,
    synthesize,
    z_response,
    z_terminal,
)
from .simulation import (
    BUILTIN_CASE,
    GRID_SLACK,
    BoundCheck,
    ExperimentConfig,
    ExperimentReport,
    TraceProbe,
    counterexample_lower_bound,
    counterexample_norms,
    counterexample_outer_radius,
    run_experiment,
    run_experiment_full,
    solution_bound_checks,
    trace_consistency,
    unbounded_response_pointwise,
)

__version__ = "0.1.0"
