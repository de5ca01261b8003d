"""Discrete laboratory for the total variation flow with Dirichlet data.

Solves the regularized elliptic problems, extracts the dual vector
field, certifies primal-dual equality of the total variation energy,
runs implicit Euler time stepping, and verifies per time slice that the
trajectory satisfies both the variational-inequality and the
pairing-based notions of solution.
"""

from .elliptic import (
    DualityCertificate,
    FeasibilityReport,
    NonConvergence,
    SolverConfig,
    SweepReport,
    UnboundedBelow,
    dual_feasibility,
    mu_sweep,
    solve_area_problem,
    solve_tv_problem,
)
from .energy import (
    EnergyParams,
    area_functional,
    composite_objective,
    conjugate_density,
    fenchel_gap,
    total_variation,
)
from .flow import (
    FlowProblem,
    FlowSolution,
    SliceCertificate,
    check_initial_attainment,
    solve_flow,
    step,
    verify_variational,
    verify_weak,
)
from .grid import (
    FaceVectorField,
    Grid,
    ScalarField,
    build_grid,
    divergence,
    extend_with_boundary,
    gradient,
)
from .library import problem_library
from .pairing import PairingValue, fenchel_pairing_bound, normal_trace, pairing

__all__ = [
    "DualityCertificate",
    "EnergyParams",
    "FaceVectorField",
    "FeasibilityReport",
    "FlowProblem",
    "FlowSolution",
    "Grid",
    "NonConvergence",
    "PairingValue",
    "ScalarField",
    "SliceCertificate",
    "SolverConfig",
    "SweepReport",
    "UnboundedBelow",
    "area_functional",
    "build_grid",
    "check_initial_attainment",
    "composite_objective",
    "conjugate_density",
    "divergence",
    "dual_feasibility",
    "extend_with_boundary",
    "fenchel_gap",
    "fenchel_pairing_bound",
    "gradient",
    "mu_sweep",
    "normal_trace",
    "pairing",
    "problem_library",
    "solve_area_problem",
    "solve_flow",
    "solve_tv_problem",
    "step",
    "total_variation",
    "verify_variational",
    "verify_weak",
]
