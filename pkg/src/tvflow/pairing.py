"""Discrete pairing of bounded face fields with gradient measures.

On the grid the pairing of z and Dv collapses to finite sums.  Two
independent routes are computed and cross-checked: the collapsed
distributional definition (divergence against v plus the boundary-flux
term) and the comparison identity that moves everything onto the datum.
Both agree to rounding error because the operator pair is exactly
adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import area_functional, conjugate_term, total_variation
from .grid import (
    FaceVectorField,
    Grid,
    ScalarField,
    boundary_collar_values,
    boundary_trace,
    divergence,
    dual_sup_norm,
    gradient,
)

_BALL_SLACK = 1e-12


@dataclass(frozen=True)
class PairingValue:
    value: float
    via_definition: float
    via_identity: float


def normal_trace(z: FaceVectorField, grid: Grid | None = None) -> np.ndarray:
    """Outward flux [z,nu] per boundary face; satisfies Gauss-Green exactly."""
    return boundary_trace(z)


def pairing(z: FaceVectorField, v: ScalarField | np.ndarray, boundary: ScalarField,
            grid: Grid | None = None) -> PairingValue:
    """Pairing of z with the gradient measure of v under solid boundary values."""
    grid = grid or boundary.grid
    vol, area = grid.cell_volume, grid.face_area
    v_int = v.interior if isinstance(v, ScalarField) else np.asarray(v, dtype=float)
    div = divergence(z).interior
    grad_u0 = gradient(boundary)
    u0_int = boundary.interior

    z_dot_grad_u0 = float(sum(np.sum(a * b) for a, b in zip(z.components, grad_u0.components)) * vol)
    via_identity = z_dot_grad_u0 + float(np.sum(div * (u0_int - v_int)) * vol)

    flux = float(np.sum(boundary_trace(z) * boundary_collar_values(boundary)) * area)
    via_definition = -float(np.sum(div * v_int) * vol) + flux

    return PairingValue(value=via_definition, via_definition=via_definition, via_identity=via_identity)


def fenchel_pairing_bound(z: FaceVectorField, u: ScalarField | np.ndarray, boundary: ScalarField,
                          mu: float, grid: Grid | None = None) -> tuple[float, float]:
    """(|pairing|, area energy minus the conjugate term); the left never exceeds the right."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    if dual_sup_norm(z) > 1.0 + _BALL_SLACK:
        raise ValueError("face field exceeds the unit ball")
    grid = grid or boundary.grid
    lhs = abs(pairing(z, u, boundary, grid).value)
    rhs = area_functional(u, boundary, mu, grid) - conjugate_term(z, mu)
    return lhs, rhs


def pairing_bound_slack(z: FaceVectorField, v: ScalarField | np.ndarray, boundary: ScalarField,
                        grid: Grid | None = None) -> float:
    """Slack ||z||_inf * TV(v) - |pairing|, nonnegative for admissible z."""
    grid = grid or boundary.grid
    lhs = abs(pairing(z, v, boundary, grid).value)
    return dual_sup_norm(z) * total_variation(v, boundary, grid) - lhs
