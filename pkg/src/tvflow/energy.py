"""Total variation and area-type energies with solid boundary values.

The total variation of a field u with datum u0 is taken on the closed
domain: isotropic per-cell gradient magnitudes inside, plus the trace
jumps |u - u0| across boundary faces.  The area-type regularization
replaces the interior magnitude |g| by sqrt(mu^2 + |g|^2) and leaves the
jump part untouched, so it collapses to the total variation at mu = 0
and never exceeds it by more than mu * |domain|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import (
    FaceVectorField,
    Grid,
    ScalarField,
    cell_grouped_vectors,
    extend_with_boundary,
    gradient,
)

_BALL_SLACK = 1e-12


@dataclass(frozen=True)
class EnergyParams:
    """Regularization weight mu, zero-order coefficient lam, source and datum fields."""

    mu: float
    lam: float
    source: ScalarField
    boundary: ScalarField

    def __post_init__(self):
        if self.mu < 0.0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.source.grid is not self.boundary.grid and self.source.grid != self.boundary.grid:
            raise ValueError("source and boundary live on different grids")

    @property
    def grid(self) -> Grid:
        return self.source.grid


def interior_cell_gradient(u: ScalarField) -> np.ndarray:
    """Per-cell magnitude of the forward-difference vector over strictly interior faces."""
    cell, _ = cell_grouped_vectors(gradient(u))
    return cell


def total_variation(u: ScalarField | np.ndarray, boundary: ScalarField, grid: Grid | None = None) -> float:
    """Total variation on the closed domain, boundary jumps included."""
    grid = grid or boundary.grid
    ubar = extend_with_boundary(u, boundary)
    cell, bnd = cell_grouped_vectors(gradient(ubar))
    return float((np.sum(cell) + np.sum(bnd)) * grid.cell_volume)


def area_functional(u: ScalarField | np.ndarray, boundary: ScalarField, mu: float,
                    grid: Grid | None = None) -> float:
    """Area-type energy: regularized interior part plus plain boundary jumps."""
    if mu < 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    grid = grid or boundary.grid
    ubar = extend_with_boundary(u, boundary)
    cell, bnd = cell_grouped_vectors(gradient(ubar))
    return float((np.sum(np.sqrt(mu * mu + cell * cell)) + np.sum(bnd)) * grid.cell_volume)


def _check_unit_ball(z: np.ndarray) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    norm = float(np.linalg.norm(z))
    if norm > 1.0 + _BALL_SLACK:
        raise ValueError(f"|z| = {norm} exceeds the unit ball")
    return z


def fenchel_gap(z_val: Union[float, np.ndarray], v_val: Union[float, np.ndarray], mu: float) -> float:
    """Slack sqrt(mu^2+|v|^2) - mu*sqrt(1-|z|^2) - |z.v|; zero iff z = v/sqrt(mu^2+|v|^2)."""
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    z = _check_unit_ball(z_val)
    v = np.atleast_1d(np.asarray(v_val, dtype=float))
    zn2 = min(float(z @ z), 1.0)
    vn2 = float(v @ v)
    return float(np.sqrt(mu * mu + vn2) - mu * np.sqrt(1.0 - zn2) - abs(float(z @ v)))


def conjugate_density(z_val: Union[float, np.ndarray], mu: float) -> float:
    """Pointwise value -mu*sqrt(1-|z|^2) of the convex conjugate on the unit ball."""
    if mu < 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    z = _check_unit_ball(z_val)
    zn2 = min(float(z @ z), 1.0)
    return float(-mu * np.sqrt(1.0 - zn2))


def conjugate_term(z: FaceVectorField, mu: float) -> float:
    """Integral of mu*sqrt(1-|z|^2) over interior cells, cell-grouped."""
    cell, _ = cell_grouped_vectors(z)
    m2 = np.minimum(cell * cell, 1.0)
    return float(mu * np.sum(np.sqrt(1.0 - m2)) * z.grid.cell_volume)


def composite_objective(u: ScalarField | np.ndarray, params: EnergyParams, grid: Grid | None = None) -> float:
    """Area energy plus the quadratic and source coupling terms."""
    grid = grid or params.grid
    inner = u.interior if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    area = area_functional(inner, params.boundary, params.mu, grid)
    f = params.source.interior
    u0 = params.boundary.interior
    bulk = np.sum(0.5 * params.lam * inner * inner + f * (inner - u0)) * grid.cell_volume
    return float(area + bulk)
