"""Collared Cartesian grids and the adjoint gradient/divergence pair.

The computational domain is an interior block of cells surrounded by a
collar of ghost cells that carries the Dirichlet datum.  Dual variables
live on faces: every face with at least one interior cell on its side
gets exactly one slot.  Gradients are forward differences across faces,
the divergence is the negative adjoint, so the discrete Gauss-Green
identity holds to rounding error (see `gauss_green_residual`).

Boundary faces (interior cell vs. collar cell) carry the jump between
the solution and the datum; faces strictly inside the collar do not
exist.  All fields are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid: interior block plus ghost collar.

    shape counts interior cells per axis; the stored block has
    ``shape + 2*collar_width`` cells per axis.  The cell volume is
    ``spacing**dimension``, the face area ``spacing**(dimension-1)``.
    """

    dimension: int
    shape: tuple[int, ...]
    spacing: float
    collar_width: int = 1

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.shape) != self.dimension:
            raise ValueError(f"shape {self.shape} does not match dimension {self.dimension}")
        if any(n < 1 for n in self.shape):
            raise ValueError(f"need at least one interior cell per axis, got shape {self.shape}")
        if not (self.spacing > 0.0 and np.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing}")
        if self.collar_width < 1:
            raise ValueError(f"collar_width must be >= 1, got {self.collar_width}")

    @cached_property
    def full_shape(self) -> tuple[int, ...]:
        c = 2 * self.collar_width
        return tuple(n + c for n in self.shape)

    @cached_property
    def interior_slices(self) -> tuple[slice, ...]:
        c = self.collar_width
        return tuple(slice(c, c + n) for n in self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @property
    def face_area(self) -> float:
        return self.spacing ** (self.dimension - 1)

    @property
    def n_interior_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_collar_cells(self) -> int:
        return int(np.prod(self.full_shape)) - self.n_interior_cells

    @property
    def domain_measure(self) -> float:
        """Volume of the interior block."""
        return self.n_interior_cells * self.cell_volume

    @cached_property
    def face_shapes(self) -> tuple[tuple[int, ...], ...]:
        """Per axis, the shape of the face-value array (faces touching the interior)."""
        shapes = []
        for axis in range(self.dimension):
            s = list(self.shape)
            s[axis] += 1
            shapes.append(tuple(s))
        return tuple(shapes)

    @property
    def n_faces(self) -> int:
        return sum(int(np.prod(s)) for s in self.face_shapes)

    def cell_centers(self, clamp: bool = False) -> tuple[np.ndarray, ...]:
        """Coordinate arrays (one per axis, broadcastable) of all stored cells.

        The interior block spans ``[0, shape*spacing]`` per axis; collar
        centers fall outside.  With ``clamp=True`` coordinates are clipped
        to the closed interior box, which is the convention for sampling
        boundary data on the collar.
        """
        axes = []
        c, h = self.collar_width, self.spacing
        for axis, n in enumerate(self.shape):
            x = (np.arange(n + 2 * c) - c + 0.5) * h
            if clamp:
                x = np.clip(x, 0.0, n * h)
            shp = [1] * self.dimension
            shp[axis] = n + 2 * c
            axes.append(x.reshape(shp))
        return tuple(axes)


@dataclass(frozen=True)
class ScalarField:
    """One value per cell of the interior block plus collar."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.full_shape:
            raise ValueError(f"field shape {v.shape} does not match grid block {self.grid.full_shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_slices]


@dataclass(frozen=True)
class FaceVectorField:
    """One value per face touching the interior; `components[axis]` holds axis-normal faces."""

    grid: Grid
    components: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        comps = tuple(np.asarray(a, dtype=float) for a in self.components)
        if len(comps) != self.grid.dimension:
            raise ValueError(f"expected {self.grid.dimension} face components, got {len(comps)}")
        for axis, (a, s) in enumerate(zip(comps, self.grid.face_shapes)):
            if a.shape != s:
                raise ValueError(f"axis-{axis} face array has shape {a.shape}, expected {s}")
            if not np.all(np.isfinite(a)):
                raise ValueError("face field contains non-finite values")
        frozen = []
        for a in comps:
            a = a.copy()
            a.flags.writeable = False
            frozen.append(a)
        object.__setattr__(self, "components", tuple(frozen))


def build_grid(dimension: int, shape: int | Sequence[int], spacing: float, collar_width: int = 1) -> Grid:
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),) * dimension
    return Grid(dimension=dimension, shape=tuple(int(n) for n in shape), spacing=float(spacing),
                collar_width=int(collar_width))


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.full_shape, float(value)))


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray], clamp: bool = True) -> ScalarField:
    """Sample fn(x) / fn(x, y) at cell centers; collar coordinates are clamped by default."""
    coords = grid.cell_centers(clamp=clamp)
    vals = np.broadcast_to(np.asarray(fn(*coords), dtype=float), grid.full_shape)
    return ScalarField(grid, np.array(vals))


def field_from_interior(grid: Grid, interior: np.ndarray, collar_value: float = 0.0) -> ScalarField:
    interior = np.asarray(interior, dtype=float)
    if interior.shape != grid.shape:
        raise ValueError(f"interior array shape {interior.shape} does not match grid shape {grid.shape}")
    full = np.full(grid.full_shape, float(collar_value))
    full[grid.interior_slices] = interior
    return ScalarField(grid, full)


def extend_with_boundary(u_interior: ScalarField | np.ndarray, boundary: ScalarField) -> ScalarField:
    """Glue interior values onto the datum's collar.

    The face differences of the result across the domain boundary are
    exactly the trace jumps between the solution and the datum.
    """
    grid = boundary.grid
    inner = u_interior.interior if isinstance(u_interior, ScalarField) else np.asarray(u_interior, dtype=float)
    if inner.shape != grid.shape:
        raise ValueError(f"interior block {inner.shape} does not match grid shape {grid.shape}")
    full = boundary.values.copy()
    full[grid.interior_slices] = inner
    return ScalarField(grid, full)


def zero_face_field(grid: Grid) -> FaceVectorField:
    return FaceVectorField(grid, tuple(np.zeros(s) for s in grid.face_shapes))


def _face_diffs(grid: Grid, full: np.ndarray) -> tuple[np.ndarray, ...]:
    c, h = grid.collar_width, grid.spacing
    if grid.dimension == 1:
        (n,) = grid.shape
        return ((full[c : c + n + 1] - full[c - 1 : c + n]) / h,)
    nx, ny = grid.shape
    fx = (full[c : c + nx + 1, c : c + ny] - full[c - 1 : c + nx, c : c + ny]) / h
    fy = (full[c : c + nx, c : c + ny + 1] - full[c : c + nx, c - 1 : c + ny]) / h
    return (fx, fy)


def gradient(u: ScalarField) -> FaceVectorField:
    """Forward difference across every face touching the interior block."""
    return FaceVectorField(u.grid, _face_diffs(u.grid, u.values))


def divergence(z: FaceVectorField) -> ScalarField:
    """Negative adjoint of `gradient`; defined on interior cells, zero on the collar."""
    grid = z.grid
    h = grid.spacing
    if grid.dimension == 1:
        (zf,) = z.components
        div = (zf[1:] - zf[:-1]) / h
    else:
        zx, zy = z.components
        div = (zx[1:, :] - zx[:-1, :]) / h + (zy[:, 1:] - zy[:, :-1]) / h
    return field_from_interior(grid, div, collar_value=0.0)


def boundary_trace(z: FaceVectorField) -> np.ndarray:
    """Outward-signed face values on the domain boundary, in canonical order.

    1D order: (low, high).  2D order: x-low row, x-high row, y-low
    column, y-high column.  `boundary_collar_values` uses the same order.
    """
    grid = z.grid
    if grid.dimension == 1:
        (zf,) = z.components
        return np.array([-zf[0], zf[-1]])
    zx, zy = z.components
    return np.concatenate([-zx[0, :], zx[-1, :], -zy[:, 0], zy[:, -1]])


def boundary_collar_values(u: ScalarField) -> np.ndarray:
    """Values on the collar cells adjacent to the boundary, matching `boundary_trace` order."""
    grid = u.grid
    c = grid.collar_width
    full = u.values
    if grid.dimension == 1:
        (n,) = grid.shape
        return np.array([full[c - 1], full[c + n]])
    nx, ny = grid.shape
    return np.concatenate([
        full[c - 1, c : c + ny],
        full[c + nx, c : c + ny],
        full[c : c + nx, c - 1],
        full[c : c + nx, c + ny],
    ])


def boundary_jumps(u: ScalarField) -> np.ndarray:
    """Value jumps (outside minus inside) across every boundary face, canonical order."""
    grid = u.grid
    diffs = _face_diffs(grid, u.values)
    h = grid.spacing
    if grid.dimension == 1:
        (f,) = diffs
        return np.array([-f[0] * h, f[-1] * h])
    fx, fy = diffs
    return np.concatenate([-fx[0, :] * h, fx[-1, :] * h, -fy[:, 0] * h, fy[:, -1] * h])


def cell_grouped_vectors(z: FaceVectorField) -> tuple[np.ndarray, np.ndarray]:
    """Regroup face values isotropically: per-cell magnitudes and boundary-face magnitudes.

    Each interior cell owns its forward faces that lie strictly inside the
    domain (Euclidean norm per cell); boundary faces stand alone.  This is
    the grouping under which the total variation is isotropic and the dual
    constraint is the per-cell unit ball.
    """
    grid = z.grid
    if grid.dimension == 1:
        (zf,) = z.components
        (n,) = grid.shape
        cell = np.zeros(n)
        cell[: n - 1] = np.abs(zf[1:n])
        bnd = np.abs(np.array([zf[0], zf[n]]))
        return cell, bnd
    zx, zy = z.components
    nx, ny = grid.shape
    gx = np.zeros((nx, ny))
    gy = np.zeros((nx, ny))
    gx[: nx - 1, :] = zx[1:nx, :]
    gy[:, : ny - 1] = zy[:, 1:ny]
    cell = np.hypot(gx, gy)
    bnd = np.abs(np.concatenate([zx[0, :], zx[nx, :], zy[:, 0], zy[:, ny]]))
    return cell, bnd


def dual_sup_norm(z: FaceVectorField) -> float:
    """Sup norm of a face field in the cell-grouped Euclidean sense."""
    cell, bnd = cell_grouped_vectors(z)
    m = 0.0
    if cell.size:
        m = float(np.max(cell))
    if bnd.size:
        m = max(m, float(np.max(bnd)))
    return m


def gauss_green_residual(z: FaceVectorField, w: ScalarField) -> float:
    """Relative residual of the discrete Gauss-Green identity.

    sum_interior w*div(z)*h^d + sum_faces z*grad(w)*h^d
        = sum_boundary [z,nu]*w_collar*h^(d-1).
    """
    grid = z.grid
    vol, area = grid.cell_volume, grid.face_area
    div = divergence(z).interior
    grad_w = gradient(w)
    lhs = float(np.sum(div * w.interior) * vol)
    mid = float(sum(np.sum(a * b) for a, b in zip(z.components, grad_w.components)) * vol)
    trace = boundary_trace(z)
    collar = boundary_collar_values(w)
    rhs = float(np.sum(trace * collar) * area)
    scale = 1.0 + abs(lhs) + abs(mid) + abs(rhs)
    return abs(lhs + mid - rhs) / scale
