"""Implicit Euler stepping for the total variation flow and slice verifiers.

Each step minimizes TV(v) + (1/2*tau) * ||v - u_prev||^2 through the
elliptic solver (lam = 1/tau, source = -u_prev/tau after completing the
square), so the backward difference (u - u_prev)/tau plays the role of
the time derivative everywhere: the dual field satisfies div z = dt_u,
the pairing of z with Du saturates the total variation, and the slice
passes the variational inequality against arbitrary comparison fields.
The two verifiers below check those two characterizations independently
from the pair (u, z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .elliptic import (
    DualityCertificate,
    FeasibilityReport,
    SolverConfig,
    dual_feasibility,
    pdhg_solve,
)
from .energy import EnergyParams, total_variation
from .grid import (
    FaceVectorField,
    Grid,
    ScalarField,
    divergence,
    dual_sup_norm,
    field_from_interior,
)
from .pairing import pairing

_COLLAR_TOL = 1e-12


@dataclass(frozen=True)
class FlowProblem:
    grid: Grid
    boundary: Callable[[float], ScalarField]
    initial: ScalarField
    tau: float
    horizon: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.horizon < self.tau:
            raise ValueError("horizon must cover at least one step")
        b0 = self.boundary(0.0)
        mask = np.ones(self.grid.full_shape, dtype=bool)
        mask[self.grid.interior_slices] = False
        if np.max(np.abs(self.initial.values[mask] - b0.values[mask])) > _COLLAR_TOL:
            raise ValueError("initial datum disagrees with the boundary datum on the collar at t=0")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.tau))


@dataclass(frozen=True)
class SliceCertificate:
    time_index: int
    tv_value: float
    dt_field: np.ndarray = field(repr=False)
    maximal_pairing_residual: float
    div_residual: float
    z_sup: float
    variational_violation: float
    dt_dual_feasible: bool
    dt_feasibility_optimum: float
    solver: DualityCertificate

    def as_dict(self) -> dict:
        return {
            "time_index": self.time_index,
            "tv_value": self.tv_value,
            "maximal_pairing_residual": self.maximal_pairing_residual,
            "div_residual": self.div_residual,
            "z_linf": self.z_sup,
            "variational_violation": self.variational_violation,
            "dt_dual_feasible": self.dt_dual_feasible,
            "dt_feasibility_optimum": self.dt_feasibility_optimum,
            "solver": self.solver.as_dict(),
        }


@dataclass(frozen=True)
class FlowSlice:
    index: int
    time: float
    u: ScalarField
    boundary: ScalarField
    z: FaceVectorField | None = None
    certificate: SliceCertificate | None = None


@dataclass(frozen=True)
class FlowSolution:
    problem: FlowProblem
    slices: tuple[FlowSlice, ...]
    seed: int

    @property
    def tv_series(self) -> np.ndarray:
        return np.array([total_variation(s.u.interior, s.boundary) for s in self.slices])

    @property
    def l2_steps(self) -> np.ndarray:
        vol = self.problem.grid.cell_volume
        out = [0.0]
        for prev, cur in zip(self.slices, self.slices[1:]):
            out.append(float(np.sqrt(np.sum((cur.u.interior - prev.u.interior) ** 2) * vol)))
        return np.array(out)


def _as_interior(v, grid: Grid, boundary: ScalarField) -> np.ndarray:
    if isinstance(v, ScalarField):
        mask = np.ones(grid.full_shape, dtype=bool)
        mask[grid.interior_slices] = False
        if np.max(np.abs(v.values[mask] - boundary.values[mask])) > 1e-9:
            raise ValueError("comparison field disagrees with the boundary datum on the collar")
        return v.interior
    v = np.asarray(v, dtype=float)
    if v.shape != grid.shape:
        raise ValueError(f"comparison block {v.shape} does not match grid shape {grid.shape}")
    return v


def slice_comparisons(grid: Grid, boundary: ScalarField, u_prev_int: np.ndarray,
                      count: int, seed: int, index: int) -> list[np.ndarray]:
    """Deterministic comparison family for one slice: the previous slice, the
    datum, and `count` seeded piecewise-constant perturbations."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    anchors = [np.asarray(u_prev_int, dtype=float), boundary.interior]
    fam = comparison_family(grid, boundary, anchors, count, rng)
    return [anchors[0], anchors[1]] + fam


def comparison_family(grid: Grid, boundary: ScalarField, anchors: Sequence[np.ndarray],
                      count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded piecewise-constant comparison fields around the given anchors."""
    anchors = [np.asarray(a, dtype=float) for a in anchors]
    amp = max(1.0, *(float(np.max(np.abs(a))) for a in anchors),
              float(np.max(np.abs(boundary.values))))
    out = []
    for _ in range(count):
        base = anchors[rng.integers(len(anchors))].copy()
        for _ in range(int(rng.integers(1, 4))):
            level = rng.uniform(-amp, amp)
            if grid.dimension == 1:
                (n,) = grid.shape
                i0, i1 = sorted(rng.integers(0, n + 1, size=2))
                base[i0:i1] += level
            else:
                nx, ny = grid.shape
                i0, i1 = sorted(rng.integers(0, nx + 1, size=2))
                j0, j1 = sorted(rng.integers(0, ny + 1, size=2))
                base[i0:i1, j0:j1] += level
        out.append(base)
    return out


def step(u_prev: ScalarField, boundary_now: ScalarField, tau: float, cfg: SolverConfig,
         grid: Grid | None = None, *, comparisons: Sequence[np.ndarray] | None = None,
         init_z: tuple[np.ndarray, ...] | None = None, check_feasibility: bool = True,
         time_index: int = 0) -> tuple[ScalarField, FaceVectorField, SliceCertificate]:
    """One implicit Euler step; the quadratic penalty is folded into the elliptic solve."""
    grid = grid or boundary_now.grid
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    prev = u_prev.interior
    params = EnergyParams(
        mu=0.0,
        lam=1.0 / tau,
        source=field_from_interior(grid, -prev / tau),
        boundary=boundary_now,
    )
    u, z, solver_cert = pdhg_solve(params, cfg, grid, init_u=prev, init_z=init_z)

    dt = (u.interior - prev) / tau
    tv = total_variation(u.interior, boundary_now, grid)
    pair = pairing(z, u.interior, boundary_now, grid)

    if comparisons is None:
        comparisons = [u.interior, prev, boundary_now.interior]
    worst = _worst_variational_violation(u.interior, dt, comparisons, boundary_now, grid)

    if check_feasibility:
        feas = dual_feasibility(field_from_interior(grid, dt), cfg, grid)
        feasible, optimum = feas.feasible, feas.optimum
    else:
        feasible, optimum = True, 0.0

    cert = SliceCertificate(
        time_index=time_index,
        tv_value=tv,
        dt_field=dt,
        maximal_pairing_residual=abs(pair.value - tv),
        div_residual=solver_cert.div_residual,
        z_sup=solver_cert.z_sup,
        variational_violation=worst,
        dt_dual_feasible=feasible,
        dt_feasibility_optimum=optimum,
        solver=solver_cert,
    )
    return u, z, cert


def _worst_variational_violation(u_int, dt, comparisons, boundary, grid) -> float:
    vol = grid.cell_volume
    tv_u = total_variation(u_int, boundary, grid)
    worst = -np.inf
    for v in comparisons:
        v_int = _as_interior(v, grid, boundary)
        rhs = float(np.sum(dt * (v_int - u_int)) * vol) + total_variation(v_int, boundary, grid)
        worst = max(worst, tv_u - rhs)
    return float(worst)


def solve_flow(problem: FlowProblem, cfg: SolverConfig, *, comparison_count: int = 100,
               seed: int = 0, check_feasibility: bool = True) -> FlowSolution:
    """March the implicit Euler scheme over the horizon, certifying every slice."""
    grid = problem.grid
    tau = problem.tau
    b0 = problem.boundary(0.0)
    slices = [FlowSlice(index=0, time=0.0, u=problem.initial, boundary=b0)]
    u_prev = problem.initial
    warm_z: tuple[np.ndarray, ...] | None = None

    for k in range(1, problem.steps + 1):
        t = k * tau
        bnd = problem.boundary(t)
        comps = slice_comparisons(grid, bnd, u_prev.interior, comparison_count, seed, k)
        u, z, cert = step(u_prev, bnd, tau, cfg, grid, comparisons=comps,
                          init_z=warm_z, check_feasibility=check_feasibility, time_index=k)
        slices.append(FlowSlice(index=k, time=t, u=u, boundary=bnd, z=z, certificate=cert))
        u_prev = u
        warm_z = z.components

    return FlowSolution(problem=problem, slices=tuple(slices), seed=seed)


@dataclass(frozen=True)
class VariationalReport:
    worst_violation: float
    violations: np.ndarray = field(repr=False)
    tolerance: float
    passed: bool


def verify_variational(sl: FlowSlice, u_prev: ScalarField, tau: float,
                       comparisons: Sequence[np.ndarray], grid: Grid | None = None,
                       tol: float = 1e-6) -> VariationalReport:
    """Slicewise variational inequality against every comparison field."""
    grid = grid or sl.u.grid
    vol = grid.cell_volume
    u_int = sl.u.interior
    dt = (u_int - u_prev.interior) / tau
    tv_u = total_variation(u_int, sl.boundary, grid)
    scale = 1.0 + tv_u
    violations = []
    for v in comparisons:
        v_int = _as_interior(v, grid, sl.boundary)
        rhs = float(np.sum(dt * (v_int - u_int)) * vol) + total_variation(v_int, sl.boundary, grid)
        violations.append(tv_u - rhs)
    violations = np.array(violations) if violations else np.zeros(0)
    worst = float(np.max(violations)) if violations.size else 0.0
    return VariationalReport(worst_violation=worst, violations=violations,
                             tolerance=tol * scale, passed=worst <= tol * scale)


@dataclass(frozen=True)
class WeakReport:
    feasibility_excess: float
    div_residual: float
    pairing_residual: float
    worst_identity_residual: float
    tolerance: float
    passed_feasible: bool
    passed_divergence: bool
    passed_pairing: bool
    passed_identity: bool

    @property
    def passed(self) -> bool:
        return (self.passed_feasible and self.passed_divergence
                and self.passed_pairing and self.passed_identity)


def verify_weak(sl: FlowSlice, u_prev: ScalarField, tau: float,
                comparisons: Sequence[np.ndarray], grid: Grid | None = None,
                tol: float = 1e-6) -> WeakReport:
    """Dual-field characterization: ball feasibility, div z = dt_u, maximal pairing,
    and the full pairing identity against every comparison field."""
    grid = grid or sl.u.grid
    if sl.z is None:
        raise ValueError("slice carries no dual field to verify")
    vol = grid.cell_volume
    u_int = sl.u.interior
    dt = (u_int - u_prev.interior) / tau
    tv_u = total_variation(u_int, sl.boundary, grid)
    scale = 1.0 + tv_u

    z_sup = dual_sup_norm(sl.z)
    div = divergence(sl.z).interior
    div_residual = float(np.max(np.abs(div - dt)))
    pairing_residual = abs(pairing(sl.z, u_int, sl.boundary, grid).value - tv_u)

    worst_identity = 0.0
    for v in comparisons:
        v_int = _as_interior(v, grid, sl.boundary)
        lhs = tv_u + float(np.sum(dt * (u_int - v_int)) * vol)
        rhs = pairing(sl.z, v_int, sl.boundary, grid).value
        worst_identity = max(worst_identity, abs(lhs - rhs))

    tol_abs = tol * scale
    return WeakReport(
        feasibility_excess=max(0.0, z_sup - 1.0),
        div_residual=div_residual,
        pairing_residual=pairing_residual,
        worst_identity_residual=worst_identity,
        tolerance=tol_abs,
        passed_feasible=z_sup <= 1.0 + max(tol_abs, 1e-9),
        passed_divergence=div_residual <= tol_abs,
        passed_pairing=pairing_residual <= tol_abs,
        passed_identity=worst_identity <= tol_abs,
    )


def verify_variational_trajectory(solution: FlowSolution, comparisons: Sequence[np.ndarray],
                                  tol: float = 1e-6) -> float:
    """Worst violation of the time-integrated variational inequality over
    constant-in-time comparison trajectories."""
    grid = solution.problem.grid
    tau = solution.problem.tau
    vol = grid.cell_volume
    u0 = solution.slices[0].u.interior
    uK = solution.slices[-1].u.interior
    lhs = tau * sum(total_variation(s.u.interior, s.boundary, grid) for s in solution.slices[1:])
    worst = -np.inf
    for v in comparisons:
        rhs = 0.0
        for s in solution.slices[1:]:
            v_int = _as_interior(v, grid, s.boundary)
            rhs += tau * total_variation(v_int, s.boundary, grid)
        v0 = _as_interior(v, grid, solution.slices[0].boundary)
        vK = _as_interior(v, grid, solution.slices[-1].boundary)
        rhs += 0.5 * float(np.sum((v0 - u0) ** 2) * vol)
        rhs -= 0.5 * float(np.sum((vK - uK) ** 2) * vol)
        worst = max(worst, lhs - rhs)
    return float(worst)


@dataclass(frozen=True)
class InitialAttainmentReport:
    taus: tuple[float, ...]
    first_slice_distances: tuple[float, ...]
    early_distances: tuple[float, ...]
    nonincreasing: bool


def check_initial_attainment(solution: FlowSolution, problem: FlowProblem,
                             cfg: SolverConfig, refinements: int = 2,
                             early_slices: int = 3) -> InitialAttainmentReport:
    """L2 distance to the initial datum on early slices, re-run under tau refinement."""
    grid = problem.grid
    vol = grid.cell_volume
    u0 = problem.initial.interior

    def l2(a, b):
        return float(np.sqrt(np.sum((a - b) ** 2) * vol))

    early = tuple(l2(s.u.interior, u0) for s in solution.slices[1 : early_slices + 1])

    taus = [problem.tau]
    firsts = [l2(solution.slices[1].u.interior, u0)]
    for r in range(1, refinements + 1):
        tau_r = problem.tau / (2.0**r)
        sub = FlowProblem(grid=grid, boundary=problem.boundary, initial=problem.initial,
                          tau=tau_r, horizon=tau_r)
        sol_r = solve_flow(sub, cfg, comparison_count=0, seed=solution.seed,
                           check_feasibility=False)
        taus.append(tau_r)
        firsts.append(l2(sol_r.slices[1].u.interior, u0))

    slack = 1e-10 * (1.0 + max(firsts))
    nonincr = all(b <= a + slack for a, b in zip(firsts, firsts[1:]))
    return InitialAttainmentReport(taus=tuple(taus), first_slice_distances=tuple(firsts),
                                   early_distances=early, nonincreasing=nonincr)
