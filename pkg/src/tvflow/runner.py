"""Command dispatch: execute a validated run configuration, write artifacts,
and re-validate emitted certificates.

Exit codes: 0 all checks pass, 2 certificate failure, 3 solver
non-convergence or unbounded objective, 4 configuration error.  Emitted
JSON embeds the fields, so the verify command can recompute every
certified quantity from scratch.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ParseError, RunConfig, ValidationError
from .elliptic import (
    DualityCertificate,
    NonConvergence,
    SolverConfig,
    UnboundedBelow,
    dual_feasibility,
    evaluate_certificate,
    mu_sweep,
    solve_area_problem,
    solve_tv_problem,
)
from .energy import EnergyParams, total_variation
from .flow import (
    FlowProblem,
    FlowSlice,
    FlowSolution,
    slice_comparisons,
    solve_flow,
    verify_variational,
    verify_weak,
)
from .grid import (
    FaceVectorField,
    Grid,
    ScalarField,
    build_grid,
    divergence,
    dual_sup_norm,
    field_from_interior,
)

EXIT_OK = 0
EXIT_CERTIFICATE = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

_MATCH_TOL = 1e-9


def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=1)


def _grid_json(grid: Grid) -> dict:
    return {"dimension": grid.dimension, "shape": list(grid.shape),
            "spacing": grid.spacing, "collar_width": grid.collar_width}


def _grid_from_json(data: dict) -> Grid:
    return build_grid(int(data["dimension"]), [int(s) for s in data["shape"]],
                      float(data["spacing"]), int(data["collar_width"]))


def _solver_json(cfg: SolverConfig) -> dict:
    return {"max_iterations": cfg.max_iterations, "tolerance": cfg.tolerance,
            "step_ratio": cfg.step_ratio, "check_every": cfg.check_every,
            "prox_root_tol": cfg.prox_root_tol,
            "primal_step": cfg.primal_step, "dual_step": cfg.dual_step}


def run(config: RunConfig, out_dir: str | Path | None = None, seed: int | None = None,
        tolerance: float | None = None) -> int:
    """Execute one run configuration; artifacts land in the output directory."""
    out = Path(out_dir or config.output or "tvflow_out")
    seed = config.seed if seed is None else int(seed)
    cfg = config.solver if tolerance is None else replace(config.solver, tolerance=float(tolerance))

    try:
        if config.command == "verify":
            tol = config.verify_tolerance if tolerance is None else float(tolerance)
            return verify_artifact(config.solution, tol)
        out.mkdir(parents=True, exist_ok=True)
        if config.command in ("elliptic", "tv"):
            return _run_elliptic(config, cfg, out, seed)
        if config.command == "sweep":
            return _run_sweep(config, cfg, out, seed)
        if config.command == "flow":
            return _run_flow(config, cfg, out, seed)
        if config.command == "feasibility":
            return _run_feasibility(config, cfg, out, seed)
        raise ValidationError(f"unknown command {config.command!r}")
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnboundedBelow as exc:
        print(f"solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NonConvergence as exc:
        print(f"solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _cert_invariant_failures(cert: dict, tolerance: float) -> list[str]:
    scale = 1.0 + abs(cert["primal_value"])
    out = []
    if not cert["gap"] >= -1e-8 * scale:
        out.append(f"weak duality violated: gap {cert['gap']:.3e} < -1e-8*scale")
    if not cert["feasibility_excess"] <= 1e-9:
        out.append(f"dual field leaves the unit ball by {cert['feasibility_excess']:.3e}")
    if not cert["converged"]:
        out.append("solver reports no convergence")
    if not cert["gap"] <= tolerance * scale:
        out.append(f"gap {cert['gap']:.3e} exceeds tolerance {tolerance:.1e}*scale")
    return out


def _run_elliptic(config: RunConfig, cfg: SolverConfig, out: Path, seed: int) -> int:
    grid = config.grid
    source = config.source.build(grid, domain="interior")
    boundary = config.boundary.build(grid, domain="full")
    if config.command == "elliptic":
        params = EnergyParams(mu=config.mu, lam=config.lam, source=source, boundary=boundary)
        u, z, cert = solve_area_problem(params, cfg, grid)
        mu, lam = config.mu, config.lam
    else:
        u, z, cert = solve_tv_problem(source, boundary, cfg, grid)
        mu, lam = 0.0, 0.0

    doc = {
        "command": config.command,
        "seed": seed,
        "solver": _solver_json(cfg),
        "problem": {
            "grid": _grid_json(grid),
            "mu": mu,
            "lambda": lam,
            "source": config.source.as_json(),
            "boundary": config.boundary.as_json(),
        },
        **cert.as_dict(),
        "fields": {
            "u": u.values.tolist(),
            "z": [c.tolist() for c in z.components],
            "source": source.interior.tolist(),
            "boundary": boundary.values.tolist(),
        },
    }
    (out / "certificate.json").write_text(_canonical_json(doc) + "\n")

    failures = _cert_invariant_failures(cert.as_dict(), cfg.tolerance)
    for line in failures:
        print(f"certificate: {line}", file=sys.stderr)
    return EXIT_CERTIFICATE if failures else EXIT_OK


def _run_sweep(config: RunConfig, cfg: SolverConfig, out: Path, seed: int) -> int:
    grid = config.grid
    source = config.source.build(grid, domain="interior")
    boundary = config.boundary.build(grid, domain="full")
    report = mu_sweep(source, boundary, config.schedule, cfg, grid)

    entries = []
    for e in report.entries:
        entries.append({
            "mu": e.mu,
            "value": e.value,
            "dual_linear": e.dual_linear,
            "div_residual": e.div_residual,
            "sqrt_mu_l2": e.sqrt_mu_l2,
            "value_gap_bound": report.value_gap_bound(e.mu),
            "certificate": e.certificate.as_dict(),
            "fields": {"u": e.u.values.tolist(), "z": [c.tolist() for c in e.z.components]},
        })
    doc = {
        "command": "sweep",
        "seed": seed,
        "solver": _solver_json(cfg),
        "problem": {
            "grid": _grid_json(grid),
            "schedule": list(config.schedule),
            "source": config.source.as_json(),
            "boundary": config.boundary.as_json(),
        },
        "entries": entries,
        "tv": report.tv_certificate.as_dict(),
        "coercivity_bound": report.coercivity_bound,
        "domain_measure": report.domain_measure,
        "boundary_l2_sq": report.boundary_l2_sq,
        "fields": {"source": source.interior.tolist(), "boundary": boundary.values.tolist()},
    }
    (out / "sweep.json").write_text(_canonical_json(doc) + "\n")

    failures = []
    for e in report.entries:
        for line in _cert_invariant_failures(e.certificate.as_dict(), cfg.tolerance):
            failures.append(f"mu={e.mu}: {line}")
        if abs(e.value - report.tv_value) > report.value_gap_bound(e.mu) + 1e-6:
            failures.append(f"mu={e.mu}: objective drifts beyond the stability bound")
        if 0.5 * e.sqrt_mu_l2**2 > report.coercivity_bound + 1e-9:
            failures.append(f"mu={e.mu}: coercivity bound violated")
    for line in _cert_invariant_failures(report.tv_certificate.as_dict(), cfg.tolerance):
        failures.append(f"tv limit: {line}")
    for line in failures:
        print(f"sweep: {line}", file=sys.stderr)
    return EXIT_CERTIFICATE if failures else EXIT_OK


def _run_flow(config: RunConfig, cfg: SolverConfig, out: Path, seed: int) -> int:
    grid = config.grid
    bspec = config.boundary

    if bspec.uses_time:
        def boundary_at(t: float) -> ScalarField:
            return bspec.build(grid, t=t, domain="full")
    else:
        fixed = bspec.build(grid, domain="full")

        def boundary_at(t: float) -> ScalarField:
            return fixed

    initial = config.initial.build(grid, t=0.0, domain="full")
    b0 = boundary_at(0.0)
    init_values = initial.values.copy()
    mask = np.ones(grid.full_shape, dtype=bool)
    mask[grid.interior_slices] = False
    init_values[mask] = b0.values[mask]
    initial = ScalarField(grid, init_values)

    problem = FlowProblem(grid=grid, boundary=boundary_at, initial=initial,
                          tau=config.tau, horizon=config.horizon)
    solution = solve_flow(problem, cfg, comparison_count=config.comparisons, seed=seed,
                          check_feasibility=config.check_feasibility)

    doc = _flow_json(config, cfg, solution, seed)
    (out / "flow.json").write_text(_canonical_json(doc) + "\n")
    (out / "series.csv").write_text(_series_csv(solution))

    failures = _flow_failures(solution, config.verify_tolerance)
    for line in failures:
        print(f"flow: {line}", file=sys.stderr)
    return EXIT_CERTIFICATE if failures else EXIT_OK


def _flow_json(config: RunConfig, cfg: SolverConfig, solution: FlowSolution, seed: int) -> dict:
    slices = []
    for sl in solution.slices:
        entry = {
            "index": sl.index,
            "time": sl.time,
            "tv_value": total_variation(sl.u.interior, sl.boundary),
            "u": sl.u.values.tolist(),
            "boundary": sl.boundary.values.tolist(),
        }
        if sl.z is not None:
            entry["z"] = [c.tolist() for c in sl.z.components]
        if sl.certificate is not None:
            cert = sl.certificate.as_dict()
            entry["certificate"] = cert
        slices.append(entry)
    problem = solution.problem
    return {
        "command": "flow",
        "seed": seed,
        "comparisons": config.comparisons,
        "check_feasibility": config.check_feasibility,
        "solver": _solver_json(cfg),
        "problem": {
            "grid": _grid_json(problem.grid),
            "tau": problem.tau,
            "horizon": problem.horizon,
            "boundary": config.boundary.as_json(),
            "initial": config.initial.as_json(),
        },
        "slices": slices,
    }


def _series_csv(solution: FlowSolution) -> str:
    lines = ["index,time,tv_value,l2_step,maximal_pairing_residual,div_residual,"
             "z_linf,variational_violation,dt_dual_feasible"]
    l2 = solution.l2_steps
    for sl in solution.slices:
        tv = total_variation(sl.u.interior, sl.boundary)
        if sl.certificate is None:
            lines.append(f"{sl.index},{sl.time!r},{tv!r},0.0,,,,,")
        else:
            c = sl.certificate
            lines.append(
                f"{sl.index},{sl.time!r},{tv!r},{l2[sl.index]!r},"
                f"{c.maximal_pairing_residual!r},{c.div_residual!r},{c.z_sup!r},"
                f"{c.variational_violation!r},{int(c.dt_dual_feasible)}"
            )
    return "\n".join(lines) + "\n"


def _flow_failures(solution: FlowSolution, tol: float) -> list[str]:
    failures = []
    for sl in solution.slices[1:]:
        c = sl.certificate
        scale = 1.0 + c.tv_value
        if c.z_sup > 1.0 + 1e-9:
            failures.append(f"slice {sl.index}: dual field outside the unit ball ({c.z_sup})")
        if c.maximal_pairing_residual > tol * scale:
            failures.append(f"slice {sl.index}: maximal pairing residual {c.maximal_pairing_residual:.3e}")
        if c.div_residual > tol * scale:
            failures.append(f"slice {sl.index}: div residual {c.div_residual:.3e}")
        if c.variational_violation > tol * scale:
            failures.append(f"slice {sl.index}: variational violation {c.variational_violation:.3e}")
        if not c.dt_dual_feasible:
            failures.append(f"slice {sl.index}: time derivative dual-infeasible "
                            f"(optimum {c.dt_feasibility_optimum})")
    return failures


def _run_feasibility(config: RunConfig, cfg: SolverConfig, out: Path, seed: int) -> int:
    grid = config.grid
    g = config.feas_field.build(grid, domain="interior")
    report = dual_feasibility(g, cfg, grid)
    doc = {
        "command": "feasibility",
        "seed": seed,
        "solver": _solver_json(cfg),
        "problem": {"grid": _grid_json(grid), "field": config.feas_field.as_json()},
        "feasible": report.feasible,
        "optimum": report.optimum,
        "residual": report.residual,
        "fields": {
            "g": g.interior.tolist(),
            "witness_z": [c.tolist() for c in report.witness.components] if report.witness else None,
        },
    }
    (out / "feasibility.json").write_text(_canonical_json(doc) + "\n")
    return EXIT_OK


def verify_artifact(path: str | Path, tol: float) -> int:
    """Recompute every certified quantity of an emitted artifact from its fields."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: cannot read artifact {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    command = doc.get("command")
    if command in ("elliptic", "tv"):
        failures = _verify_elliptic_doc(doc, tol)
    elif command == "sweep":
        failures = _verify_sweep_doc(doc, tol)
    elif command == "flow":
        failures = _verify_flow_doc(doc, tol)
    elif command == "feasibility":
        failures = _verify_feasibility_doc(doc, tol)
    else:
        print(f"config error: artifact has unknown command {command!r}", file=sys.stderr)
        return EXIT_CONFIG
    for line in failures:
        print(f"verify: {line}", file=sys.stderr)
    if failures:
        return EXIT_CERTIFICATE
    print(f"verify: {path}: all checks passed")
    return EXIT_OK


def _match(name: str, stored: float, recomputed: float, failures: list[str]):
    if abs(stored - recomputed) > _MATCH_TOL * (1.0 + abs(recomputed)):
        failures.append(f"{name}: stored {stored!r} != recomputed {recomputed!r}")


def _verify_cert_block(doc: dict, grid: Grid, mu: float, lam: float,
                       fields: dict, tol: float, label: str = "") -> list[str]:
    failures = []
    source = field_from_interior(grid, np.array(fields["source"], dtype=float))
    boundary = ScalarField(grid, np.array(fields["boundary"], dtype=float))
    u = ScalarField(grid, np.array(fields["u"], dtype=float))
    z = tuple(np.array(c, dtype=float) for c in fields["z"])
    params = EnergyParams(mu=mu, lam=lam, source=source, boundary=boundary)
    cert = evaluate_certificate(u.interior, z, params, grid, int(doc["iterations"]))

    _match(label + "primal_value", doc["primal_value"], cert.primal_value, failures)
    _match(label + "dual_value", doc["dual_value"], cert.dual_value, failures)
    _match(label + "gap", doc["gap"], cert.gap, failures)
    _match(label + "div_residual_linf", doc["div_residual_linf"], cert.div_residual, failures)
    _match(label + "z_linf", doc["z_linf"], cert.z_sup, failures)
    for line in _cert_invariant_failures({**doc, "converged": doc.get("converged", True)},
                                         doc.get("solver", {}).get("tolerance", tol)):
        failures.append(label + line)
    return failures


def _verify_elliptic_doc(doc: dict, tol: float) -> list[str]:
    grid = _grid_from_json(doc["problem"]["grid"])
    fields = dict(doc["fields"])
    return _verify_cert_block(doc, grid, float(doc["problem"]["mu"]),
                              float(doc["problem"]["lambda"]), fields, tol)


def _verify_sweep_doc(doc: dict, tol: float) -> list[str]:
    grid = _grid_from_json(doc["problem"]["grid"])
    failures = []
    shared = doc["fields"]
    for entry in doc["entries"]:
        mu = float(entry["mu"])
        fields = {"u": entry["fields"]["u"], "z": entry["fields"]["z"],
                  "boundary": shared["boundary"],
                  "source": (np.array(shared["source"]) * (1.0 - mu)).tolist()}
        block = {**entry["certificate"], "solver": doc.get("solver", {})}
        failures += _verify_cert_block(block, grid, mu, mu, fields, tol, label=f"mu={mu}: ")
    return failures


def _verify_feasibility_doc(doc: dict, tol: float) -> list[str]:
    failures = []
    grid = _grid_from_json(doc["problem"]["grid"])
    g = np.array(doc["fields"]["g"], dtype=float)
    if doc["fields"]["witness_z"] is None:
        return failures
    z = FaceVectorField(grid, tuple(np.array(c) for c in doc["fields"]["witness_z"]))
    norm = dual_sup_norm(z)
    if norm > doc["optimum"] + _MATCH_TOL * (1.0 + doc["optimum"]):
        failures.append(f"witness norm {norm!r} exceeds reported optimum {doc['optimum']!r}")
    residual = float(np.max(np.abs(divergence(z).interior - g)))
    scale = 1.0 + float(np.max(np.abs(g)))
    if residual > max(doc["residual"] + _MATCH_TOL, tol * scale):
        failures.append(f"witness divergence residual {residual!r}")
    return failures


def _verify_flow_doc(doc: dict, tol: float) -> list[str]:
    failures = []
    grid = _grid_from_json(doc["problem"]["grid"])
    tau = float(doc["problem"]["tau"])
    seed = int(doc["seed"])
    count = int(doc.get("comparisons", 100))
    slices = doc["slices"]
    prev_u = ScalarField(grid, np.array(slices[0]["u"], dtype=float))
    for entry in slices[1:]:
        k = int(entry["index"])
        u = ScalarField(grid, np.array(entry["u"], dtype=float))
        boundary = ScalarField(grid, np.array(entry["boundary"], dtype=float))
        z = FaceVectorField(grid, tuple(np.array(c, dtype=float) for c in entry["z"]))
        cert = entry["certificate"]

        tv = total_variation(u.interior, boundary, grid)
        _match(f"slice {k}: tv_value", cert["tv_value"], tv, failures)

        sl = FlowSlice(index=k, time=float(entry["time"]), u=u, boundary=boundary, z=z)
        comps = slice_comparisons(grid, boundary, prev_u.interior, count, seed, k)
        weak = verify_weak(sl, prev_u, tau, comps, grid, tol=tol)
        vari = verify_variational(sl, prev_u, tau, comps, grid, tol=tol)
        if not weak.passed_feasible:
            failures.append(f"slice {k}: dual field outside the unit ball "
                            f"(excess {weak.feasibility_excess:.3e})")
        if not weak.passed_divergence:
            failures.append(f"slice {k}: div z misses the time derivative "
                            f"({weak.div_residual:.3e})")
        if not weak.passed_pairing:
            failures.append(f"slice {k}: maximal pairing fails "
                            f"(residual {weak.pairing_residual:.3e})")
        if not weak.passed_identity:
            failures.append(f"slice {k}: pairing identity fails on a comparison "
                            f"({weak.worst_identity_residual:.3e})")
        if not vari.passed:
            failures.append(f"slice {k}: variational inequality fails "
                            f"({vari.worst_violation:.3e})")
        prev_u = u
    return failures
