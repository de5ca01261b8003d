"""Strict JSON run configuration.

Unknown keys are errors; physics parameters have no silent defaults.
Datum fields take exactly one of constant / expression / csv / raw.
Expression data are sampled at cell centers with collar coordinates
clamped to the closed domain, so the collar carries the boundary trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .elliptic import SolverConfig
from .expressions import Expression, ExpressionError
from .grid import Grid, ScalarField, build_grid, constant_field, field_from_function
from .io import read_scalar_csv, read_scalar_raw

COMMANDS = ("elliptic", "tv", "flow", "sweep", "verify", "feasibility")


class ParseError(ValueError):
    """Unreadable or syntactically broken configuration."""


class ValidationError(ValueError):
    """Well-formed JSON that violates the schema; names the offending field."""


@dataclass(frozen=True)
class DatumSpec:
    kind: str  # constant | expression | csv | raw
    value: Any
    base_dir: Path

    def build(self, grid: Grid, t: float | None = None, domain: str = "full") -> ScalarField:
        if self.kind == "constant":
            f = constant_field(grid, float(self.value))
            return f if domain == "full" else f
        if self.kind == "expression":
            expr: Expression = self.value
            names = ("x",) if grid.dimension == 1 else ("x", "y")
            coords = grid.cell_centers(clamp=True)
            env = dict(zip(names, coords))
            if t is not None:
                env["t"] = t
            try:
                vals = expr(**env)
            except ExpressionError as exc:
                raise ValidationError(str(exc)) from exc
            vals = np.broadcast_to(np.asarray(vals, dtype=float), grid.full_shape)
            return ScalarField(grid, np.array(vals))
        path = self.base_dir / str(self.value)
        if self.kind == "csv":
            return read_scalar_csv(grid, path, domain=domain)
        return read_scalar_raw(grid, path, domain=domain)

    @property
    def uses_time(self) -> bool:
        return self.kind == "expression" and "t" in self.value.variables

    def as_json(self) -> dict:
        if self.kind == "expression":
            return {"expression": self.value.text}
        return {self.kind: self.value}


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    solver: SolverConfig
    grid: Grid | None
    output: str | None
    raw: dict = field(repr=False)
    mu: float | None = None
    lam: float | None = None
    source: DatumSpec | None = None
    boundary: DatumSpec | None = None
    initial: DatumSpec | None = None
    feas_field: DatumSpec | None = None
    schedule: tuple[float, ...] | None = None
    tau: float | None = None
    horizon: float | None = None
    comparisons: int = 100
    check_feasibility: bool = True
    solution: str | None = None
    verify_tolerance: float = 1e-6


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"missing required key '{key}' in {where}")
    return data[key]


def _check_keys(data: dict, allowed: set[str], where: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{where} must be an object")
    for key in data:
        if key not in allowed:
            raise ValidationError(f"unknown key '{key}' in {where}")


def _parse_grid(data: dict) -> Grid:
    _check_keys(data, {"dimension", "shape", "spacing", "collar_width"}, "grid")
    dim = int(_require(data, "dimension", "grid"))
    shape = _require(data, "shape", "grid")
    if isinstance(shape, (int, float)):
        shape = [int(shape)]
    spacing = float(_require(data, "spacing", "grid"))
    collar = int(data.get("collar_width", 1))
    try:
        return build_grid(dim, [int(s) for s in shape], spacing, collar)
    except ValueError as exc:
        raise ValidationError(f"grid: {exc}") from exc


def _parse_datum(data: Any, where: str, base_dir: Path) -> DatumSpec:
    if isinstance(data, (int, float)):
        return DatumSpec("constant", float(data), base_dir)
    _check_keys(data, {"constant", "expression", "csv", "raw"}, where)
    if len(data) != 1:
        raise ValidationError(f"{where} must give exactly one of constant/expression/csv/raw")
    kind, value = next(iter(data.items()))
    if kind == "constant":
        return DatumSpec("constant", float(value), base_dir)
    if kind == "expression":
        try:
            expr = Expression(str(value))
        except ExpressionError as exc:
            raise ParseError(f"{where}: {exc}") from exc
        bad = expr.variables - {"x", "y", "t"}
        if bad:
            raise ValidationError(f"{where}: unknown variable(s) {sorted(bad)}")
        return DatumSpec("expression", expr, base_dir)
    path = base_dir / str(value)
    if not path.exists():
        raise ParseError(f"{where}: referenced file {path} does not exist")
    return DatumSpec(kind, str(value), base_dir)


def _parse_solver(data: dict) -> SolverConfig:
    allowed = {"max_iterations", "tolerance", "primal_step", "dual_step",
               "step_ratio", "check_every", "prox_root_tol"}
    _check_keys(data, allowed, "solver")
    kwargs = {}
    for key in allowed:
        if key in data:
            kwargs[key] = int(data[key]) if key in ("max_iterations", "check_every") else float(data[key])
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ValidationError(f"solver: {exc}") from exc


_COMMON = {"command", "seed", "output", "solver"}
_SCHEMA = {
    "elliptic": _COMMON | {"grid", "mu", "lambda", "source", "boundary"},
    "tv": _COMMON | {"grid", "source", "boundary"},
    "sweep": _COMMON | {"grid", "source", "boundary", "schedule"},
    "flow": _COMMON | {"grid", "boundary", "initial", "time", "comparisons", "check_feasibility"},
    "feasibility": _COMMON | {"grid", "field"},
    "verify": _COMMON | {"solution", "tolerance"},
}


def parse_config(path: str | Path) -> RunConfig:
    """Load, validate, and resolve a run configuration (strict schema)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return validate_config(data, base_dir=path.parent)


def validate_config(data: dict, base_dir: str | Path = ".") -> RunConfig:
    base_dir = Path(base_dir)
    if not isinstance(data, dict):
        raise ValidationError("config root must be an object")
    command = _require(data, "command", "config")
    if command not in COMMANDS:
        raise ValidationError(f"unknown command '{command}'")
    _check_keys(data, _SCHEMA[command], "config")

    seed = int(data.get("seed", 0))
    solver = _parse_solver(data.get("solver", {}))
    output = data.get("output")
    kwargs: dict[str, Any] = {}

    if command == "verify":
        solution = str(_require(data, "solution", "config"))
        if not (base_dir / solution).exists():
            raise ParseError(f"solution file {base_dir / solution} does not exist")
        kwargs["solution"] = str(base_dir / solution)
        kwargs["verify_tolerance"] = float(data.get("tolerance", 1e-6))
        grid = None
    else:
        grid = _parse_grid(_require(data, "grid", "config"))

    if command in ("elliptic", "tv", "sweep"):
        kwargs["source"] = _parse_datum(_require(data, "source", "config"), "source", base_dir)
        kwargs["boundary"] = _parse_datum(_require(data, "boundary", "config"), "boundary", base_dir)
    if command == "elliptic":
        kwargs["mu"] = float(_require(data, "mu", "config"))
        kwargs["lam"] = float(_require(data, "lambda", "config"))
        if kwargs["mu"] <= 0.0:
            raise ValidationError("mu: the regularized problem needs mu > 0 (use the tv command for mu = 0)")
        if kwargs["lam"] < 0.0:
            raise ValidationError("lambda: must be nonnegative")
    if command == "sweep":
        schedule = _require(data, "schedule", "config")
        if not isinstance(schedule, list) or not schedule:
            raise ValidationError("schedule must be a nonempty list")
        sched = tuple(float(m) for m in schedule)
        if any(m <= 0 for m in sched) or any(not a > b for a, b in zip(sched, sched[1:])):
            raise ValidationError("schedule must be strictly decreasing and positive")
        kwargs["schedule"] = sched
    if command == "flow":
        kwargs["boundary"] = _parse_datum(_require(data, "boundary", "config"), "boundary", base_dir)
        kwargs["initial"] = _parse_datum(_require(data, "initial", "config"), "initial", base_dir)
        time = _require(data, "time", "config")
        _check_keys(time, {"tau", "horizon"}, "time")
        kwargs["tau"] = float(_require(time, "tau", "time"))
        kwargs["horizon"] = float(_require(time, "horizon", "time"))
        if kwargs["tau"] <= 0 or kwargs["horizon"] < kwargs["tau"]:
            raise ValidationError("time: need tau > 0 and horizon >= tau")
        kwargs["comparisons"] = int(data.get("comparisons", 100))
        kwargs["check_feasibility"] = bool(data.get("check_feasibility", True))
    if command == "feasibility":
        kwargs["feas_field"] = _parse_datum(_require(data, "field", "config"), "field", base_dir)

    return RunConfig(command=command, seed=seed, solver=solver, grid=grid,
                     output=output, raw=data, **kwargs)
