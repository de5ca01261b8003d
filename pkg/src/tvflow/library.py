"""Named problem presets used by the acceptance suite and as CLI starting points."""

from __future__ import annotations

import copy

from .config import RunConfig, validate_config

_PRESETS: dict[str, dict] = {
    # Linear datum on the unit interval: the minimum of TV + <f, u-u0> is 1,
    # matched by a constant unit dual field.
    "duality-linear-1d": {
        "command": "tv",
        "grid": {"dimension": 1, "shape": [16], "spacing": 0.0625, "collar_width": 1},
        "source": {"constant": 0.0},
        "boundary": {"expression": "x"},
        "solver": {"tolerance": 1e-8, "max_iterations": 400000},
        "seed": 0,
    },
    # Centered plateau of width 1/4 and unit height, zero boundary: the
    # amplitude decays at rate 2/w until extinction at t = w/2 = 0.125.
    "plateau-decay-1d": {
        "command": "flow",
        "grid": {"dimension": 1, "shape": [32], "spacing": 0.03125, "collar_width": 1},
        "boundary": {"constant": 0.0},
        "initial": {"expression": "step(x - 0.375) * step(0.625 - x)"},
        "time": {"tau": 0.001, "horizon": 0.5},
        "solver": {"tolerance": 1e-10, "max_iterations": 400000},
        "comparisons": 100,
        "seed": 0,
    },
    # Regularized family shrinking toward its sharp limit.  The quarter-scale
    # ramp keeps the dual deficit of the mu-construction (which grows like
    # mu^(4/3) times the datum scale) inside the 1e-4 acceptance window at
    # the last schedule entry.
    "mu-sweep-default": {
        "command": "sweep",
        "grid": {"dimension": 1, "shape": [16], "spacing": 0.0625, "collar_width": 1},
        "source": {"constant": 0.0},
        "boundary": {"expression": "x/4"},
        "schedule": [0.5, 0.1, 0.02, 0.004],
        "solver": {"tolerance": 1e-9, "max_iterations": 1000000},
        "seed": 0,
    },
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset_dict(name: str) -> dict:
    """Raw JSON-able config for a preset (deep copy, safe to edit)."""
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return copy.deepcopy(_PRESETS[name])


def problem_library() -> dict[str, RunConfig]:
    """Fully validated RunConfigs for every preset."""
    return {name: validate_config(preset_dict(name)) for name in preset_names()}
