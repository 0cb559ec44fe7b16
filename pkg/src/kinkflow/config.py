"""Experiment configuration: a strict flat key-value text format.

Lines are ``key = value``; blank lines and lines starting with ``#`` are
ignored.  Unknown keys are errors.  The full key table with defaults is in
``describe_keys()`` and is printed by ``kinkflow --help``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import FlowParams
from .model import (
    CurvatureSpec,
    FieldState,
    Grid,
    ModelParams,
    PotentialSpec,
    QUARTIC_DOUBLE_WELL,
    SINGLE_WELL,
    TWO_PI,
)


class ConfigError(ValueError):
    pass


# key -> (default or REQUIRED/OPTIONAL marker, description)
_REQUIRED = object()
_OPTIONAL = object()

KEY_TABLE = {
    "model.eps": (_REQUIRED, "interface width parameter, > 0"),
    "model.m": ("0.0", "prescribed mean of the phase field, in (-1, 1)"),
    "model.volume_constraint": ("true", "enforce the mean-phase constraint"),
    "model.potential.family": (
        QUARTIC_DOUBLE_WELL,
        f"{QUARTIC_DOUBLE_WELL} or {SINGLE_WELL}",
    ),
    "model.potential.scale": ("1.0", "well scale a in a*(1-v^2)^2 or a*(1-v)^2"),
    "model.c_minus": ("1.0", "preferred curvature of the v=-1 phase"),
    "model.c_plus": ("2.0", "preferred curvature of the v=+1 phase"),
    "grid.n_points": (_REQUIRED, "number of grid cells, >= 16"),
    "grid.length": (_REQUIRED, "total curve length L"),
    "initial.kind": (_REQUIRED, "circle | from_file | sharp_recovery"),
    "initial.radius": (_OPTIONAL, "circle radius (kind=circle); 2*pi*radius must equal L"),
    "initial.path": (_OPTIONAL, "snapshot file with the initial state (kind=from_file)"),
    "initial.sharp_file": (_OPTIONAL, "sharp-state file (kind=sharp_recovery)"),
    "initial.eps": (_OPTIONAL, "width used to build the recovery (default model.eps)"),
    "initial_phase.kind": (
        _OPTIONAL,
        "two_interface | constant | from_file (required for kind=circle)",
    ),
    "initial_phase.mean": (_OPTIONAL, "mean of the two-interface profile"),
    "initial_phase.positions": (_OPTIONAL, "two comma-separated interface positions"),
    "initial_phase.value": (_OPTIONAL, "constant phase value"),
    "initial_phase.path": (_OPTIONAL, "snapshot file providing v (grids must match)"),
    "flow.dt": ("1e-4", "time step"),
    "flow.max_steps": ("100000", "step budget"),
    "flow.energy_tol": ("1e-8", "converged when per-step energy decrease < energy_tol*dt"),
    "flow.closure_tol": ("1e-6", "closing-defect bound; re-projection at half of it"),
    "flow.implicit_theta": ("1.0", "implicitness of the stiff linear terms, in [0, 1]"),
    "flow.projection_interval": ("25", "steps between closure drift checks"),
    "flow.log_every": ("10", "steps between log entries"),
    "flow.convergence_checks": ("10", "consecutive quiet checks required to stop"),
    "flow.u_stabilization": ("auto", "frozen-coefficient shift for the angle solve, or auto"),
    "flow.v_stabilization": ("auto", "frozen-coefficient shift for the phase solve, or auto"),
    "output.directory": ("out", "output directory, created if missing"),
    "output.snapshot_every": ("0", "snapshot cadence in steps (0 = final only)"),
    "output.svg": ("false", "also write an SVG drawing per snapshot"),
}


def describe_keys() -> str:
    lines = ["configuration keys (key = value per line, # comments):"]
    for key, (default, desc) in KEY_TABLE.items():
        if default is _REQUIRED:
            mark = "(required)"
        elif default is _OPTIONAL:
            mark = "(conditional)"
        else:
            mark = f"(default {default})"
        lines.append(f"  {key:28s} {mark:28s} {desc}")
    return "\n".join(lines)


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    radius: float | None = None
    path: str | None = None
    sharp_file: str | None = None
    eps: float | None = None


@dataclass(frozen=True)
class InitialPhaseSpec:
    kind: str | None
    mean: float | None = None
    positions: tuple[float, float] | None = None
    value: float | None = None
    path: str | None = None


@dataclass(frozen=True)
class OutputSpec:
    directory: str
    snapshot_every: int
    svg: bool


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    grid: Grid
    initial: InitialSpec
    initial_phase: InitialPhaseSpec
    flow: FlowParams
    output: OutputSpec


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value

    def get(key: str) -> str | None:
        if key in values:
            return values[key]
        default = KEY_TABLE[key][0]
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        if default is _OPTIONAL:
            return None
        return default

    family = get("model.potential.family")
    if family not in (QUARTIC_DOUBLE_WELL, SINGLE_WELL):
        raise ConfigError(f"model.potential.family: unknown family {family!r}")
    try:
        potential = PotentialSpec(family, _parse_float("model.potential.scale", get("model.potential.scale")))
        curvature = CurvatureSpec(
            _parse_float("model.c_minus", get("model.c_minus")),
            _parse_float("model.c_plus", get("model.c_plus")),
        )
        model = ModelParams(
            eps=_parse_float("model.eps", get("model.eps")),
            m=_parse_float("model.m", get("model.m")),
            potential=potential,
            curvature_spec=curvature,
            volume_constraint_active=_parse_bool(
                "model.volume_constraint", get("model.volume_constraint")
            ),
        )
        grid = Grid(
            _parse_int("grid.n_points", get("grid.n_points")),
            _parse_float("grid.length", get("grid.length")),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None

    initial_kind = get("initial.kind")
    if initial_kind not in ("circle", "from_file", "sharp_recovery"):
        raise ConfigError(f"initial.kind: unknown kind {initial_kind!r}")
    initial = InitialSpec(
        kind=initial_kind,
        radius=_parse_float("initial.radius", values["initial.radius"]) if "initial.radius" in values else None,
        path=values.get("initial.path"),
        sharp_file=values.get("initial.sharp_file"),
        eps=_parse_float("initial.eps", values["initial.eps"]) if "initial.eps" in values else None,
    )
    if initial_kind == "circle":
        if initial.radius is None:
            raise ConfigError("initial.radius is required for initial.kind = circle")
        if not math.isclose(TWO_PI * initial.radius, grid.length, rel_tol=1e-9):
            raise ConfigError(
                f"inconsistent circle: 2*pi*radius = {TWO_PI * initial.radius!r} "
                f"but grid.length = {grid.length!r}"
            )
    elif initial_kind == "from_file":
        if initial.path is None:
            raise ConfigError("initial.path is required for initial.kind = from_file")
        if not Path(initial.path).exists():
            raise ConfigError(f"initial.path: file not found: {initial.path}")
    else:
        if initial.sharp_file is None:
            raise ConfigError("initial.sharp_file is required for initial.kind = sharp_recovery")
        if not Path(initial.sharp_file).exists():
            raise ConfigError(f"initial.sharp_file: file not found: {initial.sharp_file}")

    phase_kind = get("initial_phase.kind")
    positions = None
    if "initial_phase.positions" in values:
        parts = [p for p in values["initial_phase.positions"].split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError("initial_phase.positions: expected two comma-separated numbers")
        positions = (
            _parse_float("initial_phase.positions", parts[0]),
            _parse_float("initial_phase.positions", parts[1]),
        )
    initial_phase = InitialPhaseSpec(
        kind=phase_kind,
        mean=_parse_float("initial_phase.mean", values["initial_phase.mean"])
        if "initial_phase.mean" in values
        else None,
        positions=positions,
        value=_parse_float("initial_phase.value", values["initial_phase.value"])
        if "initial_phase.value" in values
        else None,
        path=values.get("initial_phase.path"),
    )
    if initial_kind == "circle":
        if phase_kind not in ("two_interface", "constant", "from_file"):
            raise ConfigError(
                f"initial_phase.kind must be two_interface, constant or from_file, got {phase_kind!r}"
            )
        if phase_kind == "two_interface" and (initial_phase.mean is None or positions is None):
            raise ConfigError("two_interface phase needs initial_phase.mean and .positions")
        if phase_kind == "constant" and initial_phase.value is None:
            raise ConfigError("constant phase needs initial_phase.value")
        if phase_kind == "from_file":
            if initial_phase.path is None:
                raise ConfigError("from_file phase needs initial_phase.path")
            if not Path(initial_phase.path).exists():
                raise ConfigError(f"initial_phase.path: file not found: {initial_phase.path}")
        if model.volume_constraint_active:
            stated = None
            if phase_kind == "two_interface":
                stated = initial_phase.mean
            elif phase_kind == "constant":
                stated = initial_phase.value
            if stated is not None and abs(stated - model.m) > 1e-12:
                raise ConfigError(
                    f"initial phase mean {stated!r} conflicts with model.m = {model.m!r}"
                )

    stab_u = get("flow.u_stabilization")
    stab_v = get("flow.v_stabilization")
    try:
        flow = FlowParams(
            dt=_parse_float("flow.dt", get("flow.dt")),
            max_steps=_parse_int("flow.max_steps", get("flow.max_steps")),
            energy_tol=_parse_float("flow.energy_tol", get("flow.energy_tol")),
            closure_tol=_parse_float("flow.closure_tol", get("flow.closure_tol")),
            implicit_theta=_parse_float("flow.implicit_theta", get("flow.implicit_theta")),
            projection_interval=_parse_int(
                "flow.projection_interval", get("flow.projection_interval")
            ),
            log_every=_parse_int("flow.log_every", get("flow.log_every")),
            convergence_checks=_parse_int(
                "flow.convergence_checks", get("flow.convergence_checks")
            ),
            u_stabilization=None if stab_u == "auto" else _parse_float("flow.u_stabilization", stab_u),
            v_stabilization=None if stab_v == "auto" else _parse_float("flow.v_stabilization", stab_v),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None

    output = OutputSpec(
        directory=get("output.directory"),
        snapshot_every=_parse_int("output.snapshot_every", get("output.snapshot_every")),
        svg=_parse_bool("output.svg", get("output.svg")),
    )
    return ExperimentConfig(model, grid, initial, initial_phase, flow, output)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text)


def _two_interface_profile(grid: Grid, model: ModelParams, mean: float, positions) -> np.ndarray:
    """Smooth two-interface initial phase with the requested discrete mean.

    The transitions follow tanh(sqrt(a)*d/eps), the stationary profile shape
    of the quartic well; the profile is shifted by a constant so the discrete
    mean matches exactly.
    """
    t = grid.points()
    s1, s2 = sorted(positions)
    rate = math.sqrt(model.potential.scale) / model.eps
    v = np.tanh(rate * (t - s1)) + np.tanh(rate * (s2 - t)) - 1.0
    v += mean - float(np.mean(v))
    return v


def build_initial_state(cfg: ExperimentConfig) -> FieldState:
    """Initial field state described by the config (circle, file or recovery)."""
    from .io import read_snapshot  # local import to keep module load light
    from .recovery import build_recovery

    if cfg.initial.kind == "from_file":
        state, _ = read_snapshot(cfg.initial.path)
        if state.grid.n_points != cfg.grid.n_points or not math.isclose(
            state.grid.length, cfg.grid.length, rel_tol=1e-9
        ):
            raise ConfigError(
                f"snapshot grid ({state.grid.n_points}, {state.grid.length!r}) does not match "
                f"config grid ({cfg.grid.n_points}, {cfg.grid.length!r})"
            )
        return state

    if cfg.initial.kind == "sharp_recovery":
        from .io import read_sharp

        sharp = read_sharp(cfg.initial.sharp_file)
        eps = cfg.initial.eps if cfg.initial.eps is not None else cfg.model.eps
        return build_recovery(sharp, eps, cfg.grid, cfg.model)

    # circle
    t = cfg.grid.points()
    u = t / cfg.initial.radius
    kind = cfg.initial_phase.kind
    if kind == "two_interface":
        v = _two_interface_profile(
            cfg.grid, cfg.model, cfg.initial_phase.mean, cfg.initial_phase.positions
        )
    elif kind == "constant":
        v = np.full(cfg.grid.n_points, cfg.initial_phase.value)
    else:
        phase_state, _ = read_snapshot(cfg.initial_phase.path)
        if phase_state.grid.n_points != cfg.grid.n_points:
            raise ConfigError("initial_phase snapshot grid does not match the config grid")
        v = phase_state.v.copy()
    return FieldState(cfg.grid, u, 1, v)
