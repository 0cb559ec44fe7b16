"""Constrained gradient-flow relaxation of the diffuse curve energy.

The tangent angle follows an L^2 gradient flow with the curve-closing
constraints int cos u = int sin u = 0 enforced by projecting the gradient
onto the constraint tangent space (plus periodic Newton re-projection of the
state when the defect drifts).  The phase field follows the mass-conserving
H^-1 flow v_t = Lap(dE/dv), realised with the periodic three-point
Laplacian, so the discrete mean of v is conserved to round-off.

Time stepping is a linearly-implicit theta scheme: the stiff linear parts
(2*eps*u'' in the angle equation, the fourth-order -2*eps*Lap^2 v under the
H^-1 metric) are treated implicitly, every nonlinear term explicitly.  On
top of the theta terms the implicit operators carry frozen-coefficient
stabilization shifts (lagged diffusivity, auto-sized from the current state
by default) that damp the explicit second-order stiffness of order
Phi''/eps; they act on the increment only, so stationary states are fixed
points of the scheme regardless of the shifts.  Periodic solves are done by
discrete Fourier diagonalization.

The explicit stability bound without stabilization is roughly
dt <= eps*h^2 / (16*a) for the quartic well of scale a; with the default
auto shifts the practical bound is set by the O(1) reaction rates instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    TWO_PI,
    EnergyBreakdown,
    FieldState,
    ModelParams,
    closure_defect,
    phase_field_energy,
)

STOP_CONVERGED = "converged"
STOP_MAX_STEPS = "max_steps"
STOP_BLOW_UP = "blow_up"

# increments below this (relative to the field scale) count as stationary
_STATIONARY_RTOL = 1e-14


class FlowBlowUp(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowParams:
    """Time-stepping controls.

    The run is declared converged once the per-step energy decrease stays
    below energy_tol*dt for ``convergence_checks`` consecutive log points.
    ``u_stabilization`` / ``v_stabilization`` override the automatic
    frozen-coefficient shifts (0 disables them, None = auto).
    """

    dt: float
    max_steps: int
    energy_tol: float = 1e-8
    closure_tol: float = 1e-6
    implicit_theta: float = 1.0
    projection_interval: int = 25
    log_every: int = 10
    convergence_checks: int = 10
    u_stabilization: float | None = None
    v_stabilization: float | None = None

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.energy_tol < 0.0:
            raise ValueError(f"energy_tol must be nonnegative, got {self.energy_tol}")
        if not 0.0 <= self.implicit_theta <= 1.0:
            raise ValueError(f"implicit_theta must lie in [0, 1], got {self.implicit_theta}")
        if self.max_steps < 1 or self.log_every < 1 or self.projection_interval < 1:
            raise ValueError("max_steps, log_every and projection_interval must be >= 1")


@dataclass(frozen=True)
class FlowLogEntry:
    step: int
    time: float
    energy: EnergyBreakdown
    mass_defect: float
    closure: tuple[float, float]

    @property
    def closure_defect_norm(self) -> float:
        return math.hypot(*self.closure)


@dataclass
class FlowResult:
    final: FieldState
    energy_log: list
    stop_reason: str


def angle_gradient(state: FieldState, params: ModelParams) -> np.ndarray:
    """Discrete L^2 gradient of the diffuse energy with respect to u.

    The energy depends on u through the edge fluxes
    F_i = v_i^2 (k_i - C(v_i)) + eps*k_i, and the exact gradient is the
    backward flux difference 2*(F_{i-1} - F_i)/h.
    """
    h = state.grid.spacing
    kappa = state.curvature()
    v2 = state.v * state.v
    flux = v2 * (kappa - params.curvature_spec.value(state.v)) + params.eps * kappa
    return 2.0 * (np.roll(flux, 1) - flux) / h


def phase_gradient(state: FieldState, params: ModelParams) -> np.ndarray:
    """Discrete L^2 gradient of the diffuse energy with respect to v."""
    h = state.grid.spacing
    eps = params.eps
    v = state.v
    kappa = state.curvature()
    cs = params.curvature_spec
    dev = kappa - cs.value(v)
    lap_v = (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / (h * h)
    return (
        2.0 * v * dev * dev
        - 2.0 * v * v * dev * cs.derivative(v)
        + params.potential.derivative(v) / eps
        - 2.0 * eps * lap_v
    )


def _constraint_directions(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return -np.sin(u), np.cos(u)


def project_closure(
    state: FieldState, raw: np.ndarray, *, cond_limit: float = 1e12
) -> tuple[np.ndarray, tuple[float, float]]:
    """Project raw onto the L^2-orthogonal complement of the closure gradients.

    Returns raw + lam1*(-sin u) + lam2*(cos u) with the multipliers chosen so
    the result is discretely orthogonal to both constraint gradients, making
    the linearized closing defect stationary under the flow.
    """
    h = state.grid.spacing
    a1, a2 = _constraint_directions(state.u)
    gram = h * np.array(
        [
            [np.dot(a1, a1), np.dot(a1, a2)],
            [np.dot(a1, a2), np.dot(a2, a2)],
        ]
    )
    if np.linalg.cond(gram) > cond_limit:
        raise ValueError(
            "closure projection is singular: tangent directions are degenerate "
            f"(Gram condition number above {cond_limit:g})"
        )
    rhs = -h * np.array([np.dot(raw, a1), np.dot(raw, a2)])
    lam = np.linalg.solve(gram, rhs)
    return raw + lam[0] * a1 + lam[1] * a2, (float(lam[0]), float(lam[1]))


def enforce_closure(
    u: np.ndarray, h: float, *, tol: float = 1e-13, max_iter: int = 25
) -> np.ndarray:
    """Newton correction of u along the constraint-gradient span until the curve closes."""
    u = u.copy()
    for _ in range(max_iter):
        cos_u, sin_u = np.cos(u), np.sin(u)
        defect = h * np.array([np.sum(cos_u), np.sum(sin_u)])
        if float(np.hypot(*defect)) <= tol:
            return u
        s, c = -sin_u, cos_u
        jac = h * np.array(
            [
                [np.dot(-sin_u, s), np.dot(-sin_u, c)],
                [np.dot(cos_u, s), np.dot(cos_u, c)],
            ]
        )
        step = np.linalg.solve(jac, -defect)
        u += step[0] * s + step[1] * c
    raise RuntimeError("closure re-projection did not converge")


class FlowWorkspace:
    """Cached Fourier symbols for the periodic implicit solves of one grid."""

    def __init__(self, grid):
        n = grid.n_points
        h = grid.spacing
        k = np.arange(n // 2 + 1)
        # eigenvalues of -Lap_h under the real DFT
        self.lam = (4.0 / (h * h)) * np.square(np.sin(math.pi * k / n))
        self.n = n

    def solve_shifted(self, rhs: np.ndarray, coeff: float) -> np.ndarray:
        """Solve (I + coeff*(-Lap_h)) x = rhs."""
        return np.fft.irfft(np.fft.rfft(rhs) / (1.0 + coeff * self.lam), n=self.n)

    def h_inv_step(self, g: np.ndarray, dt: float, stab: float, biharm: float) -> np.ndarray:
        """Increment of the H^-1 step: (I + dt*stab*(-Lap) + dt*biharm*Lap^2)^-1 dt*Lap g."""
        sym = 1.0 + dt * stab * self.lam + dt * biharm * np.square(self.lam)
        dv = np.fft.irfft(-dt * self.lam * np.fft.rfft(g) / sym, n=self.n)
        dv -= dv.mean()  # mean is untouched analytically; pin it against round-off
        return dv


def _auto_u_stab(state: FieldState, params: ModelParams) -> float:
    # explicit diffusion coefficient of the flux term is 2*v^2
    return 2.0 * float(np.max(state.v * state.v))


def _auto_v_stab(state: FieldState, params: ModelParams) -> float:
    # pointwise slope of the non-stiff part of the phase gradient
    v = state.v
    kappa = state.curvature()
    cs = params.curvature_spec
    dev = kappa - cs.value(v)
    cp = cs.derivative(v)
    cpp = cs.second_derivative(v)
    slope = (
        2.0 * dev * dev
        - 8.0 * v * dev * cp
        + 2.0 * v * v * cp * cp
        - 2.0 * v * v * dev * cpp
        + params.potential.second_derivative(v) / params.eps
    )
    return max(0.0, float(np.max(slope)))


def step_flow(
    state: FieldState,
    params: ModelParams,
    fp: FlowParams,
    work: FlowWorkspace | None = None,
    dt: float | None = None,
) -> FieldState:
    """One IMEX step of the coupled flow; raises FlowBlowUp on non-finite values."""
    if work is None:
        work = FlowWorkspace(state.grid)
    if dt is None:
        dt = fp.dt
    eps = params.eps
    theta = fp.implicit_theta

    gu = angle_gradient(state, params)
    pu, _ = project_closure(state, gu)
    su = fp.u_stabilization if fp.u_stabilization is not None else _auto_u_stab(state, params)
    du = work.solve_shifted(-dt * pu, dt * (2.0 * eps * theta + su))
    # re-project the increment: the implicit smoothing breaks exact orthogonality
    du, _ = project_closure(state, du)
    u_new = state.u + du

    gv = phase_gradient(state, params)
    sv = fp.v_stabilization if fp.v_stabilization is not None else _auto_v_stab(state, params)
    dv = work.h_inv_step(gv, dt, sv, 2.0 * eps * theta)
    v_new = state.v + dv

    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise FlowBlowUp("non-finite field values after step")
    return FieldState(state.grid, u_new, state.winding, v_new)


def _log_entry(
    step: int, time: float, state: FieldState, params: ModelParams, mass_target: float
) -> FlowLogEntry:
    h = state.grid.spacing
    energy = phase_field_energy(state, params)
    mass = h * float(np.sum(state.v))
    defect = closure_defect(state)
    return FlowLogEntry(step, time, energy, mass - mass_target, (float(defect[0]), float(defect[1])))


def run_flow(
    state: FieldState,
    params: ModelParams,
    fp: FlowParams,
    snapshot_hook=None,
) -> FlowResult:
    """Iterate step_flow until convergence, max_steps or blow-up.

    Distinct runs are independent; within a run everything is sequential.
    The snapshot hook, if given, is called as hook(step, time, state) at
    every log point and must not mutate the state.
    """
    h = state.grid.spacing
    if params.volume_constraint_active:
        mass_target = params.m * state.grid.length
    else:
        mass_target = h * float(np.sum(state.v))

    work = FlowWorkspace(state.grid)
    state = state.copy()
    log = [_log_entry(0, 0.0, state, params, mass_target)]
    if snapshot_hook is not None:
        snapshot_hook(0, 0.0, state)

    stop = STOP_MAX_STEPS
    dt = fp.dt
    time = 0.0
    prev_energy = log[0].energy.total
    prev_step = 0
    quiet_checks = 0
    u_scale = 1.0 + float(np.max(np.abs(state.u)))
    v_scale = 1.0 + float(np.max(np.abs(state.v)))

    step = 0
    while step < fp.max_steps:
        step += 1
        try:
            new_state = step_flow(state, params, fp, work, dt)
        except FlowBlowUp:
            stop = STOP_BLOW_UP
            break
        du_max = float(np.max(np.abs(new_state.u - state.u)))
        dv_max = float(np.max(np.abs(new_state.v - state.v)))
        state = new_state
        time += dt

        if step % fp.projection_interval == 0:
            if float(np.hypot(*closure_defect(state))) > 0.5 * fp.closure_tol:
                state.u = enforce_closure(state.u, h)

        stationary = du_max <= _STATIONARY_RTOL * u_scale and dv_max <= _STATIONARY_RTOL * v_scale
        at_log = step % fp.log_every == 0 or step == fp.max_steps or stationary
        if not at_log:
            continue

        entry = _log_entry(step, time, state, params, mass_target)
        log.append(entry)
        if snapshot_hook is not None:
            snapshot_hook(step, time, state)

        if stationary:
            stop = STOP_CONVERGED
            break
        energy = entry.energy.total
        per_step_decrease = (prev_energy - energy) / (step - prev_step)
        if per_step_decrease < fp.energy_tol * dt:
            quiet_checks += 1
        else:
            quiet_checks = 0
        if quiet_checks >= fp.convergence_checks:
            stop = STOP_CONVERGED
            break
        # halving safeguard against too-aggressive steps
        if energy - prev_energy > 1e-9 * (1.0 + abs(energy)) and dt > fp.dt / 64.0:
            dt = dt / 2.0
        prev_energy, prev_step = energy, step

    if stop != STOP_BLOW_UP and log[-1].step != step:
        log.append(_log_entry(step, time, state, params, mass_target))
        if snapshot_hook is not None:
            snapshot_hook(step, time, state)
    return FlowResult(state, log, stop)
