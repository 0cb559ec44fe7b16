"""Near-limit field constructions around interfaces and kinks.

Given a sharp curve description, ``build_recovery`` assembles a diffuse
field state whose energy approaches the sharp energy as eps -> 0: the
tangent angle equals the sharp angle away from junctions and is linearly
interpolated across each kink's inner interval of half-width

    delta = jump * eps / (2*sqrt(Phi(0))),

the unique width for which the inner interval's energy
int eps*u'^2 + Phi(0)/eps attains the kink cost (Young's inequality is
tight exactly there).  The phase field runs through the optimal transition
profile p solving p' = sqrt(Phi(p)), assembled oddly at interfaces and
evenly (a dip to 0 and back) at ghost junctions.  Afterwards the curve is
re-closed by a two-parameter Newton correction supported on smooth bumps
inside one patch, and the phase mass is restored by a single bump
correction in a phase plateau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .model import (
    TWO_PI,
    FieldState,
    Grid,
    ModelParams,
    PotentialSpec,
    QUARTIC_DOUBLE_WELL,
    SharpState,
    closure_defect,
)

PROFILE_MAX_STEP = 1e-3


class RecoveryError(ValueError):
    pass


@dataclass
class ProfileTable:
    """Tabulated optimal transition profile with monotone cubic interpolation."""

    abscissae: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.abscissae = np.asarray(self.abscissae, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self._interp = PchipInterpolator(self.abscissae, self.values, extrapolate=False)

    @property
    def t_max(self) -> float:
        return float(self.abscissae[-1])

    def __call__(self, t):
        t = np.clip(t, 0.0, self.t_max)
        return self._interp(t)


def optimal_profile(pot: PotentialSpec, t_max: float, tol: float = 1e-9) -> ProfileTable:
    """Integrate p' = sqrt(Phi(p)), p(0) = 0, with a fixed-step RK4 scheme.

    For the quartic well of scale a the solution is tanh(sqrt(a)*t).
    """
    if pot.family != QUARTIC_DOUBLE_WELL:
        raise RecoveryError("the transition profile requires the double-well potential")
    if not t_max > 0.0:
        raise RecoveryError(f"t_max must be positive, got {t_max}")
    step = min(PROFILE_MAX_STEP, max(tol, 1e-12) ** 0.25)
    n = max(1, int(math.ceil(t_max / step)))
    step = t_max / n
    cap = np.nextafter(1.0, 0.0)

    def rhs(p):
        return pot.sqrt_value(min(p, cap))

    ts = np.linspace(0.0, t_max, n + 1)
    ps = np.empty(n + 1)
    p = 0.0
    ps[0] = p
    for i in range(n):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * step * k1)
        k3 = rhs(p + 0.5 * step * k2)
        k4 = rhs(p + step * k3)
        p = p + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = min(p, cap)
        ps[i + 1] = p
    return ProfileTable(ts, ps)


def kink_half_width(jump: float, pot: PotentialSpec, eps: float) -> float:
    """Half-width of the smoothed kink region, jump*eps/(2*sqrt(Phi(0)))."""
    if not 0.0 <= jump <= math.pi + 1e-12:
        raise RecoveryError(f"tangent jump must lie in [0, pi], got {jump}")
    if not eps > 0.0:
        raise RecoveryError(f"eps must be positive, got {eps}")
    phi0 = float(pot.value(0.0))
    if phi0 <= 0.0:
        raise RecoveryError("Phi(0) = 0: kinks carry no finite smoothing width")
    return jump * eps / (2.0 * math.sqrt(phi0))


@dataclass
class TransitionRamp:
    """Piecewise transition from 0 to 1: flat on [0, delta], optimal profile on
    (delta, delta+sqrt(eps)], then a linear connector of slope 1/eps up to 1."""

    eps: float
    delta: float
    profile: ProfileTable

    def __post_init__(self):
        if self.delta < 0.0:
            raise RecoveryError(f"delta must be nonnegative, got {self.delta}")
        self.t_knee = self.delta + math.sqrt(self.eps)
        self.p_knee = float(self.profile(1.0 / math.sqrt(self.eps)))
        self.width = self.t_knee + self.eps * (1.0 - self.p_knee)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        dead = t <= self.delta
        curved = (t > self.delta) & (t <= self.t_knee)
        linear = (t > self.t_knee) & (t <= self.width)
        out[dead] = 0.0
        out[curved] = self.profile((t[curved] - self.delta) / self.eps)
        out[linear] = self.p_knee + (t[linear] - self.t_knee) / self.eps
        return out


def transition_ramp(eps: float, delta: float, profile: ProfileTable) -> TransitionRamp:
    if profile.t_max < 1.0 / math.sqrt(eps):
        raise RecoveryError(
            f"profile table too short: need t_max >= {1.0 / math.sqrt(eps):g}, have {profile.t_max:g}"
        )
    return TransitionRamp(eps, delta, profile)


def smooth_bump(t: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """Standard compactly supported mollifier, peak 1 at the center."""
    x = (np.asarray(t, dtype=float) - center) / half_width
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - np.square(x[inside])))
    return out


def periodic_bump(t: np.ndarray, length: float, center: float, half_width: float) -> np.ndarray:
    """Mollifier on the periodic domain; the support may straddle the seam."""
    out = smooth_bump(t, center, half_width)
    out = np.maximum(out, smooth_bump(t, center - length, half_width))
    return np.maximum(out, smooth_bump(t, center + length, half_width))


def correct_closure(
    u: np.ndarray,
    h: float,
    targets: tuple[float, float],
    f: np.ndarray | None,
    g: np.ndarray,
    *,
    tol: float = 1e-12,
    max_iter: int = 50,
    cond_limit: float = 1e8,
) -> tuple[np.ndarray, float, float]:
    """Newton solve for alpha, beta with h*sum cos(u+af+bg) = C0, h*sum sin(...) = S0.

    With f = None only beta is solved against the cosine equation (the
    antisymmetric mode for a tangent jump of pi, where the sine sum is
    preserved identically); the sine residual must then stay within tol on
    its own.
    """
    c0, s0 = targets
    alpha, beta = 0.0, 0.0

    def residual(a, b):
        ut = u + (a * f if f is not None else 0.0) + b * g
        return np.array([c0 - h * np.sum(np.cos(ut)), -s0 + h * np.sum(np.sin(ut))]), ut

    res, ut = residual(alpha, beta)
    for _ in range(max_iter):
        if float(np.max(np.abs(res))) <= tol:
            return u + (alpha * f if f is not None else 0.0) + beta * g, alpha, beta
        sin_ut, cos_ut = np.sin(ut), np.cos(ut)
        if f is None:
            slope = h * float(np.dot(sin_ut, g))
            if abs(slope) < 1e-14:
                raise RecoveryError("degenerate one-parameter closure correction stalled")
            beta -= res[0] / slope
        else:
            jac = h * np.array(
                [
                    [np.dot(sin_ut, f), np.dot(sin_ut, g)],
                    [np.dot(cos_ut, f), np.dot(cos_ut, g)],
                ]
            )
            if np.linalg.cond(jac) > cond_limit:
                raise RecoveryError(
                    "ill-conditioned closure correction; place the bumps elsewhere in the patch"
                )
            step = np.linalg.solve(jac, res)
            alpha -= step[0]
            beta -= step[1]
        res, ut = residual(alpha, beta)
    raise RecoveryError(f"closure correction did not converge in {max_iter} iterations")


def correct_volume(
    v: np.ndarray, h: float, target_mass: float, bump: np.ndarray
) -> tuple[np.ndarray, float]:
    """Restore the discrete phase mass by adding gamma * bump (unit discrete integral)."""
    integral = h * float(np.sum(bump))
    if not math.isclose(integral, 1.0, rel_tol=1e-9):
        raise RecoveryError(f"volume-correction bump must have unit integral, got {integral!r}")
    gamma = target_mass - h * float(np.sum(v))
    return v + gamma * bump, gamma


@dataclass
class KinkPatch:
    """Bookkeeping for one smoothed junction."""

    center: float
    half_width: float
    jump: float
    turn: float
    kind: str
    reach: float
    outer: float
    alpha: float = 0.0
    beta: float = 0.0
    correction_basis: tuple | None = None


def plan_patches(
    sharp: SharpState,
    eps: float,
    grid: Grid,
    pot: PotentialSpec,
    *,
    outer_factor: float = 10.0,
) -> list[KinkPatch]:
    """Place one patch per junction; check disjointness and grid resolution.

    The phase-transition collar is sqrt(eps) + eps plus one grid cell; the
    outer patch used for correction bumps defaults to outer_factor collars
    and is shrunk to keep neighbouring patches disjoint.
    """
    if not sharp.junctions:
        return []
    h = grid.spacing
    L = grid.length
    positions = sharp.junction_positions()
    collar = math.sqrt(eps) + eps + h
    patches = []
    for jun, pos in zip(sharp.junctions, positions):
        delta = kink_half_width(jun.jump, pot, eps)
        if jun.jump > 0.0 and delta < 8.0 * h:
            need = int(math.ceil(8.0 * L / delta))
            raise RecoveryError(
                f"grid too coarse: kink half-width {delta:.3g} needs spacing <= {delta / 8.0:.3g} "
                f"(n_points >= {need})"
            )
        patches.append(
            KinkPatch(
                center=float(pos),
                half_width=delta,
                jump=jun.jump,
                turn=jun.turn,
                kind=jun.kind,
                reach=delta + collar,
                outer=delta + outer_factor * collar,
            )
        )
    gaps = np.diff([p.center for p in patches], append=patches[0].center + L)
    for i, gap in enumerate(gaps):
        nxt = patches[(i + 1) % len(patches)]
        if patches[i].reach + nxt.reach >= gap:
            ratio = (patches[i].reach + nxt.reach) / gap
            suggestion = eps / (1.2 * ratio * ratio)
            raise RecoveryError(
                f"junction patches at {patches[i].center:.4g} and {nxt.center:.4g} overlap; "
                f"retry with eps <= {suggestion:.3g}"
            )
        limit = 0.45 * gap
        patches[i].outer = min(patches[i].outer, patches[i].half_width + limit)
        nxt.outer = min(nxt.outer, nxt.half_width + limit)
    return patches


def _closure_basis(u, t, h, patch, *, degenerate_tol=1e-10):
    """Two normalized bump directions for the closure correction in one patch.

    Returns (f, g); f is None in the antisymmetric one-parameter mode used
    when the cosine functional vanishes on the whole patch (jump of pi).
    """
    margin = max(2.0 * h, 0.05 * (patch.outer - patch.half_width))
    inner_edge = patch.half_width + margin
    room = patch.outer - inner_edge
    if room <= 4.0 * h:
        raise RecoveryError("patch too small to place correction bumps")
    radius = 0.5 * room
    L = t[-1] + h
    right = periodic_bump(t, L, patch.center + inner_edge + radius, radius)
    left = periodic_bump(t, L, patch.center - inner_edge - radius, radius)

    def t_cos(phi):
        return h * float(np.dot(phi, np.cos(u)))

    def t_sin(phi):
        return h * float(np.dot(phi, np.sin(u)))

    candidates = [left, right]
    tc = [t_cos(phi) for phi in candidates]
    if max(abs(x) for x in tc) < degenerate_tol:
        g = right - left  # antisymmetric about the kink
        ts_g = t_sin(g)
        if abs(ts_g) < degenerate_tol:
            raise RecoveryError("no usable correction direction in this patch")
        return None, g / ts_g
    k = int(np.argmax(np.abs(tc)))
    g = candidates[k] / tc[k]
    other = candidates[1 - k]
    f_raw = other - t_cos(other) * g
    ts_f = t_sin(f_raw)
    if abs(ts_f) < degenerate_tol:
        raise RecoveryError("correction bumps are degenerate against the sine functional")
    return f_raw / ts_f, g


def build_recovery(
    sharp: SharpState,
    eps: float,
    grid: Grid,
    params: ModelParams,
    *,
    outer_factor: float = 10.0,
) -> FieldState:
    state, _ = build_recovery_with_patches(sharp, eps, grid, params, outer_factor=outer_factor)
    return state


def build_recovery_with_patches(
    sharp: SharpState,
    eps: float,
    grid: Grid,
    params: ModelParams,
    *,
    outer_factor: float = 10.0,
) -> tuple[FieldState, list[KinkPatch]]:
    """Assemble the near-limit state for ``sharp`` and return it with its patches."""
    sharp.validate()
    L = grid.length
    if not math.isclose(L, sharp.total_length, rel_tol=1e-9):
        raise RecoveryError(
            f"grid length {L!r} does not match the sharp state length {sharp.total_length!r}"
        )
    h = grid.spacing
    n = grid.n_points
    t = grid.points()
    pot = params.potential
    patches = plan_patches(sharp, eps, grid, pot, outer_factor=outer_factor)

    angle = sharp.angle()
    winding = sharp.winding
    u = np.asarray(angle(t), dtype=float)

    positions = sharp.junction_positions()
    phases = np.array([seg.phase for seg in sharp.segments], dtype=float)
    seg_idx = np.searchsorted(positions, t, side="right") % len(sharp.segments)
    v = phases[seg_idx].copy()

    profile = optimal_profile(pot, 1.0 / math.sqrt(eps) + 1.0)
    n_seg = len(sharp.segments)
    for j, patch in enumerate(patches):
        pos = patch.center
        # tangent angle: linear interpolation across the inner interval
        if patch.jump > 0.0:
            delta = patch.half_width
            ua = float(angle(pos - delta))
            ub = float(angle(pos + delta))
            lo = int(math.ceil((pos - delta) / h))
            hi = int(math.floor((pos + delta) / h))
            for i in range(lo, hi + 1):
                tau = i * h
                val = ua + (ub - ua) * (tau - (pos - delta)) / (2.0 * delta)
                u[i % n] = val - (TWO_PI * winding if i >= n else 0.0)
        # phase field: ramp assembly around the junction
        ramp = transition_ramp(eps, patch.half_width, profile)
        before = float(sharp.segments[j].phase)
        after = float(sharp.segments[(j + 1) % n_seg].phase)
        lo = int(math.ceil((pos - ramp.width) / h))
        hi = int(math.floor((pos + ramp.width) / h))
        idx = np.arange(lo, hi + 1)
        d = idx * h - pos
        side = np.where(d >= 0.0, after, before)
        v[idx % n] = side * ramp(np.abs(d))

    # re-close the curve: target zero discrete defect via one patch correction
    kink_patches = [p for p in patches if p.jump > 0.0]
    if kink_patches:
        defect = closure_defect(FieldState(grid, u, winding, v))
        if float(np.hypot(*defect)) > 1e-13 * L:
            last_error = None
            for patch in kink_patches:
                try:
                    f, g = _closure_basis(u, t, h, patch)
                    u, alpha, beta = correct_closure(u, h, (0.0, 0.0), f, g)
                    patch.alpha, patch.beta = alpha, beta
                    patch.correction_basis = (f, g)
                    last_error = None
                    break
                except RecoveryError as err:
                    last_error = err
            if last_error is not None:
                raise last_error

    state = FieldState(grid, u, winding, v)

    if params.volume_constraint_active:
        target = params.m * L
        if abs(sharp.mass - target) > 1e-9 * L:
            raise RecoveryError(
                f"sharp state mass {sharp.mass!r} conflicts with the constraint target {target!r}"
            )
        bump = _plateau_bump(grid, patches, positions)
        state.v, _ = correct_volume(state.v, h, target, bump)
    return state, patches


def _plateau_bump(grid: Grid, patches: list, positions: np.ndarray) -> np.ndarray:
    """Unit-integral bump supported on the longest stretch untouched by any patch."""
    h = grid.spacing
    n = grid.n_points
    L = grid.length
    t = grid.points()
    touched = np.zeros(n, dtype=bool)
    for patch in patches:
        d = np.remainder(t - patch.center + L / 2.0, L) - L / 2.0
        touched |= np.abs(d) <= patch.reach
    free = ~touched
    if not np.any(free):
        raise RecoveryError("no phase plateau available for the volume correction")
    # longest circular run of free nodes
    idx = np.flatnonzero(free)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if len(runs) > 1 and idx[0] == 0 and idx[-1] == n - 1:
        runs[0] = np.concatenate((runs[-1] - n, runs[0]))
        runs.pop()
    best = max(runs, key=len)
    if len(best) < 8:
        raise RecoveryError("phase plateaus too narrow for the volume correction")
    center = float(best[len(best) // 2]) * h
    radius = 0.4 * len(best) * h
    bump = periodic_bump(t, L, center, radius)
    return bump / (h * float(np.sum(bump)))
