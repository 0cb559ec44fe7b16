"""Core types and energies for two-phase closed elastic curves.

A closed curve of length ``L`` is represented by its tangent angle ``u``
sampled on a uniform periodic arclength grid, together with a phase field
``v`` on the same grid.  The winding-aware forward difference of ``u`` is
the discrete curvature, so every energy below depends on ``u`` only through
its increments and is exactly invariant under rigid rotations.

Two energy functionals are provided.  ``phase_field_energy`` evaluates the
diffuse model

    sum_i h * [ v_i^2 (k_i - C(v_i))^2
                + eps ((v_{i+1}-v_i)/h)^2 + Phi(v_i)/eps
                + eps k_i^2 ]

with a double-well potential Phi and a phase-dependent preferred curvature
C.  ``sharp_energy`` evaluates the limit model for piecewise-smooth curves
with junctions: segments contribute the integral of (kappa - C(phase))^2
and a junction with tangent jump ``j`` costs ``sigma + sigma_hat * j``,
where sigma = 2*int_{-1}^{1} sqrt(Phi) (``interface_cost``) and
sigma_hat = 2*sqrt(Phi(0)) (``kink_cost``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi

QUARTIC_DOUBLE_WELL = "quartic_double_well"
SINGLE_WELL = "single_well"

JUNCTION_KINDS = ("interface", "ghost", "plain_interface")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic arclength grid: n_points cells of width length/n_points."""

    n_points: int
    length: float

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"grid needs at least 16 points, got {self.n_points}")
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise ValueError(f"grid length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    def points(self) -> np.ndarray:
        """Arclength positions t_i = i*h for i = 0..n-1."""
        return np.arange(self.n_points) * self.spacing


@dataclass(frozen=True)
class PotentialSpec:
    """Well potential: a*(1-v^2)^2 (double well) or a*(1-v)^2 (single well)."""

    family: str = QUARTIC_DOUBLE_WELL
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in (QUARTIC_DOUBLE_WELL, SINGLE_WELL):
            raise ValueError(f"unknown potential family {self.family!r}")
        if not self.scale > 0.0:
            raise ValueError(f"potential scale must be positive, got {self.scale}")

    def value(self, v):
        if self.family == QUARTIC_DOUBLE_WELL:
            w = 1.0 - np.square(v)
            return self.scale * np.square(w)
        return self.scale * np.square(1.0 - np.asarray(v, dtype=float))

    def derivative(self, v):
        if self.family == QUARTIC_DOUBLE_WELL:
            v = np.asarray(v, dtype=float)
            return -4.0 * self.scale * v * (1.0 - np.square(v))
        return -2.0 * self.scale * (1.0 - np.asarray(v, dtype=float))

    def second_derivative(self, v):
        if self.family == QUARTIC_DOUBLE_WELL:
            return 4.0 * self.scale * (3.0 * np.square(v) - 1.0)
        return 2.0 * self.scale * np.ones_like(np.asarray(v, dtype=float))

    def sqrt_value(self, v):
        if self.family == QUARTIC_DOUBLE_WELL:
            return math.sqrt(self.scale) * np.abs(1.0 - np.square(v))
        return math.sqrt(self.scale) * np.abs(1.0 - np.asarray(v, dtype=float))


def potential_eval(pot: PotentialSpec, v: float) -> tuple[float, float, float]:
    """Value, derivative and square root of the well potential at v."""
    return float(pot.value(v)), float(pot.derivative(v)), float(pot.sqrt_value(v))


def interface_cost(pot: PotentialSpec) -> float:
    """Cost of one full phase transition: 2*int_{-1}^{1} sqrt(Phi(v)) dv.

    Defined for the symmetric double well only; in single-well mode there is
    a single material phase and interface accounting is disabled.
    """
    if pot.family != QUARTIC_DOUBLE_WELL:
        raise ValueError("interface cost requires the symmetric double-well potential")
    val, err = integrate.quad(pot.sqrt_value, -1.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    if err > 1e-10:
        raise RuntimeError(f"interface-cost quadrature did not converge (err {err:g})")
    return 2.0 * val


def kink_cost(pot: PotentialSpec) -> float:
    """Bending cost per radian of tangent jump: 2*sqrt(Phi(0))."""
    return 2.0 * math.sqrt(float(pot.value(0.0)))


@dataclass(frozen=True)
class CurvatureSpec:
    """Preferred curvature as a function of the phase.

    Cubic Hermite interpolation between C(-1) = c_minus and C(+1) = c_plus
    with zero endpoint slopes, clamped to the endpoint values outside [-1, 1].
    """

    c_minus: float = 1.0
    c_plus: float = 2.0

    def value(self, v):
        s = (np.clip(v, -1.0, 1.0) + 1.0) / 2.0
        return self.c_minus + (self.c_plus - self.c_minus) * s * s * (3.0 - 2.0 * s)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        s = (np.clip(v, -1.0, 1.0) + 1.0) / 2.0
        inside = (v >= -1.0) & (v <= 1.0)
        return np.where(inside, 3.0 * (self.c_plus - self.c_minus) * s * (1.0 - s), 0.0)

    def second_derivative(self, v):
        v = np.asarray(v, dtype=float)
        s = (np.clip(v, -1.0, 1.0) + 1.0) / 2.0
        inside = (v >= -1.0) & (v <= 1.0)
        return np.where(inside, 1.5 * (self.c_plus - self.c_minus) * (1.0 - 2.0 * s), 0.0)


def spontaneous_curvature(spec: CurvatureSpec, v: float) -> tuple[float, float]:
    """Preferred curvature and its derivative at phase value v."""
    return float(spec.value(v)), float(spec.derivative(v))


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the diffuse model: interface width, mean phase, wells, C."""

    eps: float
    m: float | None = 0.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    curvature_spec: CurvatureSpec = field(default_factory=CurvatureSpec)
    volume_constraint_active: bool = True

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.volume_constraint_active:
            if self.m is None or not -1.0 < self.m < 1.0:
                raise ValueError(
                    f"active volume constraint needs m in (-1, 1), got {self.m}"
                )


@dataclass
class FieldState:
    """Tangent angle and phase field on a periodic grid.

    ``u`` is the unwrapped tangent angle at the nodes; crossing the seam adds
    2*pi*winding, so the discrete curvature at the last edge uses
    u_n = u_0 + 2*pi*winding.  ``v`` is plainly periodic.
    """

    grid: Grid
    u: np.ndarray
    winding: int
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        n = self.grid.n_points
        if self.u.shape != (n,) or self.v.shape != (n,):
            raise ValueError(
                f"field arrays must have shape ({n},), got u {self.u.shape}, v {self.v.shape}"
            )

    def curvature(self) -> np.ndarray:
        """Forward-difference curvature per edge, with the 2*pi*winding seam term."""
        h = self.grid.spacing
        seam = self.u[0] + TWO_PI * self.winding
        return np.diff(self.u, append=seam) / h

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.u.copy(), self.winding, self.v.copy())


@dataclass(frozen=True)
class EnergyBreakdown:
    """Curvature, interface/potential and regularization parts of an energy."""

    curvature: float
    interface: float
    regularization: float

    @property
    def total(self) -> float:
        return self.curvature + self.interface + self.regularization


def phase_field_energy(state: FieldState, params: ModelParams) -> EnergyBreakdown:
    """Diffuse energy of a field state; all sums periodic, curvature seam-aware."""
    h = state.grid.spacing
    eps = params.eps
    kappa = state.curvature()
    v = state.v
    c_of_v = params.curvature_spec.value(v)
    dv = np.diff(v, append=v[0]) / h
    curv = h * float(np.sum(v * v * np.square(kappa - c_of_v)))
    inter = h * float(np.sum(eps * np.square(dv) + params.potential.value(v) / eps))
    reg = eps * h * float(np.sum(np.square(kappa)))
    return EnergyBreakdown(curv, inter, reg)


def energy_in_window(
    state: FieldState, params: ModelParams, center: float, half_width: float
) -> float:
    """Diffuse energy restricted to nodes within circular distance half_width of center.

    Node i carries the full density of its cell (curvature, interface and
    regularization terms of edge/node i), so window sums over a partition of
    the grid add up to the total energy.
    """
    h = state.grid.spacing
    eps = params.eps
    t = state.grid.points()
    L = state.grid.length
    d = np.remainder(t - center + L / 2.0, L) - L / 2.0
    mask = np.abs(d) <= half_width
    kappa = state.curvature()
    v = state.v
    c_of_v = params.curvature_spec.value(v)
    dv = np.diff(v, append=v[0]) / h
    density = (
        v * v * np.square(kappa - c_of_v)
        + eps * np.square(dv)
        + params.potential.value(v) / eps
        + eps * np.square(kappa)
    )
    return h * float(np.sum(density[mask]))


def reconstruct_curve(state: FieldState, base_point=(0.0, 0.0)) -> np.ndarray:
    """Planar polyline of the discrete curve: q_{i+1} = q_i + h*(cos u_i, sin u_i)."""
    h = state.grid.spacing
    n = state.grid.n_points
    pts = np.empty((n + 1, 2))
    pts[0] = base_point
    np.cumsum(h * np.cos(state.u), out=pts[1:, 0])
    np.cumsum(h * np.sin(state.u), out=pts[1:, 1])
    pts[1:] += pts[0]
    return pts


def closure_defect(state: FieldState) -> np.ndarray:
    """Discrete closing defect (h*sum cos u, h*sum sin u); zero for a closed curve."""
    h = state.grid.spacing
    return np.array([h * float(np.sum(np.cos(state.u))), h * float(np.sum(np.sin(state.u)))])


def jump_magnitude(angle_before: float, angle_after: float) -> float:
    """Enclosed angle of the two unit tangents, in [0, pi]."""
    return abs(math.remainder(angle_after - angle_before, TWO_PI))


# --- sharp (limit) states -------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """One smooth piece of a limit curve.

    ``curvature`` holds midpoint samples on equal subintervals of the
    segment, interpreted as a piecewise-constant curvature profile; a single
    sample describes a circular arc.
    """

    length: float
    phase: int
    curvature: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "curvature", np.atleast_1d(np.asarray(self.curvature, dtype=float)))
        if not self.length > 0.0:
            raise ValueError(f"segment length must be positive, got {self.length}")
        if self.phase not in (-1, 1):
            raise ValueError(f"segment phase must be +1 or -1, got {self.phase}")
        if not np.all(np.isfinite(self.curvature)):
            raise ValueError("segment curvature samples must be finite")

    @property
    def turning(self) -> float:
        """Integral of curvature over the segment (midpoint rule, exact here)."""
        return self.length / self.curvature.size * float(np.sum(self.curvature))


@dataclass(frozen=True)
class Junction:
    """Point where the tangent and/or the phase jumps.

    ``turn`` is the signed tangent jump used for reconstruction; its modulus,
    the enclosed angle ``jump`` in [0, pi], is what the sharp energy charges.
    """

    turn: float
    kind: str

    def __post_init__(self):
        if self.kind not in JUNCTION_KINDS:
            raise ValueError(f"unknown junction kind {self.kind!r}")
        if abs(self.turn) > math.pi + 1e-12:
            raise ValueError(f"junction turn must lie in [-pi, pi], got {self.turn}")

    @property
    def jump(self) -> float:
        return abs(self.turn)


class SharpAngle:
    """Piecewise evaluation of the tangent angle of a sharp state.

    The curvature is piecewise constant (one piece per curvature sample) and
    the angle jumps by the signed junction turns.  Evaluation extends
    periodically via u(t + L) = u(t) + 2*pi*winding; at a junction position
    the post-jump value is returned.
    """

    def __init__(self, sharp: "SharpState"):
        edges = [0.0]
        kappas = []
        turns_after_piece = []
        for i, seg in enumerate(sharp.segments):
            sub = seg.length / seg.curvature.size
            for j, k in enumerate(seg.curvature):
                edges.append(edges[-1] + sub)
                kappas.append(float(k))
                turns_after_piece.append(0.0)
            if sharp.junctions:
                turns_after_piece[-1] = sharp.junctions[i].turn
        self.length = edges[-1]
        self.edges = np.asarray(edges)
        self.kappas = np.asarray(kappas)
        # base angle at the left edge of each piece (post-jump)
        base = np.concatenate(
            ([0.0], np.cumsum(self.kappas * np.diff(self.edges) + np.asarray(turns_after_piece)))
        )
        self.base = base[:-1]
        self.total_turning = float(base[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        wraps = np.floor(t / self.length)
        r = t - wraps * self.length
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, self.kappas.size - 1)
        return self.base[idx] + self.kappas[idx] * (r - self.edges[idx]) + wraps * self.total_turning

    def closure_integral(self) -> np.ndarray:
        """Exact (int cos u, int sin u) over one period, in closed form per piece."""
        w = np.diff(self.edges)
        a = self.base
        k = self.kappas
        small = np.abs(k) * w < 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            ic = (np.sin(a + k * w) - np.sin(a)) / k
            is_ = (np.cos(a) - np.cos(a + k * w)) / k
        mid = a + 0.5 * k * w
        ic = np.where(small, w * np.cos(mid), ic)
        is_ = np.where(small, w * np.sin(mid), is_)
        return np.array([float(np.sum(ic)), float(np.sum(is_))])


@dataclass
class SharpState:
    """Piecewise description of a limit curve.

    Junction i separates segment i from segment (i+1) mod n, cyclically; a
    smooth closed curve is a single segment with no junctions.
    """

    segments: list
    junctions: list

    def __post_init__(self):
        self.segments = list(self.segments)
        self.junctions = list(self.junctions)
        n_seg, n_jun = len(self.segments), len(self.junctions)
        if n_seg == 0:
            raise ValueError("sharp state needs at least one segment")
        if n_jun not in (0, n_seg):
            raise ValueError(
                f"need one junction per segment (cyclically) or none, got {n_seg} segments, {n_jun} junctions"
            )

    @property
    def total_length(self) -> float:
        return float(sum(seg.length for seg in self.segments))

    @property
    def mass(self) -> float:
        return float(sum(seg.phase * seg.length for seg in self.segments))

    @property
    def total_turning(self) -> float:
        turning = sum(seg.turning for seg in self.segments)
        turning += sum(j.turn for j in self.junctions)
        return float(turning)

    @property
    def winding(self) -> int:
        return int(round(self.total_turning / TWO_PI))

    def junction_positions(self) -> np.ndarray:
        """Arclength position of junction i (end of segment i); the last sits at L."""
        return np.cumsum([seg.length for seg in self.segments])[: len(self.junctions)]

    def angle(self) -> SharpAngle:
        return SharpAngle(self)

    def closure_defect(self) -> np.ndarray:
        return self.angle().closure_integral()

    def validate(
        self,
        *,
        closure_tol: float = 1e-8,
        turning_tol: float = 1e-8,
        target_mass: float | None = None,
        mass_tol: float = 1e-12,
    ) -> None:
        n = len(self.segments)
        for i, jun in enumerate(self.junctions):
            before = self.segments[i].phase
            after = self.segments[(i + 1) % n].phase
            if jun.kind == "ghost":
                if before != after:
                    raise ValueError(f"ghost junction {i} must join equal phases")
                if not jun.jump > 0.0:
                    raise ValueError(f"ghost junction {i} needs a positive tangent jump")
            else:
                if before == after:
                    raise ValueError(f"{jun.kind} junction {i} must separate different phases")
                if jun.kind == "plain_interface" and jun.jump > 1e-12:
                    raise ValueError(f"plain interface {i} must have zero tangent jump")
        turning = self.total_turning
        if abs(turning - TWO_PI * round(turning / TWO_PI)) > turning_tol:
            raise ValueError(f"total turning {turning!r} is not a multiple of 2*pi")
        defect = self.closure_defect()
        if float(np.hypot(*defect)) > closure_tol * self.total_length:
            raise ValueError(f"sharp state does not close: defect {defect}")
        if target_mass is not None and abs(self.mass - target_mass) > mass_tol * self.total_length:
            raise ValueError(
                f"phase mass {self.mass!r} violates the volume constraint target {target_mass!r}"
            )


def sharp_energy(sharp: SharpState, params: ModelParams, *, check: bool = True) -> EnergyBreakdown:
    """Limit energy: segment bending integrals plus junction costs, no regularization."""
    if check:
        target = params.m * sharp.total_length if params.volume_constraint_active else None
        sharp.validate(target_mass=target)
    curv = 0.0
    for seg in sharp.segments:
        c_pref = float(params.curvature_spec.value(float(seg.phase)))
        curv += seg.length / seg.curvature.size * float(np.sum(np.square(seg.curvature - c_pref)))
    inter = 0.0
    if sharp.junctions:
        sigma = interface_cost(params.potential)
        sigma_hat = kink_cost(params.potential)
        inter = float(sum(sigma + sigma_hat * j.jump for j in sharp.junctions))
    return EnergyBreakdown(curv, inter, 0.0)
