"""Post-processing of field states and limit-convergence experiments.

Interfaces are located as sign changes of the phase field; kink regions as
connected components where |v| stays inside a band around zero, which is
where the tangent turning concentrates.  ``extract_sharp`` turns a
near-limit field into a piecewise sharp description, and ``gamma_sweep``
tabulates recovery energies against the sharp energy over a decreasing list
of interface widths.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .flow import FlowParams, run_flow
from .model import (
    EnergyBreakdown,
    FieldState,
    Grid,
    ModelParams,
    Junction,
    Segment,
    SharpState,
    jump_magnitude,
    phase_field_energy,
    sharp_energy,
)
from .recovery import build_recovery, kink_half_width

THREADS_ENV = "KINKFLOW_THREADS"


@dataclass(frozen=True)
class DetectionThresholds:
    """Detector bands: |v| <= zero_band marks kink regions; detections closer
    than min_separation are merged.  max_component_width rejects components
    wider than a transition region can be (None = a quarter of the curve)."""

    zero_band: float = 0.1
    interface_band: float = 0.0
    min_separation: float = 0.0
    max_component_width: float | None = None

    def __post_init__(self):
        if not 0.0 < self.zero_band < 1.0:
            raise ValueError(f"zero_band must lie in (0, 1), got {self.zero_band}")


@dataclass(frozen=True)
class KinkDetection:
    position: float
    jump_estimate: float
    turn_estimate: float
    sign_change: bool


@dataclass(frozen=True)
class SegmentStats:
    length: float
    mean_curvature: float
    std_curvature: float


@dataclass(frozen=True)
class SweepRow:
    eps: float
    n_points: int
    e_recovery: EnergyBreakdown
    e_relaxed: EnergyBreakdown | None
    e_sharp: EnergyBreakdown

    @property
    def gap(self) -> float:
        return self.e_recovery.total - self.e_sharp.total


@dataclass
class SweepTable:
    rows: list

    def __post_init__(self):
        eps = [row.eps for row in self.rows]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError(f"sweep eps values must be strictly decreasing, got {eps}")


def _merge_circular(positions: list[float], length: float, min_sep: float) -> list[float]:
    if min_sep <= 0.0 or len(positions) < 2:
        return sorted(positions)
    positions = sorted(positions)
    merged = [[positions[0]]]
    for p in positions[1:]:
        if p - merged[-1][-1] < min_sep:
            merged[-1].append(p)
        else:
            merged.append([p])
    # wrap-around merge of the first and last cluster
    if len(merged) > 1 and (positions[0] + length) - merged[-1][-1] < min_sep:
        first = merged.pop(0)
        merged[-1].extend(p + length for p in first)
    return sorted(float(np.mean(c)) % length for c in merged)


def detect_interfaces(state: FieldState, th: DetectionThresholds) -> list[float]:
    """Arclength positions where v changes sign, refined by linear interpolation."""
    v = state.v
    h = state.grid.spacing
    vn = np.append(v, v[0])
    crossings = []
    for i in range(state.grid.n_points):
        a, b = vn[i], vn[i + 1]
        if a == 0.0 and b == 0.0:
            continue
        if a * b < 0.0:
            crossings.append((i + a / (a - b)) * h)
        elif a == 0.0 and (vn[i - 1] * b) < 0.0:
            crossings.append(i * h)
    return _merge_circular(crossings, state.grid.length, th.min_separation)


def _zero_band_components(v: np.ndarray, band: float) -> list[np.ndarray]:
    mask = np.abs(v) <= band
    if not mask.any():
        return []
    if mask.all():
        return [np.arange(v.size)]
    idx = np.flatnonzero(mask)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = [list(r) for r in np.split(idx, breaks + 1)]
    if len(runs) > 1 and idx[0] == 0 and idx[-1] == v.size - 1:
        runs[0] = [i - v.size for i in runs[-1]] + runs[0]
        runs.pop()
    return [np.asarray(r) for r in runs]


def detect_kinks(state: FieldState, th: DetectionThresholds) -> list[KinkDetection]:
    """Connected near-zero components of v with their concentrated turning.

    Ghost dips (no sign change) are reported alongside interface regions;
    the turning estimate sums the angle increments across the component
    (bordering edges included) and is reduced to the enclosed angle in
    [0, pi].
    """
    n = state.grid.n_points
    h = state.grid.spacing
    L = state.grid.length
    max_width = th.max_component_width if th.max_component_width is not None else 0.25 * L
    increments = state.curvature() * h  # seam-aware angle step per edge, periodic
    out = []
    for comp in _zero_band_components(state.v, th.zero_band):
        if comp.size * h > max_width:
            continue
        lo, hi = int(comp[0]), int(comp[-1])
        edges = np.arange(lo - 1, hi + 1)
        raw = float(np.sum(increments[edges % n]))
        turn = math.remainder(raw, 2.0 * math.pi)
        center = (float(np.mean(comp)) * h) % L
        before = state.v[(lo - 1) % n]
        after = state.v[(hi + 1) % n]
        out.append(KinkDetection(center, abs(turn), turn, bool(before * after < 0.0)))
    return out


def extract_sharp(
    state: FieldState,
    th: DetectionThresholds,
    params: ModelParams,
    *,
    plain_jump_threshold: float = 0.05,
) -> SharpState:
    """Piecewise sharp description of a near-limit field.

    Junctions come from the near-zero components of v (positions refined to
    the sign change for interfaces); segments between them carry the sign of
    v and the sampled curvature.  Sign changes with turning below
    plain_jump_threshold become plain interfaces with zero jump.
    """
    n = state.grid.n_points
    h = state.grid.spacing
    L = state.grid.length
    detections = detect_kinks(state, th)
    interfaces = detect_interfaces(state, th)
    kappa = state.curvature()
    t = state.grid.points()

    if not detections:
        phase = 1 if float(np.mean(state.v)) >= 0.0 else -1
        return SharpState([Segment(L, phase, kappa.copy())], [])

    events = []
    for det in detections:
        position = det.position
        if det.sign_change and interfaces:
            # snap to the interpolated zero crossing inside the component
            gaps = [
                abs(math.remainder(p - det.position, L)) for p in interfaces
            ]
            k = int(np.argmin(gaps))
            position = interfaces[k]
        events.append((position % L, det))
    events.sort(key=lambda item: item[0])
    for (pa, da), (pb, db) in zip(events, events[1:]):
        if pb - pa <= 0.0:
            raise ValueError("overlapping junction detections; refine the thresholds")

    positions = [p for p, _ in events]
    segments = []
    junctions = []
    n_ev = len(events)
    for i, (pos, det) in enumerate(events):
        nxt = positions[(i + 1) % n_ev] + (L if i + 1 == n_ev else 0.0)
        length = nxt - pos
        if length <= 0.0:
            raise ValueError("detections leave a segment of nonpositive length")
        inside = np.flatnonzero(
            (np.remainder(t - pos, L) < length) & (np.remainder(t - pos, L) > 0.0)
        )
        if inside.size == 0:
            raise ValueError("a segment contains no grid nodes; detections too close")
        phase = 1 if float(np.mean(state.v[inside])) >= 0.0 else -1
        segments.append(Segment(length, phase, kappa[inside].copy()))
        if det.sign_change:
            if det.jump_estimate < plain_jump_threshold:
                junctions.append(Junction(0.0, "plain_interface"))
            else:
                junctions.append(Junction(det.turn_estimate, "interface"))
        else:
            turn = det.turn_estimate if det.jump_estimate > 0.0 else 1e-12
            junctions.append(Junction(turn, "ghost"))
    # junction i must follow segment i: rotate so segments start after event 0
    junctions = junctions[1:] + junctions[:1]
    return SharpState(segments, junctions)


def segment_stats(state: FieldState, cuts: list[float], collar: float = 0.0) -> list[SegmentStats]:
    """Per-segment curvature statistics between consecutive cut positions.

    A collar of the given width around each cut is excluded from the
    statistics (transition regions are not part of the limit arcs).
    """
    L = state.grid.length
    t = state.grid.points()
    kappa = state.curvature()
    if not cuts:
        return [SegmentStats(L, float(np.mean(kappa)), float(np.std(kappa)))]
    cuts = sorted(float(c) % L for c in cuts)
    out = []
    n_cuts = len(cuts)
    for i, lo in enumerate(cuts):
        hi = cuts[(i + 1) % n_cuts] + (L if i + 1 == n_cuts else 0.0)
        length = hi - lo
        rel = np.remainder(t - lo, L)
        inside = (rel > collar) & (rel < length - collar)
        if not np.any(inside):
            out.append(SegmentStats(length, math.nan, math.nan))
            continue
        vals = kappa[inside]
        out.append(SegmentStats(length, float(np.mean(vals)), float(np.std(vals))))
    return out


@dataclass(frozen=True)
class GridPolicy:
    """Resolution rule for sweeps: n grows like 1/eps, and every kink's
    smoothing half-width keeps at least points_per_half_width cells."""

    points_per_eps: float = 24.0
    min_points: int = 256
    points_per_half_width: float = 8.0

    def n_points(self, eps: float, sharp: SharpState, params: ModelParams) -> int:
        L = sharp.total_length
        n = max(self.min_points, int(math.ceil(self.points_per_eps * L / eps)))
        jumps = [j.jump for j in sharp.junctions if j.jump > 0.0]
        if jumps:
            delta_min = kink_half_width(min(jumps), params.potential, eps)
            n = max(n, int(math.ceil(self.points_per_half_width * L / delta_min)))
        return n


def _max_workers(requested: int | None) -> int:
    cap = os.environ.get(THREADS_ENV)
    cap = int(cap) if cap else None
    workers = requested if requested is not None else 1
    if cap is not None:
        workers = min(workers, cap)
    return max(1, workers)


def gamma_sweep(
    sharp: SharpState,
    eps_list,
    params: ModelParams,
    grid_policy: GridPolicy | None = None,
    relax: bool = False,
    flow_params: FlowParams | None = None,
    workers: int | None = None,
) -> SweepTable:
    """Recovery (and optionally relaxed) energies against the sharp energy.

    Rows are independent and may run on a small thread pool; the
    KINKFLOW_THREADS environment variable caps the pool size.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps list must not be empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps list must be strictly decreasing, got {eps_list}")
    if relax and flow_params is None:
        raise ValueError("relax=True needs flow_params")
    policy = grid_policy if grid_policy is not None else GridPolicy()
    e_sharp = sharp_energy(sharp, params)

    def one_row(eps: float) -> SweepRow:
        row_params = replace(params, eps=eps)
        grid = Grid(policy.n_points(eps, sharp, params), sharp.total_length)
        state = build_recovery(sharp, eps, grid, row_params)
        e_rec = phase_field_energy(state, row_params)
        e_rel = None
        if relax:
            result = run_flow(state, row_params, flow_params)
            e_rel = result.energy_log[-1].energy
        return SweepRow(eps, grid.n_points, e_rec, e_rel, e_sharp)

    n_workers = _max_workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(one_row, eps_list))
    else:
        rows = [one_row(eps) for eps in eps_list]
    return SweepTable(rows)
