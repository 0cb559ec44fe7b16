"""File formats: snapshots, sharp-state files, CSV logs and SVG drawings.

All floating-point output uses shortest round-trip decimal formatting, so
identical inputs produce byte-identical files and snapshots can be read back
without losing a bit.

Snapshot CSV: comment header lines ``# key=value`` (step, time, winding and
the energy breakdown), a ``t,u,v,x,y`` header row, then n_points+1 data rows
(the closing point is repeated with t = L and u = u_0 + 2*pi*winding).

Sharp-state text file: one line per piece, in cyclic order,

    segment <length> <phase> <curvature samples...>
    junction <turn> <kind>

where segment and junction lines alternate starting with a segment (a single
smooth closed curve is one segment line and no junctions), phase is +1 or
-1, the curvature samples are midpoint values on equal subintervals, turn is
the signed tangent jump and kind is interface, ghost or plain_interface.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .model import (
    TWO_PI,
    EnergyBreakdown,
    FieldState,
    Grid,
    Junction,
    Segment,
    SharpState,
    reconstruct_curve,
)

ENERGY_LOG_COLUMNS = (
    "step,time,e_total,e_curvature,e_interface,e_regularization,"
    "mass_defect,closure_x,closure_y"
)

SWEEP_COLUMNS = (
    "eps,n_points,e_recovery_total,e_recovery_curv,e_recovery_int,"
    "e_recovery_reg,e_relaxed_total,e_sharp_total,gap"
)


def fmt(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_energy_log(path, log) -> None:
    lines = [ENERGY_LOG_COLUMNS]
    for entry in log:
        e = entry.energy
        lines.append(
            ",".join(
                [
                    str(entry.step),
                    fmt(entry.time),
                    fmt(e.total),
                    fmt(e.curvature),
                    fmt(e.interface),
                    fmt(e.regularization),
                    fmt(entry.mass_defect),
                    fmt(entry.closure[0]),
                    fmt(entry.closure[1]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_table(path, table) -> None:
    lines = [SWEEP_COLUMNS]
    for row in table.rows:
        rec = row.e_recovery
        lines.append(
            ",".join(
                [
                    fmt(row.eps),
                    str(row.n_points),
                    fmt(rec.total),
                    fmt(rec.curvature),
                    fmt(rec.interface),
                    fmt(rec.regularization),
                    fmt(row.e_relaxed.total) if row.e_relaxed is not None else "",
                    fmt(row.e_sharp.total),
                    fmt(row.gap),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshot(path, state: FieldState, *, step: int, time: float, energy: EnergyBreakdown) -> None:
    points = reconstruct_curve(state)
    n = state.grid.n_points
    h = state.grid.spacing
    lines = [
        "# kinkflow snapshot",
        f"# step={step}",
        f"# time={fmt(time)}",
        f"# winding={state.winding}",
        f"# e_total={fmt(energy.total)}",
        f"# e_curvature={fmt(energy.curvature)}",
        f"# e_interface={fmt(energy.interface)}",
        f"# e_regularization={fmt(energy.regularization)}",
        "t,u,v,x,y",
    ]
    u_close = state.u[0] + TWO_PI * state.winding
    for i in range(n + 1):
        t = i * h
        u = state.u[i] if i < n else u_close
        v = state.v[i % n]
        lines.append(
            ",".join([fmt(t), fmt(u), fmt(v), fmt(points[i, 0]), fmt(points[i, 1])])
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[FieldState, dict]:
    """Snapshot file back to a field state plus its header metadata."""
    meta = {}
    rows = []
    header_seen = False
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "t,u,v,x,y":
                raise ValueError(f"unexpected snapshot column header {line!r}")
            header_seen = True
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if len(rows) < 17:
        raise ValueError("snapshot too short: need n_points+1 >= 17 rows")
    data = np.asarray(rows)
    n = data.shape[0] - 1
    length = float(data[-1, 0])
    u = data[:n, 1]
    v = data[:n, 2]
    if "winding" in meta:
        winding = int(meta["winding"])
    else:
        winding = int(round((data[-1, 1] - data[0, 1]) / TWO_PI))
    state = FieldState(Grid(n, length), u, winding, v)
    return state, meta


def write_sharp(path, sharp: SharpState) -> None:
    lines = ["# kinkflow sharp state"]
    for i, seg in enumerate(sharp.segments):
        samples = " ".join(fmt(k) for k in seg.curvature)
        lines.append(f"segment {fmt(seg.length)} {seg.phase:+d} {samples}")
        if sharp.junctions:
            jun = sharp.junctions[i]
            lines.append(f"junction {fmt(jun.turn)} {jun.kind}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_sharp(path) -> SharpState:
    segments = []
    junctions = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "segment":
            if len(junctions) != len(segments):
                raise ValueError(f"{path}:{lineno}: junction line missing before new segment")
            if len(tokens) < 4:
                raise ValueError(f"{path}:{lineno}: segment needs length, phase and >= 1 sample")
            segments.append(
                Segment(float(tokens[1]), int(tokens[2]), np.array([float(t) for t in tokens[3:]]))
            )
        elif tokens[0] == "junction":
            if len(tokens) != 3:
                raise ValueError(f"{path}:{lineno}: junction needs a turn and a kind")
            if len(junctions) != len(segments) - 1:
                raise ValueError(f"{path}:{lineno}: junction line out of place")
            junctions.append(Junction(float(tokens[1]), tokens[2]))
        else:
            raise ValueError(f"{path}:{lineno}: unknown line kind {tokens[0]!r}")
    if not segments:
        raise ValueError(f"{path}: no segments found")
    if junctions and len(junctions) != len(segments):
        raise ValueError(
            f"{path}: need one junction per segment (cyclically), got "
            f"{len(segments)} segments and {len(junctions)} junctions"
        )
    return SharpState(segments, junctions)


def _diverging_color(v: float) -> str:
    """Two-color diverging map through white: -1 -> blue, 0 -> white, +1 -> red."""
    t = (min(max(v, -1.0), 1.0) + 1.0) / 2.0
    blue, white, red = (33, 102, 172), (247, 247, 247), (178, 24, 43)
    if t < 0.5:
        a, b, s = blue, white, 2.0 * t
    else:
        a, b, s = white, red, 2.0 * t - 1.0
    rgb = tuple(round(x + (y - x) * s) for x, y in zip(a, b))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def write_curve_svg(path, points: np.ndarray, v: np.ndarray, *, pixels: int = 640) -> None:
    """Closed curve drawing: one closed path plus per-edge strokes colored by v.

    The viewport is fitted to the curve with a 5% margin; the y axis is
    flipped so the drawing keeps the mathematical orientation.
    """
    xs, ys = points[:, 0], -points[:, 1]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    span = max(x1 - x0, y1 - y0, 1e-12)
    pad = 0.05 * span
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    width = x1 - x0
    height = y1 - y0
    stroke = 0.004 * span
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{pixels}" '
        f'height="{max(1, round(pixels * height / width))}" '
        f'viewBox="{fmt(x0)} {fmt(y0)} {fmt(width)} {fmt(height)}">'
    ]
    d = "M " + " L ".join(f"{fmt(x)} {fmt(y)}" for x, y in zip(xs[:-1], ys[:-1])) + " Z"
    parts.append(
        f'<path d="{d}" fill="none" stroke="#bbbbbb" stroke-width="{fmt(0.5 * stroke)}"/>'
    )
    n = points.shape[0] - 1
    for i in range(n):
        parts.append(
            f'<line x1="{fmt(xs[i])}" y1="{fmt(ys[i])}" x2="{fmt(xs[i + 1])}" '
            f'y2="{fmt(ys[i + 1])}" stroke="{_diverging_color(float(v[i]))}" '
            f'stroke-width="{fmt(stroke)}" stroke-linecap="round"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
