"""Command-line front end: evolve, sweep, recover and energy subcommands.

Exit codes: 0 success, 2 configuration/usage errors, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, io
from .config import ConfigError, build_initial_state, describe_keys, load_config
from .flow import STOP_BLOW_UP, run_flow
from .model import phase_field_energy
from .recovery import RecoveryError, build_recovery

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOW_UP = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinkflow",
        description=(
            "Phase-field relaxation and sharp-interface energies for two-phase "
            "closed elastic curves with kinks."
        ),
        epilog=describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evolve = sub.add_parser("evolve", help="relax a configured initial state by gradient flow")
    evolve.add_argument("--config", required=True, help="experiment config file")

    sweep = sub.add_parser("sweep", help="recovery energies over a decreasing eps list")
    sweep.add_argument("--config", required=True, help="experiment config file")
    sweep.add_argument("--sharp", required=True, help="sharp-state file")
    sweep.add_argument("--eps", required=True, help="comma-separated, strictly decreasing values")
    sweep.add_argument("--out", help="output CSV (default <output.directory>/sweep.csv)")
    sweep.add_argument("--relax", action="store_true", help="also relax each recovery by flow")
    sweep.add_argument("--workers", type=int, default=1, help="row parallelism (capped by KINKFLOW_THREADS)")

    recover = sub.add_parser("recover", help="build a recovery state from a sharp-state file")
    recover.add_argument("--config", required=True, help="experiment config file")
    recover.add_argument("--sharp", required=True, help="sharp-state file")
    recover.add_argument("--eps", type=float, required=True, help="interface width to build at")
    recover.add_argument("--out", help="output snapshot (default <output.directory>/recovery.csv)")

    energy = sub.add_parser("energy", help="print the energy breakdown of a snapshot")
    energy.add_argument("--config", required=True, help="experiment config file")
    energy.add_argument("--state", required=True, help="snapshot file")
    return parser


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    state = build_initial_state(cfg)
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)

    every = cfg.output.snapshot_every

    def hook(step, time, snap_state):
        if every <= 0 or (step % every != 0 and step != 0):
            return
        energy = phase_field_energy(snap_state, cfg.model)
        path = outdir / f"snapshot_{step:08d}.csv"
        io.write_snapshot(path, snap_state, step=step, time=time, energy=energy)
        if cfg.output.svg:
            points = io.reconstruct_curve(snap_state)
            io.write_curve_svg(path.with_suffix(".svg"), points, snap_state.v)

    result = run_flow(state, cfg.model, cfg.flow, snapshot_hook=hook)
    io.write_energy_log(outdir / "energy.csv", result.energy_log)
    last = result.energy_log[-1]
    final_path = outdir / "final.csv"
    io.write_snapshot(
        final_path, result.final, step=last.step, time=last.time, energy=last.energy
    )
    if cfg.output.svg:
        points = io.reconstruct_curve(result.final)
        io.write_curve_svg(final_path.with_suffix(".svg"), points, result.final.v)
    print(f"stop_reason={result.stop_reason} steps={last.step} e_total={io.fmt(last.energy.total)}")
    if result.stop_reason == STOP_BLOW_UP:
        print("flow blew up: reduce flow.dt or increase the stabilization", file=sys.stderr)
        return EXIT_BLOW_UP
    return EXIT_OK


def cmd_sweep(args, parser) -> int:
    cfg = load_config(args.config)
    eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    if not eps_list:
        parser.error("--eps: empty list")
    sharp = io.read_sharp(args.sharp)
    table = analysis.gamma_sweep(
        sharp,
        eps_list,
        cfg.model,
        relax=args.relax,
        flow_params=cfg.flow if args.relax else None,
        workers=args.workers,
    )
    out = Path(args.out) if args.out else Path(cfg.output.directory) / "sweep.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_sweep_table(out, table)
    print(f"wrote {out} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_recover(args) -> int:
    cfg = load_config(args.config)
    sharp = io.read_sharp(args.sharp)
    state = build_recovery(sharp, args.eps, cfg.grid, cfg.model)
    from dataclasses import replace

    energy = phase_field_energy(state, replace(cfg.model, eps=args.eps))
    out = Path(args.out) if args.out else Path(cfg.output.directory) / "recovery.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_snapshot(out, state, step=0, time=0.0, energy=energy)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_energy(args) -> int:
    cfg = load_config(args.config)
    state, _ = io.read_snapshot(args.state)
    energy = phase_field_energy(state, cfg.model)
    print(f"e_curvature={io.fmt(energy.curvature)}")
    print(f"e_interface={io.fmt(energy.interface)}")
    print(f"e_regularization={io.fmt(energy.regularization)}")
    print(f"e_total={io.fmt(energy.total)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "evolve":
            return cmd_evolve(args)
        if args.command == "sweep":
            return cmd_sweep(args, parser)
        if args.command == "recover":
            return cmd_recover(args)
        return cmd_energy(args)
    except (ConfigError, RecoveryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
