"""Command-line entry points.

    curveflow run --config cfg.json [--out DIR] [--svg] [--solver dense]
    curveflow presets NAME
    curveflow convergence --preset willmore-circle --levels K [--jobs J]

Exit status is 0 on success, 1 for configuration errors and 2 when a
linear solve (or the mesh) fails during a run.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .flow_models import FlowModel
from .geometry import GeometryError, ShapeSpec, generate, init_from_points
from .io import ConfigError, OutputError, RunConfig, SvgOptions, render_svg, write_snapshot
from .stepper import EvolutionAborted, StepFailure, StepParams, evolve

log = logging.getLogger("curveflow")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _ellipse(redistribution: str) -> RunConfig:
    return RunConfig(
        shape=ShapeSpec("ellipse", 100, a=2.0, b=1.0), model=FlowModel.surface_diffusion(),
        tau=1e-3, t_end=2.0, omega=1.0, redistribution=redistribution,
        snapshot_every=500, out_dir="out/ellipse-sd" + ("" if redistribution != "none" else "-noredist"),
    )


def _presets() -> dict:
    return {
        "ellipse-sd": _ellipse("asymptotically_uniform"),
        "ellipse-sd-noredist": _ellipse("none"),
        "flower-sd": RunConfig(
            shape=ShapeSpec("flower", 100, radius=1.0, amplitude=0.4, petals=5),
            model=FlowModel.surface_diffusion(), tau=1e-6, t_end=0.17, omega=1.0,
            snapshot_every=17000, out_dir="out/flower-sd",
        ),
        # arclength sampling and turning-angle curvature keep the cusps tractable
        "astroid-willmore": RunConfig(
            shape=ShapeSpec("astroid", 100, scale=1.0, sampling="arclength"),
            model=FlowModel.willmore(), tau=1e-6, t_end=0.005, omega=1.0,
            snapshot_times=(0.0, 0.0005, 0.005), curvature_init="turning",
            out_dir="out/astroid-willmore",
        ),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> RunConfig:
    try:
        return _presets()[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {list(PRESET_NAMES)}") from None


# -- run ----------------------------------------------------------------------

def run_config(cfg: RunConfig, out_dir: Path, svg: bool = False, base_dir: Optional[Path] = None,
               quiet: bool = False):
    """Evolve ``cfg`` and write its snapshots; returns the list of snapshots."""
    curve = cfg.initial_curve(base_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = out_dir / "metrics.csv"
    if metrics.exists():
        metrics.unlink()
    snaps = []

    def sink(snap):
        write_snapshot(snap, out_dir)
        snaps.append(snap)
        if not quiet:
            print(f"step {snap.step:>8d}  t={snap.t:<10.6g} L={snap.L:.6f} area={snap.area:.6f} "
                  f"uniformity={snap.uniformity:.4f} k=[{snap.k_min:.4g}, {snap.k_max:.4g}]")

    try:
        evolve(curve, cfg.model, cfg.params, cfg.t_end, snapshot_every=cfg.snapshot_every,
               sink=sink, snapshot_steps=cfg.snapshot_steps)
    finally:
        # partial output stays usable after a failure
        if svg and snaps:
            render_svg(_svg_selection(snaps), out_dir / "overlay.svg", SvgOptions(markers=True))
    return snaps


def _svg_selection(snaps, limit: int = 7):
    if len(snaps) <= limit:
        return snaps
    idx = np.unique(np.linspace(0, len(snaps) - 1, limit).round().astype(int))
    return [snaps[i] for i in idx]


def _cmd_run(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
        if args.solver is not None:
            cfg = RunConfig.from_dict({**cfg.to_dict(), "solver": args.solver})
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        t0 = time.perf_counter()
        snaps = run_config(cfg, out_dir, svg=args.svg, base_dir=Path(args.config).parent,
                           quiet=args.quiet)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvolutionAborted as exc:
        cause = exc.cause
        where = f"{cause.subsystem} system" if isinstance(cause, StepFailure) else "mesh"
        print(f"solver failure in the {where} at step {exc.step} (t={exc.t:.6g}): {cause}",
              file=sys.stderr)
        if isinstance(cause, StepFailure):
            print("hint: retry with --solver dense or a smaller tau", file=sys.stderr)
        return EXIT_SOLVER
    except (OutputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"wrote {len(snaps)} snapshots to {out_dir} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def _cmd_presets(args) -> int:
    try:
        cfg = preset(args.name)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(cfg.dumps())
    return EXIT_OK


# -- convergence ---------------------------------------------------------------

WILLMORE_CIRCLE = {"n0": 200, "tau0": 1e-5, "t_end": 0.005, "rel_tol": 1e-12}


def willmore_circle_radius(t: float, r0: float = 1.0) -> float:
    """Exact circle radius under the flow: ``R^4 = R0^4 + 2t``."""
    return (r0**4 + 2.0 * t) ** 0.25


def willmore_circle_level(level: int, solver: str = "gauss_seidel"):
    """Run refinement ``level`` (n doubled, tau halved per level).

    Returns ``(n, tau, mean_radius, error)``.
    """
    n = WILLMORE_CIRCLE["n0"] * 2**level
    tau = WILLMORE_CIRCLE["tau0"] / 2**level
    curve = init_from_points(generate(ShapeSpec("circle", n)))
    params = StepParams(tau=tau, rel_tol=WILLMORE_CIRCLE["rel_tol"], solver=solver)
    final = evolve(curve, FlowModel.willmore(), params, WILLMORE_CIRCLE["t_end"])
    mean_r = float(np.mean(np.hypot(final.x[:, 0], final.x[:, 1])))
    return n, tau, mean_r, abs(mean_r - willmore_circle_radius(WILLMORE_CIRCLE["t_end"]))


def _cmd_convergence(args) -> int:
    if args.preset != "willmore-circle":
        print(f"config error: preset: unknown convergence preset {args.preset!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.levels < 1:
        print("config error: levels: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    levels = range(args.levels)
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(willmore_circle_level, levels, [args.solver] * args.levels))
        else:
            rows = [willmore_circle_level(lv, args.solver) for lv in levels]
    except EvolutionAborted as exc:
        print(f"solver failure at step {exc.step}: {exc.cause}", file=sys.stderr)
        return EXIT_SOLVER
    exact = willmore_circle_radius(WILLMORE_CIRCLE["t_end"])
    print(f"exact radius at t={WILLMORE_CIRCLE['t_end']}: {exact:.10f}")
    print(f"{'level':>5} {'n':>6} {'tau':>10} {'mean radius':>14} {'error':>11} {'ratio':>7}")
    prev = None
    for lv, (n, tau, mean_r, err) in zip(levels, rows):
        ratio = f"{prev / err:7.2f}" if prev and err > 0 else " " * 7
        print(f"{lv:>5d} {n:>6d} {tau:>10.3g} {mean_r:>14.10f} {err:>11.3e} {ratio}")
        prev = err
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curveflow",
                                     description="Lagrangian evolution of closed plane curves "
                                                 "by surface diffusion and Willmore flow.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evolve a curve described by a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON run config")
    p_run.add_argument("--out", help="output directory (overrides out_dir)")
    p_run.add_argument("--svg", action="store_true", help="also write overlay.svg")
    p_run.add_argument("--solver", choices=("gauss_seidel", "dense"),
                       help="override the config's linear solver")
    p_run.add_argument("-q", "--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_pre = sub.add_parser("presets", help="print a ready-made config for a reference experiment")
    p_pre.add_argument("name", help=", ".join(PRESET_NAMES))
    p_pre.set_defaults(func=_cmd_presets)

    p_conv = sub.add_parser("convergence", help="refinement study against an exact solution")
    p_conv.add_argument("--preset", default="willmore-circle")
    p_conv.add_argument("--levels", type=int, default=2)
    p_conv.add_argument("--jobs", type=int, default=1, help="levels run in parallel")
    p_conv.add_argument("--solver", choices=("gauss_seidel", "dense"), default="gauss_seidel")
    p_conv.set_defaults(func=_cmd_convergence)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


run_cli = main


if __name__ == "__main__":
    sys.exit(main())
