"""Run configuration, curve files, snapshot output and SVG overlays.

A run is described by one flat JSON document::

    {"shape": {"kind": "ellipse", "a": 2.0, "b": 1.0}, "n": 100,
     "model": "surface_diffusion", "tau": 0.001, "t_end": 2.0, "omega": 1.0,
     "redistribution": "asymptotically_uniform", "snapshot_every": 500,
     "out_dir": "out"}

``shape`` may be replaced by ``points_file``, a headerless ``x,y`` CSV.
Numbers are written with ``repr`` so every float reads back bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .flow_models import FlowModel
from .geometry import CURVATURE_INITS, DiscreteCurve, ShapeSpec, generate, init_from_points
from .linsolve import DEFAULT_MAX_ITERS, DEFAULT_REL_TOL
from .stepper import REDISTRIBUTION_MODES, SOLVERS, WARM_STARTS, Snapshot, StepParams, step_count

METRICS_HEADER = ("step", "t", "L", "area", "uniformity", "k_min", "k_max",
                  "gs_iters_k", "gs_iters_x")
METRICS_FILE = "metrics.csv"


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class OutputError(OSError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: FlowModel
    tau: float
    t_end: float
    shape: Optional[ShapeSpec] = None
    points_file: Optional[str] = None
    n: Optional[int] = None
    omega: float = 1.0
    redistribution: str = "asymptotically_uniform"
    snapshot_every: int = 0
    snapshot_times: tuple = ()
    out_dir: str = "out"
    solver: str = "gauss_seidel"
    rel_tol: float = DEFAULT_REL_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    warm_start: str = "extrapolate"
    curvature_init: str = "menger"

    def __post_init__(self):
        if (self.shape is None) == (self.points_file is None):
            raise ConfigError("shape", "exactly one of 'shape' and 'points_file' must be given")
        if self.shape is not None:
            if self.n is None:
                object.__setattr__(self, "n", self.shape.n)
            elif self.n != self.shape.n:
                raise ConfigError("n", f"{self.n} disagrees with shape.n={self.shape.n}")
        _positive("tau", self.tau)
        _positive("t_end", self.t_end)
        if not (_is_number(self.omega) and self.omega >= 0 and math.isfinite(self.omega)):
            raise ConfigError("omega", f"must be a nonnegative number, got {self.omega!r}")
        if self.redistribution not in REDISTRIBUTION_MODES:
            raise ConfigError("redistribution", f"must be one of {list(REDISTRIBUTION_MODES)}")
        if self.solver not in SOLVERS:
            raise ConfigError("solver", f"must be one of {list(SOLVERS)}")
        if self.warm_start not in WARM_STARTS:
            raise ConfigError("warm_start", f"must be one of {list(WARM_STARTS)}")
        if self.curvature_init not in CURVATURE_INITS:
            raise ConfigError("curvature_init", f"must be one of {list(CURVATURE_INITS)}")
        _positive("rel_tol", self.rel_tol)
        if not _is_int(self.max_iters) or self.max_iters < 1:
            raise ConfigError("max_iters", f"must be a positive integer, got {self.max_iters!r}")
        if not _is_int(self.snapshot_every) or self.snapshot_every < 0:
            raise ConfigError("snapshot_every", f"must be a nonnegative integer, got {self.snapshot_every!r}")
        if self.n is not None and (not _is_int(self.n) or self.n < 5):
            raise ConfigError("n", f"must be an integer >= 5, got {self.n!r}")
        for t in self.snapshot_times:
            if not _is_number(t) or t < 0 or t > self.t_end:
                raise ConfigError("snapshot_times", f"{t!r} is outside [0, t_end]")
        try:
            step_count(self.t_end, self.tau)
        except ValueError as exc:
            raise ConfigError("t_end", str(exc)) from None

    @property
    def params(self) -> StepParams:
        return StepParams(tau=self.tau, omega=self.omega, redistribution=self.redistribution,
                          solver=self.solver, rel_tol=self.rel_tol, max_iters=self.max_iters,
                          warm_start=self.warm_start)

    @property
    def snapshot_steps(self) -> tuple:
        return tuple(sorted({int(round(t / self.tau)) for t in self.snapshot_times}))

    def initial_points(self, base_dir: Optional[Path] = None) -> np.ndarray:
        if self.shape is not None:
            return generate(self.shape)
        path = Path(self.points_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        pts = read_curve_csv(path)
        if self.n is not None and len(pts) != self.n:
            raise ConfigError("n", f"{self.n} disagrees with the {len(pts)} points in {path}")
        return pts

    def initial_curve(self, base_dir: Optional[Path] = None) -> DiscreteCurve:
        return init_from_points(self.initial_points(base_dir), curvature=self.curvature_init)

    def to_dict(self) -> dict:
        out = {}
        if self.shape is not None:
            shape = self.shape.to_config()
            out["shape"] = {key: val for key, val in shape.items() if key != "n"}
            out["n"] = self.shape.n
        else:
            out["points_file"] = self.points_file
            if self.n is not None:
                out["n"] = self.n
        out["model"] = self.model.to_config()
        for f in fields(self):
            if f.name in ("shape", "points_file", "n", "model"):
                continue
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        for required in ("model", "tau", "t_end"):
            if required not in doc:
                raise ConfigError(required, "missing")
        kw = dict(doc)
        try:
            kw["model"] = FlowModel.from_config(doc["model"])
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
        if "shape" in doc and doc["shape"] is not None:
            shape = doc["shape"]
            if not isinstance(shape, dict):
                raise ConfigError("shape", "must be an object")
            if "n" not in doc and "n" not in shape:
                raise ConfigError("n", "missing (needed to sample the shape)")
            try:
                kw["shape"] = ShapeSpec.from_config({"n": doc.get("n"), **shape})
            except (TypeError, ValueError) as exc:
                raise ConfigError("shape", str(exc)) from None
            if not _is_int(kw["shape"].n):
                raise ConfigError("n", f"must be an integer, got {kw['shape'].n!r}")
        for key in ("tau", "t_end", "omega", "rel_tol"):
            if key in kw and not _is_number(kw[key]):
                raise ConfigError(key, f"must be a number, got {kw[key]!r}")
        if "snapshot_times" in kw:
            if not isinstance(kw["snapshot_times"], (list, tuple)):
                raise ConfigError("snapshot_times", "must be a list of times")
            kw["snapshot_times"] = tuple(kw["snapshot_times"])
        return cls(**kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", str(exc)) from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc.strerror or exc}") from None
        return cls.loads(text)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _positive(name: str, v):
    if not (_is_number(v) and v > 0 and math.isfinite(v)):
        raise ConfigError(name, f"must be a positive number, got {v!r}")


# -- curve and metrics files ------------------------------------------------

def write_curve_csv(path, points) -> None:
    """One ``x,y`` line per vertex, shortest round-trip decimals, no header."""
    pts = np.asarray(points, dtype=float)
    lines = "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in pts)
    _write_text(Path(path), lines)


def read_curve_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        pts = np.array([[float(a), float(b)] for a, b in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: expected 'x,y' per line ({exc})") from None
    return pts.reshape(-1, 2)


def _write_text(path: Path, text: str, mode: str = "w"):
    try:
        with path.open(mode) as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc


def curve_filename(step: int) -> str:
    return f"curve_{step:06d}.csv"


def metrics_row(snap: Snapshot) -> str:
    vals = (snap.step, snap.t, snap.L, snap.area, snap.uniformity, snap.k_min, snap.k_max,
            snap.gs_iters_k, snap.gs_iters_x)
    return ",".join(repr(v) if isinstance(v, float) else str(v) for v in vals) + "\n"


def write_snapshot(snap: Snapshot, out_dir) -> Path:
    """Write the snapshot's vertices and append its row to ``metrics.csv``.

    The metrics header is written when the file does not exist yet.
    Returns the path of the curve file.
    """
    out = Path(out_dir)
    curve_path = out / curve_filename(snap.step)
    write_curve_csv(curve_path, snap.curve.x)
    metrics = out / METRICS_FILE
    if not metrics.exists():
        _write_text(metrics, ",".join(METRICS_HEADER) + "\n")
    _write_text(metrics, metrics_row(snap), mode="a")
    return curve_path


def read_metrics(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    ints = {"step", "gs_iters_k", "gs_iters_x"}
    return [{k: (int(v) if k in ints else float(v)) for k, v in row.items()} for row in rows]


# -- SVG ---------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass(frozen=True)
class SvgOptions:
    markers: bool = False
    width: int = 600
    legend: bool = True
    stroke_width: float = 1.5


def render_svg(snapshots: Sequence[Snapshot], path, options: Optional[SvgOptions] = None) -> Path:
    """Overlay snapshot polygons in one equal-aspect SVG padded by 5%.

    y is flipped so the picture has the usual mathematical orientation.
    Raises ``ValueError`` before touching ``path`` when ``snapshots`` is empty.
    """
    if not snapshots:
        raise ValueError("render_svg needs at least one snapshot")
    opts = options or SvgOptions()
    allpts = np.vstack([s.curve.x for s in snapshots])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = hi - lo
    side = max(float(span.max()), 1e-12)
    pad = 0.05 * side
    # equal aspect: a square box centred on the data
    centre = 0.5 * (lo + hi)
    half = 0.5 * side + pad
    vx, vy, vw = float(centre[0] - half), float(-(centre[1] + half)), float(2.0 * half)
    legend_h = 0.06 * vw * len(snapshots) if opts.legend else 0.0
    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "viewBox": f"{vx!r} {vy!r} {vw!r} {vw + legend_h!r}",
        "width": str(opts.width),
        "height": str(int(round(opts.width * (vw + legend_h) / vw))),
    })
    stroke = opts.stroke_width * vw / opts.width
    for idx, snap in enumerate(snapshots):
        color = _PALETTE[idx % len(_PALETTE)]
        g = ET.SubElement(svg, "g", {"id": f"snapshot-{snap.step}"})
        pts = snap.curve.x
        d = "M " + " L ".join(f"{float(x)!r} {float(-y)!r}" for x, y in pts) + " Z"
        ET.SubElement(g, "path", {"d": d, "fill": "none", "stroke": color,
                                  "stroke-width": repr(float(stroke))})
        if opts.markers:
            rad = 2.0 * stroke
            for x, y in pts:
                ET.SubElement(g, "circle", {"cx": repr(float(x)), "cy": repr(float(-y)),
                                            "r": repr(rad), "fill": color})
    if opts.legend:
        font = 0.04 * vw
        for idx, snap in enumerate(snapshots):
            label = ET.SubElement(svg, "text", {
                "x": repr(vx + pad),
                "y": repr(vy + vw + 0.06 * vw * (idx + 0.8)),
                "font-size": repr(font),
                "fill": _PALETTE[idx % len(_PALETTE)],
            })
            label.text = f"t = {snap.t:.6g}"
    path = Path(path)
    tree = ET.ElementTree(svg)
    try:
        tree.write(path, encoding="utf-8", xml_declaration=True)
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc
    return path
