"""Closed polygonal curves carried as flowing finite volumes.

Indexing convention: ``x[i]`` is a vertex, and segment ``i`` is the volume
``[x[i-1], x[i]]`` (periodic, so segment 0 joins the last vertex to the
first).  Per-segment quantities ``r``, ``eta`` and ``k`` live on these
volumes; ``q[i] = (r[i] + r[i+1]) / 2`` is the dual length around vertex ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

MIN_POINTS = 5
SAMPLINGS = ("parameter", "arclength")
CURVATURE_INITS = ("menger", "turning")
# fine-grid density for arclength sampling, per requested point
_ARC_OVERSAMPLE = 2048


class GeometryError(ValueError):
    pass


class TooFewPoints(GeometryError):
    pass


class DegenerateSegment(GeometryError):
    pass


class DegeneratePoints(GeometryError):
    pass


@dataclass(frozen=True)
class DiscreteCurve:
    """Polygon vertices plus the per-segment state evolved by the scheme.

    ``eta`` is the primary length variable; ``r`` is always ``exp(eta)``.
    """

    x: np.ndarray
    eta: np.ndarray
    k: np.ndarray
    t: float = 0.0
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        eta = np.array(self.eta, dtype=float)
        k = np.array(self.k, dtype=float)
        if x.ndim != 2 or x.shape[1] != 2:
            raise GeometryError(f"vertices must have shape (n, 2), got {x.shape}")
        n = x.shape[0]
        if eta.shape != (n,) or k.shape != (n,):
            raise GeometryError("eta and k must have one entry per segment")
        for arr in (x, eta, k):
            arr.flags.writeable = False
        r = np.exp(eta)
        r.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def q(self) -> np.ndarray:
        return 0.5 * (self.r + np.roll(self.r, -1))

    def chord_lengths(self) -> np.ndarray:
        return chord_lengths(self.x)

    def translated(self, shift) -> "DiscreteCurve":
        return replace(self, x=self.x + np.asarray(shift, dtype=float))


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic initial curve: ``kind`` plus its size parameters and sample count."""

    kind: str
    n: int
    a: float = 1.0
    b: float = 1.0
    radius: float = 1.0
    amplitude: float = 0.0
    petals: int = 5
    scale: float = 1.0
    sampling: str = "parameter"

    def __post_init__(self):
        if self.kind not in ("ellipse", "astroid", "flower", "circle"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.sampling not in SAMPLINGS:
            raise ValueError(f"sampling must be one of {SAMPLINGS}")
        if self.kind == "ellipse" and (self.a <= 0 or self.b <= 0):
            raise ValueError("ellipse half-axes must be positive")
        if self.kind == "circle" and self.radius <= 0:
            raise ValueError("circle radius must be positive")
        if self.kind == "astroid" and self.scale <= 0:
            raise ValueError("astroid scale must be positive")
        if self.kind == "flower":
            if self.radius <= 0 or self.amplitude <= 0 or self.petals < 1:
                raise ValueError("flower needs radius > 0, amplitude > 0, petals >= 1")
            if self.amplitude >= self.radius:
                raise ValueError("flower amplitude must be smaller than its radius")

    def to_config(self) -> dict:
        keys = {
            "ellipse": ("a", "b"),
            "circle": ("radius",),
            "astroid": ("scale",),
            "flower": ("radius", "amplitude", "petals"),
        }[self.kind]
        out = {"kind": self.kind, "n": self.n}
        out.update({key: getattr(self, key) for key in keys})
        if self.sampling != "parameter":
            out["sampling"] = self.sampling
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "ShapeSpec":
        allowed = {"kind", "n", "a", "b", "radius", "amplitude", "petals", "scale", "sampling"}
        unknown = set(cfg) - allowed
        if unknown:
            raise ValueError(f"unknown shape fields: {sorted(unknown)}")
        return cls(**cfg)


def chord_lengths(x: np.ndarray) -> np.ndarray:
    """``|x[i] - x[i-1]|`` with periodic wrap."""
    return np.hypot(*(x - np.roll(x, 1, axis=0)).T)


def signed_area(x: np.ndarray) -> float:
    """Shoelace area, positive for counterclockwise vertex order."""
    xs, ys = x[:, 0], x[:, 1]
    return 0.5 * float(np.sum(xs * np.roll(ys, -1) - np.roll(xs, -1) * ys))


def _menger(p_prev, p, p_next):
    # vectorized over the leading axis
    u = p - p_prev
    v = p_next - p
    w = p_next - p_prev
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    denom = np.hypot(u[..., 0], u[..., 1]) * np.hypot(v[..., 0], v[..., 1]) * np.hypot(w[..., 0], w[..., 1])
    return 2.0 * cross / denom


def signed_curvature_three_point(p_prev, p, p_next) -> float:
    """Reciprocal of the signed circumradius through three points.

    Positive when the turn ``p_prev -> p -> p_next`` is counterclockwise.
    """
    p_prev, p, p_next = (np.asarray(v, dtype=float) for v in (p_prev, p, p_next))
    if (np.array_equal(p_prev, p) or np.array_equal(p, p_next)
            or np.array_equal(p_prev, p_next)):
        raise DegeneratePoints("three-point curvature needs pairwise distinct points")
    return float(_menger(p_prev, p, p_next))


def vertex_curvature(x: np.ndarray) -> np.ndarray:
    """Menger curvature at every vertex of a closed polygon."""
    return _menger(np.roll(x, 1, axis=0), x, np.roll(x, -1, axis=0))


def segment_curvature(x: np.ndarray) -> np.ndarray:
    """Curvature on segment ``[x[i-1], x[i]]``: mean of its endpoint values.

    Exact for vertices on a circle, whatever the spacing.
    """
    kv = vertex_curvature(x)
    return 0.5 * (kv + np.roll(kv, 1))


def turning_angles(x: np.ndarray) -> np.ndarray:
    """Signed exterior angle at every vertex, in ``(-pi, pi]``."""
    e = x - np.roll(x, 1, axis=0)
    heading = np.arctan2(e[:, 1], e[:, 0])
    turn = np.roll(heading, -1) - heading
    return np.angle(np.exp(1j * turn))


def turning_curvature(x: np.ndarray) -> np.ndarray:
    """Curvature on segment ``i`` as half the turning at its two ends over ``r_i``.

    ``sum(r * k)`` equals the total turning (``2 pi`` for a simple CCW
    polygon) however sharp the corners are, which the three-point formula
    does not guarantee near cusps.
    """
    th = turning_angles(x)
    return 0.5 * (th + np.roll(th, 1)) / chord_lengths(x)


def init_from_points(points, curvature: str = "menger") -> DiscreteCurve:
    """Build the initial discrete state from closed-polygon vertices.

    Clockwise input is reversed so the enclosed area is positive.  The
    polygon is assumed to be simple; this is not checked.

    Parameters
    ----------
    points : array_like, shape (n, 2)
    curvature : {"menger", "turning"}
        ``"menger"`` averages the three-point curvature of the two segment
        endpoints and is exact on circles.  ``"turning"`` uses
        :func:`turning_curvature`, which behaves better at cusps.
    """
    if curvature not in CURVATURE_INITS:
        raise ValueError(f"curvature must be one of {CURVATURE_INITS}")
    x = np.array(points, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise GeometryError(f"points must have shape (n, 2), got {x.shape}")
    if x.shape[0] < MIN_POINTS:
        raise TooFewPoints(f"need at least {MIN_POINTS} points, got {x.shape[0]}")
    r = chord_lengths(x)
    if np.any(r == 0.0):
        i = int(np.flatnonzero(r == 0.0)[0])
        raise DegenerateSegment(f"points {i - 1 if i else x.shape[0] - 1} and {i} coincide")
    if signed_area(x) < 0:
        x = x[::-1].copy()
        r = chord_lengths(x)
    k = segment_curvature(x) if curvature == "menger" else turning_curvature(x)
    if not np.all(np.isfinite(k)):
        raise DegeneratePoints("vertices i-1 and i+1 coincide somewhere on the polygon")
    return DiscreteCurve(x=x, eta=np.log(r), k=k, t=0.0)


def generate(spec: ShapeSpec) -> np.ndarray:
    """Sample ``spec`` counterclockwise.

    With ``sampling="parameter"`` the points sit at ``u = i/n``, ``i = 1..n``.
    With ``sampling="arclength"`` they are equally spaced in arc length
    along the analytic curve, still starting from ``u = 0``.
    """
    u = np.arange(1, spec.n + 1) / spec.n
    if spec.sampling == "arclength":
        u = _arclength_parameters(spec)
    return _evaluate(spec, u)


def _arclength_parameters(spec: ShapeSpec) -> np.ndarray:
    m = _ARC_OVERSAMPLE * spec.n
    fine = np.arange(m + 1) / m
    pts = _evaluate(spec, fine)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    target = np.arange(1, spec.n + 1) / spec.n * s[-1]
    return np.interp(target, s, fine)


def _evaluate(spec: ShapeSpec, u: np.ndarray) -> np.ndarray:
    th = 2.0 * np.pi * u
    if spec.kind == "circle":
        pts = spec.radius * np.column_stack([np.cos(th), np.sin(th)])
    elif spec.kind == "ellipse":
        pts = np.column_stack([spec.a * np.cos(th), spec.b * np.sin(th)])
    elif spec.kind == "astroid":
        pts = spec.scale * np.column_stack([np.cos(th) ** 3, np.sin(th) ** 3])
    else:
        rho = spec.radius + spec.amplitude * np.cos(spec.petals * th)
        pts = np.column_stack([rho * np.cos(th), rho * np.sin(th)])
    return pts


def area_and_length(curve: DiscreteCurve) -> tuple[float, float, float]:
    """Return ``(shoelace area, polygon perimeter, sum of r)``."""
    return signed_area(curve.x), float(np.sum(curve.chord_lengths())), float(np.sum(curve.r))


def uniformity_ratio(curve: DiscreteCurve) -> float:
    return float(np.max(curve.r) / np.min(curve.r))


def isoperimetric_ratio(curve: DiscreteCurve) -> float:
    """``L^2 / (4 pi A)`` from the polygon perimeter and area; 1 for a circle."""
    area, length, _ = area_and_length(curve)
    return length**2 / (4.0 * np.pi * area)
