"""Semi-implicit flowing finite-volume step for ``beta = -k_ss + b(k)``.

A step advances, in order: normal velocity from the old state, tangential
velocity by the redistribution recurrence, log-lengths ``eta``, curvature
(one cyclic pentadiagonal solve), and vertex positions (two solves sharing
one matrix).  Array index ``i`` stands for grid point ``x[i]`` and for the
volume ``[x[i-1], x[i]]`` just before it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .flow_models import FlowModel
from .geometry import DiscreteCurve, area_and_length, chord_lengths, uniformity_ratio
from .linsolve import (
    DEFAULT_MAX_ITERS,
    DEFAULT_REL_TOL,
    CyclicBandedSystem,
    SolverError,
    solve_dense,
    solve_gauss_seidel_shared,
)

log = logging.getLogger(__name__)

REDISTRIBUTION_MODES = ("asymptotically_uniform", "none")
SOLVERS = ("gauss_seidel", "dense")
WARM_STARTS = ("extrapolate", "previous")
COLLAPSE_FACTOR = 1e-14


class MeshCollapse(RuntimeError):
    pass


class StepFailure(RuntimeError):
    """A linear solve inside a step failed; ``subsystem`` is ``"curvature"`` or ``"position"``."""

    def __init__(self, subsystem: str, cause: Exception):
        super().__init__(f"{subsystem} system: {cause}")
        self.subsystem = subsystem
        self.cause = cause


class EvolutionAborted(RuntimeError):
    def __init__(self, step: int, t: float, cause: Exception):
        super().__init__(f"step {step} (t={t:.6g}) failed: {cause}")
        self.step = step
        self.t = t
        self.cause = cause


@dataclass(frozen=True)
class StepParams:
    tau: float
    omega: float = 1.0
    redistribution: str = "asymptotically_uniform"
    solver: str = "gauss_seidel"
    rel_tol: float = DEFAULT_REL_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    # Gauss-Seidel initial guess used by evolve(): the previous time level,
    # or the linear extrapolation 2 u^j - u^(j-1) from the last two levels
    warm_start: str = "extrapolate"

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not (self.omega >= 0 and math.isfinite(self.omega)):
            raise ValueError(f"omega must be nonnegative, got {self.omega}")
        if self.redistribution not in REDISTRIBUTION_MODES:
            raise ValueError(f"redistribution must be one of {REDISTRIBUTION_MODES}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.rel_tol <= 0 or self.max_iters < 1:
            raise ValueError("rel_tol must be > 0 and max_iters >= 1")
        if self.warm_start not in WARM_STARTS:
            raise ValueError(f"warm_start must be one of {WARM_STARTS}")

    @property
    def redistributes(self) -> bool:
        return self.redistribution != "none"


@dataclass(frozen=True)
class StepDiagnostics:
    L: float
    M: float
    B: float
    alpha_closure: float = 0.0
    alpha_scale: float = 0.0
    gs_iters_curvature: int = 0
    gs_iters_position: int = 0
    max_abs_beta: float = 0.0


def _next(v, s=1):
    return np.roll(v, -s, axis=0)


def _prev(v, s=1):
    return np.roll(v, s, axis=0)


def dual_lengths(r: np.ndarray) -> np.ndarray:
    return 0.5 * (r + _next(r))


def compute_beta(curve: DiscreteCurve, model: FlowModel) -> np.ndarray:
    """Discrete normal velocity ``-(1/r) * second difference of k + b(k)``."""
    r, k = curve.r, curve.k
    flux = (_next(k) - k) / dual_lengths(r)
    return -(flux - _prev(flux)) / r + model.b(k)


def compute_alpha(curve: DiscreteCurve, beta: np.ndarray, params: StepParams):
    """Tangential velocities at the grid points and the length statistics.

    ``alpha[-1]`` is the velocity of the last grid point, which coincides
    with the pinned point, so it vanishes up to roundoff.
    """
    r, k = curve.r, curve.k
    n = curve.n
    L = float(np.sum(r))
    M = L / n
    rkb = r * k * beta
    B = float(np.sum(rkb)) / L
    if not params.redistributes:
        diag = StepDiagnostics(L=L, M=M, B=B, max_abs_beta=float(np.max(np.abs(beta))))
        return np.zeros(n), diag
    incr = rkb - r * B + params.omega * (M - r)
    alpha = np.cumsum(incr)
    diag = StepDiagnostics(
        L=L, M=M, B=B,
        alpha_closure=abs(float(alpha[-1])),
        alpha_scale=float(np.sum(np.abs(incr))),
        max_abs_beta=float(np.max(np.abs(beta))),
    )
    return alpha, diag


def update_eta_r(curve: DiscreteCurve, diag: StepDiagnostics, params: StepParams):
    """Advance ``eta`` explicitly; return ``(eta_new, r_new)``.

    Without redistribution ``eta`` is left unchanged here; the step resets it
    from the chord lengths once the vertices have moved.
    """
    if not params.redistributes:
        return curve.eta.copy(), curve.r.copy()
    eta = curve.eta + params.tau * (-diag.B + params.omega * (diag.M / curve.r - 1.0))
    # overflow becomes inf, which the length check reports as a collapse
    with np.errstate(over="ignore"):
        return eta, np.exp(eta)


def _alpha_before(alpha: np.ndarray) -> np.ndarray:
    # velocity at x[i-1]; the point before x[0] is the pinned one, alpha = 0
    out = np.empty_like(alpha)
    out[0] = 0.0
    out[1:] = alpha[:-1]
    return out


def assemble_curvature_system(curve: DiscreteCurve, alpha: np.ndarray, beta_old: np.ndarray,
                              model: FlowModel, params: StepParams,
                              r_new: np.ndarray) -> CyclicBandedSystem:
    """Bands for the new curvatures.

    Lengths are the updated ones except in the reaction term, which uses the
    old ``r k beta``; ``b`` is explicit (old curvatures).
    """
    tau = params.tau
    k_old = curve.k
    r = r_new
    q = dual_lengths(r)
    r_m, r_p = _prev(r), _next(r)
    q_m, q_mm, q_p = _prev(q), _prev(q, 2), _next(q)
    al, al_m = alpha, _alpha_before(alpha)

    a = 1.0 / (q_m * r_m * q_mm)
    e = 1.0 / (q * r_p * q_p)
    b = -(1.0 / (r * q * q_m) + 1.0 / (r * q_m**2) + 1.0 / (q_m**2 * r_m) + a) + 0.5 * al_m
    d = -(e + 1.0 / (q**2 * r_p) + 1.0 / (r * q**2) + 1.0 / (r * q * q_m)) - 0.5 * al
    c = (1.0 / (q**2 * r_p) + 1.0 / (r * q**2) + 2.0 / (r * q * q_m)
         + 1.0 / (r * q_m**2) + 1.0 / (q_m**2 * r_m)
         + r / tau - curve.r * k_old * beta_old + 0.5 * (al - al_m))
    bk = model.b(k_old)
    f = r / tau * k_old + (_next(bk) - bk) / q - (bk - _prev(bk)) / q_m
    return CyclicBandedSystem(a, b, c, d, e, f)


def assemble_position_system(curve: DiscreteCurve, alpha: np.ndarray, k_new: np.ndarray,
                             model: FlowModel, params: StepParams, r_new: np.ndarray):
    """Shared bands for the x- and y-coordinate systems; returns ``(sys_x, sys_y)``."""
    tau = params.tau
    r = r_new
    q = dual_lengths(r)
    r_m, r_p, r_pp = _prev(r), _next(r), _next(r, 2)
    q_m, q_p = _prev(q), _next(q)
    # phi enters both side bands at the grid point x[i] itself (mean over
    # the two volumes meeting there).  Taking it at x[i-1] in the B band
    # turns phi * x_ss into (phi * x_s)_s and adds a spurious tangential
    # velocity phi_s * T that desynchronizes r from the chord lengths.
    phi = model.phi(k_new)
    phi_node = 0.5 * (phi + _next(phi))
    grad_k2 = 0.75 * (_next(k_new) ** 2 - k_new**2) / q

    A = 1.0 / (r * q_m * r_m)
    E = 1.0 / (r_p * q_p * r_pp)
    B = (-(A + 1.0 / (r**2 * q_m) + 1.0 / (r**2 * q) + 1.0 / (r * q * r_p))
         + phi_node / r + 0.5 * alpha - grad_k2)
    D = (-(1.0 / (r * q * r_p) + 1.0 / (r_p**2 * q) + 1.0 / (r_p**2 * q_p) + E)
         + phi_node / r_p - 0.5 * alpha + grad_k2)
    C = q / tau - (A + B + D + E)
    x_old = curve.x
    sys_x = CyclicBandedSystem(A, B, C, D, E, q / tau * x_old[:, 0])
    sys_y = sys_x.with_rhs(q / tau * x_old[:, 1])
    return sys_x, sys_y


def _solve(sys: CyclicBandedSystem, rhs, guesses, params: StepParams, subsystem: str):
    try:
        if params.solver == "dense":
            return np.array([solve_dense(sys.with_rhs(f)) for f in rhs]), 0
        return solve_gauss_seidel_shared(sys, rhs, guesses, params.rel_tol, params.max_iters)
    except SolverError as exc:
        raise StepFailure(subsystem, exc) from exc


def _check_lengths(r: np.ndarray, L: float):
    n = r.shape[0]
    if not np.all(np.isfinite(r)) or np.min(r) < COLLAPSE_FACTOR * L / n:
        raise MeshCollapse(f"local length {np.min(r):.3e} fell below {COLLAPSE_FACTOR:g} * L/n")


def step(curve: DiscreteCurve, model: FlowModel, params: StepParams,
         guess_k: Optional[np.ndarray] = None, guess_x: Optional[np.ndarray] = None):
    """Advance ``curve`` by one time step ``tau``; returns ``(new_curve, diagnostics)``.

    ``guess_k`` and ``guess_x`` seed Gauss-Seidel; they default to the
    current curvatures and vertices.
    """
    beta = compute_beta(curve, model)
    alpha, diag = compute_alpha(curve, beta, params)
    eta_new, r_new = update_eta_r(curve, diag, params)
    _check_lengths(r_new, diag.L)

    sys_k = assemble_curvature_system(curve, alpha, beta, model, params, r_new)
    guess_k = curve.k if guess_k is None else guess_k
    k_new, it_k = _solve(sys_k, [sys_k.f], [guess_k], params, "curvature")
    k_new = k_new[0]

    sys_x, sys_y = assemble_position_system(curve, alpha, k_new, model, params, r_new)
    guess_x = curve.x if guess_x is None else guess_x
    xy, it_x = _solve(sys_x, [sys_x.f, sys_y.f], np.asarray(guess_x).T, params, "position")
    pts = np.ascontiguousarray(xy.T)

    if not params.redistributes:
        chords = chord_lengths(pts)
        _check_lengths(chords, diag.L)
        eta_new = np.log(chords)

    new = DiscreteCurve(x=pts, eta=eta_new, k=k_new, t=curve.t + params.tau)
    diag = replace(diag, gs_iters_curvature=it_k, gs_iters_position=it_x)
    return new, diag


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    curve: DiscreteCurve
    L: float
    area: float
    uniformity: float
    k_min: float
    k_max: float
    gs_iters_k: int = 0
    gs_iters_x: int = 0

    @classmethod
    def of(cls, step_index: int, curve: DiscreteCurve, diag: Optional[StepDiagnostics] = None):
        area, _, r_len = area_and_length(curve)
        return cls(
            step=step_index, t=curve.t, curve=curve, L=r_len, area=area,
            uniformity=uniformity_ratio(curve),
            k_min=float(np.min(curve.k)), k_max=float(np.max(curve.k)),
            gs_iters_k=diag.gs_iters_curvature if diag else 0,
            gs_iters_x=diag.gs_iters_position if diag else 0,
        )


def step_count(t_end: float, tau: float) -> int:
    m = int(round(t_end / tau))
    if m < 1:
        raise ValueError(f"t_end={t_end} is shorter than one step tau={tau}")
    return m


def evolve(initial: DiscreteCurve, model: FlowModel, params: StepParams, t_end: float,
           snapshot_every: int = 0, sink: Optional[Callable[[Snapshot], None]] = None,
           snapshot_steps: Iterable[int] = (),
           on_step: Optional[Callable[[int, DiscreteCurve, StepDiagnostics], None]] = None,
           ) -> DiscreteCurve:
    """Apply :func:`step` ``round(t_end / tau)`` times.

    Snapshots go to ``sink`` at step 0, every ``snapshot_every`` steps (0
    disables the cadence), at each index in ``snapshot_steps`` and at the
    final step.  ``on_step`` sees every step's result and diagnostics.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    m = step_count(t_end, params.tau)
    wanted = {s for s in snapshot_steps if 0 <= s <= m}
    curve = initial
    previous = None
    extrapolate = params.warm_start == "extrapolate"
    if sink is not None:
        sink(Snapshot.of(0, curve))
    for j in range(1, m + 1):
        guess_k = guess_x = None
        if extrapolate and previous is not None:
            guess_k = 2.0 * curve.k - previous.k
            guess_x = 2.0 * curve.x - previous.x
        try:
            previous, (curve, diag) = curve, step(curve, model, params, guess_k, guess_x)
        except (StepFailure, MeshCollapse) as exc:
            raise EvolutionAborted(j, curve.t + params.tau, exc) from exc
        if on_step is not None:
            on_step(j, curve, diag)
        due = j == m or j in wanted or (snapshot_every > 0 and j % snapshot_every == 0)
        if sink is not None and due:
            sink(Snapshot.of(j, curve, diag))
        if j % 1000 == 0:
            log.debug("step %d/%d t=%.6g L=%.6g", j, m, curve.t, diag.L)
    return curve
