"""Cyclic pentadiagonal systems.

Row ``i`` reads ``a[i] u[i-2] + b[i] u[i-1] + c[i] u[i] + d[i] u[i+1] + e[i] u[i+2] = f[i]``
with all indices taken modulo ``n``.  Gauss-Seidel is the production solver;
:func:`solve_dense` materializes the matrix and is kept as a reference.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.linalg

DEFAULT_REL_TOL = 1e-10
DEFAULT_MAX_ITERS = 10000


class SolverError(RuntimeError):
    pass


class NotConverged(SolverError):
    def __init__(self, residual: float, iters: int):
        super().__init__(f"Gauss-Seidel did not converge in {iters} sweeps (residual {residual:.3e})")
        self.residual = residual
        self.iters = iters


class ZeroDiagonal(SolverError):
    pass


class SingularMatrix(SolverError):
    pass


@dataclass(frozen=True)
class CyclicBandedSystem:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        n = len(self.c)
        if n < 5:
            raise ValueError(f"cyclic pentadiagonal systems need n >= 5, got {n}")
        for name in ("a", "b", "c", "d", "e", "f"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"band {name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.c)

    def bands(self):
        return self.a, self.b, self.c, self.d, self.e

    def with_rhs(self, f) -> "CyclicBandedSystem":
        return CyclicBandedSystem(self.a, self.b, self.c, self.d, self.e, f)

    def matvec(self, u):
        u = np.asarray(u, dtype=float)
        return (self.a * np.roll(u, 2) + self.b * np.roll(u, 1) + self.c * u
                + self.d * np.roll(u, -1) + self.e * np.roll(u, -2))

    def to_dense(self) -> np.ndarray:
        n = self.n
        mat = np.zeros((n, n))
        rows = np.arange(n)
        for offset, band in zip((-2, -1, 0, 1, 2), self.bands()):
            # += so that wrapped bands still add up correctly
            np.add.at(mat, (rows, (rows + offset) % n), band)
        return mat


@nb.njit(cache=True)
def _wrapped_residual(a, b, c, d, e, f, u, i):
    n = u.shape[0]
    return abs(f[i] - a[i] * u[(i - 2) % n] - b[i] * u[(i - 1) % n] - c[i] * u[i]
               - d[i] * u[(i + 1) % n] - e[i] * u[(i + 2) % n])


@nb.njit(cache=True, fastmath={"contract", "reassoc", "nsz"})
def _residual_inf(a, b, c, d, e, f, u):
    n = u.shape[0]
    res = 0.0
    for i in range(2, n - 2):
        s = abs(f[i] - a[i] * u[i - 2] - b[i] * u[i - 1] - c[i] * u[i]
                - d[i] * u[i + 1] - e[i] * u[i + 2])
        res = max(res, s)
    for i in (0, 1, n - 2, n - 1):
        res = max(res, _wrapped_residual(a, b, c, d, e, f, u, i))
    # max() drops NaNs; a diverged iterate must not look converged
    if not np.isfinite(res) or not np.isfinite(np.sum(u)):
        return np.inf
    return res


@nb.njit(cache=True)
def _delta_residual(a, b, d, e, dl):
    # Row i is solved exactly when visited, so after a sweep its residual
    # comes only from unknowns updated later in the same sweep.
    n = dl.shape[0]
    res = max(abs(d[0] * dl[1] + e[0] * dl[2] + a[0] * dl[n - 2] + b[0] * dl[n - 1]),
              abs(d[1] * dl[2] + e[1] * dl[3] + a[1] * dl[n - 1]),
              abs(d[n - 2] * dl[n - 1]))
    for i in range(2, n - 2):
        s = abs(d[i] * dl[i + 1] + e[i] * dl[i + 2])
        if s > res:
            res = s
    return res if res == res else np.inf


@nb.njit(cache=True)
def _wrapped_update(a, b, d, e, f, inv_c, u, dl, i):
    n = u.shape[0]
    new = (f[i] - a[i] * u[(i - 2) % n] - b[i] * u[(i - 1) % n]
           - d[i] * u[(i + 1) % n] - e[i] * u[(i + 2) % n]) * inv_c[i]
    dl[i] = new - u[i]
    u[i] = new


@nb.njit(cache=True)
def _sweep_one(a, b, d, e, f, inv_c, u, dl):
    n = u.shape[0]
    _wrapped_update(a, b, d, e, f, inv_c, u, dl, 0)
    _wrapped_update(a, b, d, e, f, inv_c, u, dl, 1)
    prev = u[1]
    for i in range(2, n - 2):
        # u[i-1] stays in a register; it is the only term on the critical path
        t = f[i] - a[i] * u[i - 2] - d[i] * u[i + 1] - e[i] * u[i + 2]
        new = (t - b[i] * prev) * inv_c[i]
        dl[i] = new - u[i]
        u[i] = new
        prev = new
    _wrapped_update(a, b, d, e, f, inv_c, u, dl, n - 2)
    _wrapped_update(a, b, d, e, f, inv_c, u, dl, n - 1)
    return _delta_residual(a, b, d, e, dl)


@nb.njit(cache=True)
def _sweep_two(a, b, d, e, f0, f1, inv_c, u0, u1, dl0, dl1):
    # two right-hand sides, interleaved so their dependency chains overlap
    n = u0.shape[0]
    for i in (0, 1):
        _wrapped_update(a, b, d, e, f0, inv_c, u0, dl0, i)
        _wrapped_update(a, b, d, e, f1, inv_c, u1, dl1, i)
    p0 = u0[1]
    p1 = u1[1]
    for i in range(2, n - 2):
        t0 = f0[i] - a[i] * u0[i - 2] - d[i] * u0[i + 1] - e[i] * u0[i + 2]
        t1 = f1[i] - a[i] * u1[i - 2] - d[i] * u1[i + 1] - e[i] * u1[i + 2]
        w0 = (t0 - b[i] * p0) * inv_c[i]
        w1 = (t1 - b[i] * p1) * inv_c[i]
        dl0[i] = w0 - u0[i]
        dl1[i] = w1 - u1[i]
        u0[i] = w0
        u1[i] = w1
        p0 = w0
        p1 = w1
    for i in (n - 2, n - 1):
        _wrapped_update(a, b, d, e, f0, inv_c, u0, dl0, i)
        _wrapped_update(a, b, d, e, f1, inv_c, u1, dl1, i)
    return _delta_residual(a, b, d, e, dl0), _delta_residual(a, b, d, e, dl1)


@nb.njit(cache=True)
def _converged(a, b, c, d, e, f, u, tol, out):
    ok = True
    for j in range(u.shape[0]):
        out[j] = _residual_inf(a, b, c, d, e, f[j], u[j])
        ok = ok and out[j] <= tol[j]
    return ok


@nb.njit(cache=True)
def _gauss_seidel(a, b, c, d, e, f, u, tol, max_iters):
    """Sweep the one or two columns of ``u`` until each meets ``tol[j]``.

    Returns ``(sweeps, residuals)``; ``sweeps`` is negative when the budget
    ran out or the iterate stopped being finite.
    """
    m, n = u.shape
    inv_c = 1.0 / c
    dl = np.empty_like(u)
    res = np.empty(m)
    if _converged(a, b, c, d, e, f, u, tol, res):
        return 0, res
    for it in range(1, max_iters + 1):
        if m == 1:
            est0 = _sweep_one(a, b, d, e, f[0], inv_c, u[0], dl[0])
            est1 = 0.0
        else:
            est0, est1 = _sweep_two(a, b, d, e, f[0], f[1], inv_c, u[0], u[1], dl[0], dl[1])
        if est0 == np.inf or est1 == np.inf:
            res[:] = np.inf
            return -it, res
        # the estimate is exact up to roundoff; confirm before returning
        if est0 <= tol[0] and (m == 1 or est1 <= tol[1]):
            if _converged(a, b, c, d, e, f, u, tol, res):
                return it, res
    _converged(a, b, c, d, e, f, u, tol, res)
    return -max_iters, res


def residual_norm(sys: CyclicBandedSystem, u) -> float:
    """Infinity norm of ``f - A u``."""
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != (sys.n,):
        raise ValueError(f"vector has shape {u.shape}, expected ({sys.n},)")
    return float(_residual_inf(*sys.bands(), sys.f, u))


def solve_gauss_seidel(sys: CyclicBandedSystem, guess=None, rel_tol: float = DEFAULT_REL_TOL,
                       max_iters: int = DEFAULT_MAX_ITERS):
    """Gauss-Seidel sweeps in index order until ``|f - A u|_inf <= rel_tol * max(1, |f|_inf)``.

    Returns ``(u, sweeps)``; ``sweeps`` is 0 when the guess already satisfies
    the tolerance.  Raises :class:`NotConverged` if the budget runs out or the
    iteration blows up.
    """
    u, iters = solve_gauss_seidel_shared(sys, [sys.f], None if guess is None else [guess],
                                         rel_tol, max_iters)
    return u[0], iters


def solve_gauss_seidel_shared(sys: CyclicBandedSystem, rhs, guesses=None,
                              rel_tol: float = DEFAULT_REL_TOL,
                              max_iters: int = DEFAULT_MAX_ITERS):
    """Solve ``A u_j = rhs[j]`` for several right-hand sides sharing the bands of ``sys``.

    Columns are swept together, each until it meets its own tolerance, so
    every returned ``u[j]`` satisfies the same bound as a separate solve.
    ``sys.f`` is ignored.  Returns ``(u, sweeps)`` with ``u`` of shape ``(m, n)``.
    """
    if rel_tol <= 0 or max_iters < 1:
        raise ValueError("rel_tol must be > 0 and max_iters >= 1")
    if np.any(sys.c == 0.0):
        i = int(np.flatnonzero(sys.c == 0.0)[0])
        raise ZeroDiagonal(f"zero diagonal entry in row {i}")
    f = np.array(rhs, dtype=float, ndmin=2)
    if f.shape[1] != sys.n:
        raise ValueError(f"right-hand sides have length {f.shape[1]}, expected {sys.n}")
    if guesses is None:
        u = np.zeros_like(f)
    else:
        u = np.array(guesses, dtype=float, ndmin=2)
        if u.shape != f.shape:
            raise ValueError("guesses must match the right-hand sides in shape")
    tol = rel_tol * np.maximum(1.0, np.max(np.abs(f), axis=1))
    iters = 0
    # the kernel handles one or two columns at a time
    for lo in range(0, f.shape[0], 2):
        cols = slice(lo, lo + 2)
        block = np.ascontiguousarray(u[cols])
        done, res = _gauss_seidel(*sys.bands(), np.ascontiguousarray(f[cols]), block,
                                  tol[cols], int(max_iters))
        if done < 0:
            raise NotConverged(float(np.max(res)), -done)
        u[cols] = block
        iters = max(iters, done)
    return u, iters


def solve_dense(sys: CyclicBandedSystem) -> np.ndarray:
    """LU with partial pivoting on the materialized cyclic matrix."""
    mat = sys.to_dense()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(mat, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrix(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), np.finfo(float).tiny) * sys.n:
        raise SingularMatrix("matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), sys.f)
