"""Matrix-free Jacobi-preconditioned conjugate gradients for ``(a I - b Lap) x = rhs``.

``Lap`` is the 5-point Neumann Laplacian of the operators module, so the
system matrix is a symmetric M-matrix for ``a > 0, b >= 0``. With
``zero_mean=True`` the iteration runs on the subspace of zero-sum vectors
(the preconditioned residual is projected back onto it every iteration).
That subspace is invariant under the operator, and staying in it keeps
the cell sum of the solution exact, which is how mass-conserving diffusion
updates are solved.

Kernels run sequentially in a fixed loop order so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_RTOL = 1e-10


class SolverError(RuntimeError):
    """Raised when CG does not reach the requested residual within its iteration cap."""


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    relres: float


@njit(cache=True)
def _apply(x, out, a, bx, by):
    ny, nx = x.shape
    for j in range(ny):
        for i in range(nx):
            c = x[j, i]
            s = a * c
            if i > 0:
                s += bx * (c - x[j, i - 1])
            if i < nx - 1:
                s += bx * (c - x[j, i + 1])
            if j > 0:
                s += by * (c - x[j - 1, i])
            if j < ny - 1:
                s += by * (c - x[j + 1, i])
            out[j, i] = s


@njit(cache=True)
def _inv_diag(ny, nx, a, bx, by):
    d = np.empty((ny, nx))
    for j in range(ny):
        for i in range(nx):
            s = a
            if i > 0:
                s += bx
            if i < nx - 1:
                s += bx
            if j > 0:
                s += by
            if j < ny - 1:
                s += by
            d[j, i] = 1.0 / s
    return d


@njit(cache=True)
def _dot(p, q):
    ny, nx = p.shape
    s = 0.0
    for j in range(ny):
        for i in range(nx):
            s += p[j, i] * q[j, i]
    return s


@njit(cache=True)
def _remove_mean(z):
    ny, nx = z.shape
    s = 0.0
    for j in range(ny):
        for i in range(nx):
            s += z[j, i]
    m = s / (ny * nx)
    for j in range(ny):
        for i in range(nx):
            z[j, i] -= m


@njit(cache=True)
def _pcg(rhs, x, a, bx, by, tol_abs, maxiter, zero_mean):
    ny, nx = rhs.shape
    dinv = _inv_diag(ny, nx, a, bx, by)
    r = np.empty_like(rhs)
    ap = np.empty_like(rhs)
    _apply(x, ap, a, bx, by)
    for j in range(ny):
        for i in range(nx):
            r[j, i] = rhs[j, i] - ap[j, i]
    rr = _dot(r, r)
    if np.sqrt(rr) <= tol_abs:
        return 0, np.sqrt(rr)
    z = dinv * r
    if zero_mean:
        _remove_mean(z)
    p = z.copy()
    rz = _dot(r, z)
    for k in range(1, maxiter + 1):
        _apply(p, ap, a, bx, by)
        pap = _dot(p, ap)
        if pap <= 0.0:
            return -k, np.sqrt(rr)
        alpha = rz / pap
        for j in range(ny):
            for i in range(nx):
                x[j, i] += alpha * p[j, i]
                r[j, i] -= alpha * ap[j, i]
        rr = _dot(r, r)
        if np.sqrt(rr) <= tol_abs:
            return k, np.sqrt(rr)
        for j in range(ny):
            for i in range(nx):
                z[j, i] = dinv[j, i] * r[j, i]
        if zero_mean:
            _remove_mean(z)
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        for j in range(ny):
            for i in range(nx):
                p[j, i] = z[j, i] + beta * p[j, i]
    return -maxiter, np.sqrt(rr)


def solve_shifted_neumann(
    rhs: np.ndarray,
    a: float,
    b: float,
    hx: float,
    hy: float,
    *,
    x0: np.ndarray | None = None,
    ref_norm: float | None = None,
    rtol: float = DEFAULT_RTOL,
    maxiter: int | None = None,
    zero_mean: bool = False,
) -> CGResult:
    """Solve ``(a I - b Lap) x = rhs`` on a cell grid with Neumann faces.

    Convergence is declared when ``||r||_2 <= rtol * ref_norm``; ``ref_norm``
    defaults to ``||rhs||_2``. The iteration cap defaults to ``10 * nx * ny``.
    """
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    ny, nx = rhs.shape
    if maxiter is None:
        maxiter = 10 * nx * ny
    if ref_norm is None:
        ref_norm = float(np.linalg.norm(rhs))
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if zero_mean:
        x -= x.mean()
    if ref_norm == 0.0:
        return CGResult(np.zeros_like(rhs), 0, 0.0)
    its, rnorm = _pcg(rhs, x, float(a), b / (hx * hx), b / (hy * hy), rtol * ref_norm, int(maxiter), zero_mean)
    relres = rnorm / ref_norm
    if its < 0:
        raise SolverError(
            f"CG stopped after {-its} iterations with relative residual {relres:.3e} (target {rtol:.1e}, {nx}x{ny} grid)"
        )
    if zero_mean:
        x -= x.mean()
    return CGResult(x, its, relres)
