"""Scalar certificates evaluated on discrete states.

All integrals use the midpoint rule; gradients are face differences with
zero Neumann faces, each face weighted by ``hx * hy``. Time derivatives of
w are never differenced in time: they are taken from the right-hand side
``D Lap w - alpha w + v`` of the chemoattractant equation.

``gamma = inf`` is accepted and means the switching-equilibrium limit: the
``1/gamma`` terms vanish and the exchange dissipation is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DiagRecord, Field, Grid, Params, StateFull, StateLimit, grad_sq_norm, integrate, norm_linf, norm_lp, norm_w12
from .limit import limit_as_full_arrays
from .operators import laplacian_array


@dataclass(frozen=True)
class FunctionalConfig:
    log_floor: float = 1e-14

    def __post_init__(self) -> None:
        if not (0 < self.log_floor <= 1e-8):
            raise ValueError(f"log_floor must lie in (0, 1e-8], got {self.log_floor}")


DEFAULT_CONFIG = FunctionalConfig()


def _L(r: np.ndarray) -> np.ndarray:
    # r ln r - r + 1, continuous at r = 0 where it equals 1
    safe = np.where(r > 0, r, 1.0)
    return r * np.log(safe) - r + 1.0


def _require_nonneg(f: Field, name: str = "field") -> None:
    if f.values.min() < 0:
        raise ValueError(f"{name} must be non-negative")


def entropy_L(f: Field) -> float:
    _require_nonneg(f)
    return float(f.grid.cell_area * np.sum(_L(f.values)))


def entropy_L_theta(f: Field, theta: float) -> float:
    if theta <= 0:
        raise ValueError("theta must be positive")
    _require_nonneg(f)
    return float(f.grid.cell_area * np.sum(_L(theta * f.values)) / theta)


def _sq(a: np.ndarray, g: Grid) -> float:
    return g.cell_area * float(np.dot(a.reshape(-1), a.reshape(-1)))


def _grad_sq(a: np.ndarray, g: Grid) -> float:
    return grad_sq_norm(Field._wrap(g, a))


def chemo_residual(state: StateFull, params: Params) -> np.ndarray:
    """``D Lap w - alpha w + v``, i.e. the time derivative of w."""
    g = state.grid
    w = state.w.array
    return params.d_w * laplacian_array(w, g.hx, g.hy) - params.alpha * w + state.v.array


def _inv_gamma(params: Params) -> float:
    return 0.0 if math.isinf(params.gamma) else 1.0 / params.gamma


def liapunov(state: StateFull, params: Params) -> float:
    g = state.grid
    u, v, w = state.u.values, state.v.values, state.w.values
    th = params.theta
    local = g.cell_area * float(np.sum(_L(u) + _L(th * v) / th - (u + v) * w))
    quad = 0.5 * (1.0 + th) * (params.d_w * _grad_sq(state.w.array, g) + params.alpha * _sq(w, g))
    res = 0.5 * _inv_gamma(params) * _sq(chemo_residual(state, params), g)
    return local + quad + res


def dissipation_terms(state: StateFull, params: Params, cfg: FunctionalConfig = DEFAULT_CONFIG) -> tuple[float, float, float, float]:
    """The four non-negative contributions to the dissipation, in order.

    1. ``int u |grad(ln u - w)|^2`` with arithmetic face means of u
    2. ``gamma int (theta v - u)(ln(theta v) - ln u)``
    3. ``(D/gamma) ||grad R||^2``
    4. ``(1 + theta + alpha/gamma) ||R||^2``

    where ``R = D Lap w - alpha w + v``. Logarithms use ``max(., log_floor)``
    applied to u and to theta*v, which keeps term 2 non-negative cell by cell.
    """
    g = state.grid
    u, v, w = state.u.array, state.v.array, state.w.array
    th = params.theta
    fl = cfg.log_floor
    phi = np.log(np.maximum(u, fl)) - w
    dx = (phi[:, 1:] - phi[:, :-1]) / g.hx
    dy = (phi[1:, :] - phi[:-1, :]) / g.hy
    ux = 0.5 * (u[:, 1:] + u[:, :-1])
    uy = 0.5 * (u[1:, :] + u[:-1, :])
    t1 = g.cell_area * (float(np.sum(ux * dx * dx)) + float(np.sum(uy * dy * dy)))

    if math.isinf(params.gamma):
        t2 = 0.0
    else:
        tv = th * v
        t2 = params.gamma * g.cell_area * float(np.sum((tv - u) * (np.log(np.maximum(tv, fl)) - np.log(np.maximum(u, fl)))))

    r = chemo_residual(state, params)
    ig = _inv_gamma(params)
    t3 = params.d_w * ig * _grad_sq(r, g)
    t4 = (1.0 + th + params.alpha * ig) * _sq(r, g)
    return t1, t2, t3, t4


def dissipation(state: StateFull, params: Params, cfg: FunctionalConfig = DEFAULT_CONFIG) -> float:
    return sum(dissipation_terms(state, params, cfg))


def small_time_functional(state: StateFull, params: Params) -> float:
    g = state.grid
    th, d, a = params.theta, params.d_w, params.alpha
    ig = _inv_gamma(params)
    w = state.w.array
    return (
        entropy_L(state.u)
        + entropy_L_theta(state.v, th)
        + 0.5 * th * _grad_sq(w, g)
        + a * th / (2.0 * d) * _sq(w, g)
        + ig / (2.0 * d) * _sq(chemo_residual(state, params), g)
        + 0.5 * ig * _sq(state.v.values, g)
    )


def exchange_deficit(state: StateFull, theta: float) -> Field:
    return Field._wrap(state.grid, theta * state.v.values - state.u.values)


def total_density(state: StateFull) -> Field:
    return Field._wrap(state.grid, state.u.values + state.v.values)


def critical_mass(params: Params) -> float:
    return 4.0 * math.pi * (1.0 + params.theta) * params.d_w


def gn_ratio(f: Field) -> float:
    """``||f||_4 / (||f||_{W^1_2}^{1/2} ||f||_2^{1/2})``; its sup estimates the GN constant."""
    l2 = norm_lp(f, 2)
    if l2 == 0.0:
        raise ValueError("gn_ratio is undefined for the zero field")
    return norm_lp(f, 4) / math.sqrt(norm_w12(f) * l2)


def mt_ratio(f: Field) -> float:
    """``int e^|f| / exp(||grad f||^2 / 8 pi + ||f||_1 / |Omega|)``; its sup estimates K_0."""
    g = f.grid
    a = np.abs(f.values)
    top = float(a.max())
    log_num = math.log(g.cell_area) + top + math.log(float(np.sum(np.exp(a - top))))
    log_den = grad_sq_norm(f) / (8.0 * math.pi) + norm_lp(f, 1) / g.area
    return math.exp(log_num - log_den)


def random_smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 6, scale: float = 1.0) -> Field:
    """Random cosine series with Neumann-compatible modes and decaying amplitudes."""
    k = np.arange(modes)
    amp = rng.standard_normal((modes, modes)) / (1.0 + k[:, None] ** 2 + k[None, :] ** 2)
    cx = np.cos(np.pi * np.outer(k, (np.arange(grid.nx) + 0.5) * grid.hx) / grid.lx)
    cy = np.cos(np.pi * np.outer(k, (np.arange(grid.ny) + 0.5) * grid.hy) / grid.ly)
    return Field._wrap(grid, scale * (cy.T @ amp.T @ cx))


def estimate_constants(grid: Grid, samples: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Empirical sup of gn_ratio and mt_ratio over random smooth fields: (c0_hat, k0_hat)."""
    rng = np.random.default_rng(seed)
    c0 = 0.0
    k0 = 0.0
    for _ in range(samples):
        f = random_smooth_field(grid, rng, scale=float(rng.uniform(0.1, 5.0)))
        if norm_lp(f, 2) == 0.0:
            continue
        c0 = max(c0, gn_ratio(f))
        k0 = max(k0, mt_ratio(f))
    return c0, k0


def full_view(state: StateFull | StateLimit, theta: float) -> StateFull:
    """A limit state seen as its switching-equilibrium split; full states pass through."""
    if isinstance(state, StateFull):
        return state
    g = state.grid
    u, v = limit_as_full_arrays(state.n.values, theta)
    return StateFull(state.t, Field._wrap(g, u), Field._wrap(g, v), state.w)


def diag_record(state: StateFull | StateLimit, params: Params, cfg: FunctionalConfig = DEFAULT_CONFIG) -> DiagRecord:
    """All diagnostics of one state. Limit states are evaluated with gamma = inf."""
    if isinstance(state, StateLimit):
        params = params.replace(gamma=math.inf)
    full = full_view(state, params.theta)
    n = total_density(full)
    return DiagRecord(
        t=float(state.t),
        mass_n=integrate(n),
        l2_u=norm_lp(full.u, 2),
        l2_v=norm_lp(full.v, 2),
        l2_n=norm_lp(n, 2),
        w12_w=norm_w12(full.w),
        linf_n=norm_linf(n),
        entropy_u=entropy_L(full.u),
        entropy_v=entropy_L_theta(full.v, params.theta),
        liapunov=liapunov(full, params),
        dissipation=dissipation(full, params, cfg),
        e_l2=norm_lp(exchange_deficit(full, params.theta), 2),
        p_gamma=small_time_functional(full, params),
    )
