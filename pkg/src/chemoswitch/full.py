"""Time stepping for the two-phenotype system with switching rate gamma.

One step is a Strang composition

    exchange(dt/2) -> u: upwind drift (explicit) + diffusion (backward Euler)
                   -> w: backward Euler with v frozen
                   -> exchange(dt/2)

The exchange substep is integrated exactly, so large gamma puts no
restriction on dt. The transport substep conserves the cell sum of u to
rounding (see ``linsolve``), the exchange conserves u + v cellwise.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Field, Params, StateFull, StepReport
from .linsolve import DEFAULT_RTOL, solve_shifted_neumann
from .operators import advection_array, laplacian_array, max_face_drift


class BlowupAbort(RuntimeError):
    """Raised when max(n) crosses the blowup threshold; carries the offending state."""

    def __init__(self, state, max_n: float, threshold: float):
        super().__init__(f"max n = {max_n:.6g} exceeded blowup threshold {threshold:.6g} at t = {state.t:.6g}")
        self.state = state
        self.max_n = max_n
        self.threshold = threshold


def exchange_factor(params: Params, dt: float) -> float:
    """Multiplier applied to the deficit theta*v - u over a step of length dt."""
    if math.isinf(params.gamma):
        return 0.0
    return math.exp(-params.gamma * (1.0 + params.theta) * dt)


def _exchange_arrays(u: np.ndarray, v: np.ndarray, theta: float, factor: float):
    n = u + v
    e = (theta * v - u) * factor
    return (theta * n - e) / (1.0 + theta), (n + e) / (1.0 + theta)


def exchange_relax(state: StateFull, params: Params, dt: float) -> StateFull:
    g = state.grid
    u, v = _exchange_arrays(state.u.values, state.v.values, params.theta, exchange_factor(params, dt))
    return StateFull(state.t, Field._wrap(g, u), Field._wrap(g, v), state.w)


def cfl_limit(w: np.ndarray, params: Params, hx: float, hy: float) -> float:
    drift = max_face_drift(w, hx, hy)
    if drift == 0.0:
        return math.inf
    return params.cfl_safety * min(hx, hy) / drift


def _clip_keep_sum(a: np.ndarray) -> np.ndarray:
    # The exact implicit solve is positivity preserving; CG stops at a residual
    # that can leave O(rtol) negatives near vacuum. Clip them and rescale so
    # the cell sum is unchanged.
    if a.min() >= 0.0:
        return a
    total = a.sum()
    a = np.maximum(a, 0.0)
    return a * (total / a.sum())


def transport_diffusion_array(u, w, dt, hx, hy, *, diffusivity=1.0, rtol=DEFAULT_RTOL):
    """Explicit upwind drift then implicit diffusion; returns (u_new, cg_iterations).

    The implicit solve is posed for the correction ``u_new - u*`` whose
    right-hand side has zero sum, and CG stays on that subspace.
    """
    ustar = u + dt * advection_array(u, w, hx, hy)
    if diffusivity == 0.0:
        return ustar, 0
    b = dt * diffusivity
    res = solve_shifted_neumann(
        b * laplacian_array(ustar, hx, hy), 1.0, b, hx, hy,
        ref_norm=float(np.linalg.norm(ustar)), rtol=rtol, zero_mean=True,
    )
    return _clip_keep_sum(ustar + res.x), res.iterations


def chemo_update_array(w, source, dt, d_w, alpha, hx, hy, *, rtol=DEFAULT_RTOL):
    """Backward Euler for ``w_t = D Lap w - alpha w + source``; returns (w_new, cg_iterations)."""
    rhs = w + dt * source
    res = solve_shifted_neumann(rhs, 1.0 + dt * alpha, dt * d_w, hx, hy, x0=w, rtol=rtol)
    x = res.x
    if x.min() < 0.0 and rhs.min() >= 0.0:
        x = np.maximum(x, 0.0)
    return x, res.iterations


def step_u_transport_diffusion(u: Field, w: Field, params: Params, dt: float) -> Field:
    g = u.grid
    arr, _ = transport_diffusion_array(u.array, w.array, dt, g.hx, g.hy)
    return Field._wrap(g, arr)


def step_w(w: Field, v: Field, params: Params, dt: float) -> Field:
    g = w.grid
    arr, _ = chemo_update_array(w.array, v.array, dt, params.d_w, params.alpha, g.hx, g.hy)
    return Field._wrap(g, arr)


def step_full(
    state: StateFull,
    params: Params,
    dt: float | None = None,
    blowup_threshold: float | None = None,
) -> tuple[StateFull, StepReport]:
    """Advance one Strang step.

    ``dt`` defaults to ``min(params.dt, cfl_limit)``; callers that pick their
    own dt are responsible for keeping it below the CFL limit.
    """
    g = state.grid
    hx, hy = g.hx, g.hy
    u, v, w = state.u.array, state.v.array, state.w.array
    cfl = cfl_limit(w, params, hx, hy)
    if dt is None:
        dt = min(params.dt, cfl)
    half = exchange_factor(params, 0.5 * dt)

    u, v = _exchange_arrays(u, v, params.theta, half)
    u_new, it_u = transport_diffusion_array(u, w, dt, hx, hy)
    w_new, it_w = chemo_update_array(w, v, dt, params.d_w, params.alpha, hx, hy)
    u_new, v_new = _exchange_arrays(u_new, v, params.theta, half)

    new = StateFull(state.t + dt, Field._wrap(g, u_new), Field._wrap(g, v_new), Field._wrap(g, w_new))
    max_n = float(np.max(u_new + v_new))
    report = StepReport(dt, it_u, it_w, max_n, cfl)
    if blowup_threshold is not None and max_n > blowup_threshold:
        raise BlowupAbort(new, max_n, blowup_threshold)
    return new, report


def equilibrated_full_state(n: Field, w: Field, params: Params, t: float = 0.0) -> StateFull:
    """Split a total density at switching equilibrium: u = theta n/(1+theta), v = n/(1+theta)."""
    g = n.grid
    return StateFull(
        t,
        Field._wrap(g, params.kappa * n.values),
        Field._wrap(g, n.values / (1.0 + params.theta)),
        w,
    )
