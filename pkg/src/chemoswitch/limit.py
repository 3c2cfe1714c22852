"""Time stepping for the limit Keller-Segel system

    n_t = k div(grad n - n grad w),   w_t = D Lap w - alpha w + n / (1 + theta),

with ``k = theta / (1 + theta)``, reusing the substeps of the full solver.

Two diffusion treatments are available:

``"implicit"``  backward Euler for ``k Lap n`` after the explicit upwind drift.
``"relaxed"``   the gamma -> infinity limit of ``step_full`` itself: only the
                fraction ``k n`` is transported and diffused with unit
                coefficient, the rest is held fixed, and the result is
                re-equilibrated. Full runs at large gamma converge to this
                scheme at fixed (dt, h), so gamma sweeps compare against it.
"""

from __future__ import annotations

import numpy as np

from .core import Field, Params, StateLimit, StepReport
from .full import BlowupAbort, chemo_update_array, cfl_limit, transport_diffusion_array

SCHEMES = ("implicit", "relaxed")


def _transport_limit(n, w, dt, kappa, hx, hy, scheme):
    if scheme == "implicit":
        # advection is linear in n for fixed w, so scaling the drift by kappa scales the flux
        return transport_diffusion_array(n, kappa * w, dt, hx, hy, diffusivity=kappa)
    if scheme == "relaxed":
        moved, its = transport_diffusion_array(kappa * n, w, dt, hx, hy)
        return (1.0 - kappa) * n + moved, its
    raise ValueError(f"unknown limit scheme {scheme!r}; expected one of {SCHEMES}")


def step_limit(
    state: StateLimit,
    params: Params,
    dt: float | None = None,
    blowup_threshold: float | None = None,
    scheme: str = "implicit",
) -> tuple[StateLimit, StepReport]:
    g = state.grid
    hx, hy = g.hx, g.hy
    n, w = state.n.array, state.w.array
    cfl = cfl_limit(w, params, hx, hy)
    if dt is None:
        dt = min(params.dt, cfl)
    kappa = params.kappa

    n_new, it_n = _transport_limit(n, w, dt, kappa, hx, hy, scheme)
    w_new, it_w = chemo_update_array(w, n / (1.0 + params.theta), dt, params.d_w, params.alpha, hx, hy)

    new = StateLimit(state.t + dt, Field._wrap(g, n_new), Field._wrap(g, w_new))
    max_n = float(n_new.max())
    report = StepReport(dt, it_n, it_w, max_n, cfl)
    if blowup_threshold is not None and max_n > blowup_threshold:
        raise BlowupAbort(new, max_n, blowup_threshold)
    return new, report


def limit_from_full_ic(u0: Field, v0: Field, w0: Field | None = None, t: float = 0.0) -> StateLimit:
    """Initial datum of the limit system: n0 = u0 + v0, same chemoattractant."""
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 must share a grid")
    g = u0.grid
    if w0 is None:
        w0 = Field.constant(g, 0.0)
    return StateLimit(t, Field(g, u0.values + v0.values), w0)


def limit_as_full_arrays(n: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Equilibrium split (u, v) of a total density."""
    return theta * n / (1.0 + theta), n / (1.0 + theta)
