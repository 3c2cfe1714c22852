"""Numerical studies: gamma sweep, critical-mass / blowup probe, rescaling
residuals and the Liapunov identity check.

All runs start from a Gaussian total density at switching equilibrium with
``w0 = 0``. Comparisons between runs rely on ``timeloop.advance`` sampling
every run at the same times.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Field, Grid, Params, StateFull, StateLimit, grad_sq_norm, make_grid, norm_lp, norm_w12
from .full import BlowupAbort, equilibrated_full_state, step_full
from .functionals import critical_mass, dissipation, liapunov, chemo_residual, full_view
from .limit import step_limit
from .operators import chemotactic_divergence_array, laplacian_array
from .timeloop import advance


def gaussian_density(
    grid: Grid,
    mass: float,
    width: float,
    center: tuple[float, float] | None = None,
    floor_rel: float = 1e-8,
) -> Field:
    """Gaussian bump plus a constant floor of ``floor_rel * mean``, scaled to the exact mass."""
    if mass <= 0:
        raise ValueError("target mass must be positive")
    if width <= 0:
        raise ValueError("width must be positive")
    if center is None:
        center = (0.5 * grid.lx, 0.5 * grid.ly)
    x, y = grid.centers()
    bump = np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2.0 * width**2))
    bump = np.clip(bump, 0.0, None)
    bump += floor_rel * bump.mean()
    bump *= mass / (grid.cell_area * bump.sum())
    return Field(grid, bump)


def full_stepper(state, params, dt, blowup_threshold):
    return step_full(state, params, dt, blowup_threshold)


def limit_stepper(scheme: str = "implicit"):
    return functools.partial(step_limit, scheme=scheme)


def _diff_w12(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return norm_w12(Field._wrap(grid, a - b))


def _l2sq(a: np.ndarray, grid: Grid) -> float:
    return grid.cell_area * float(np.dot(a.reshape(-1), a.reshape(-1)))


# ---------------------------------------------------------------------------
# gamma sweep


@dataclass(frozen=True)
class SweepConfig:
    nx: int = 128
    ny: int = 128
    lx: float = 1.0
    ly: float = 1.0
    params: Params = Params(dt=1e-3, t_end=1.0, diag_every=10)
    gammas: tuple[float, ...] = (1.0, 10.0, 1e2, 1e3, 1e4)
    mass_fraction: float = 0.5
    width: float = 0.1
    center: tuple[float, float] | None = None
    limit_scheme: str = "relaxed"
    self_compare: bool = False
    workers: int = 1


@dataclass
class SweepReport:
    gammas: list[float]
    err_n_l2t: list[float]
    err_w_w12_sup: list[float]
    err_e_l2t: list[float]
    fitted_order: float
    times: list[float] = field(default_factory=list)
    liapunov_c2: list[float] = field(default_factory=list)


def fit_order(gammas, errors) -> float:
    """Least-squares slope of log(error) against log(gamma) over positive errors."""
    pts = [(math.log(g), math.log(e)) for g, e in zip(gammas, errors) if e > 0 and math.isfinite(e)]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _sweep_member(config: SweepConfig, gamma: float, ref_t, ref_n, ref_w) -> tuple[list, list, list, float]:
    grid = make_grid(config.nx, config.ny, config.lx, config.ly)
    params = config.params.replace(gamma=gamma)
    mass = config.mass_fraction * critical_mass(params)
    n0 = gaussian_density(grid, mass, config.width, config.center)
    if config.self_compare:
        state = StateLimit(0.0, n0, Field.constant(grid, 0.0))
        stepper = limit_stepper(config.limit_scheme)
    else:
        state = equilibrated_full_state(n0, Field.constant(grid, 0.0), params)
        stepper = full_stepper
    en, ew, ee, c2 = [], [], [], [-math.inf]
    shortfall = (4.0 * math.pi * (1.0 + params.theta) * params.d_w - mass) / (8.0 * math.pi)

    def record(s, _steps):
        k = len(en)
        if abs(s.t - ref_t[k]) > 1e-12 * max(1.0, abs(ref_t[k])):
            raise RuntimeError(f"sweep runs out of sync: t={s.t} vs reference {ref_t[k]}")
        fs = full_view(s, params.theta)
        n = fs.u.array + fs.v.array
        en.append(_l2sq(n - ref_n[k], grid))
        ew.append(_diff_w12(fs.w.array, ref_w[k], grid))
        ee.append(_l2sq(params.theta * fs.v.array - fs.u.array, grid))
        pg = params if isinstance(s, StateFull) else params.replace(gamma=math.inf)
        lower = shortfall * grad_sq_norm(fs.w) + 0.5 * pg.alpha * (1.0 + pg.theta) * norm_lp(fs.w, 2) ** 2
        if math.isfinite(pg.gamma):
            lower += _l2sq(chemo_residual(fs, pg), grid) / (2.0 * pg.gamma)
        c2[0] = max(c2[0], lower - liapunov(fs, pg))

    advance(state, stepper, params, on_diag=record)
    return en, ew, ee, c2[0]


def _reference_run(config: SweepConfig):
    grid = make_grid(config.nx, config.ny, config.lx, config.ly)
    params = config.params.replace(gamma=math.inf)
    mass = config.mass_fraction * critical_mass(params)
    state = StateLimit(0.0, gaussian_density(grid, mass, config.width, config.center), Field.constant(grid, 0.0))
    ts, ns, ws = [], [], []

    def record(s, _steps):
        ts.append(s.t)
        ns.append(s.n.array.copy())
        ws.append(s.w.array.copy())

    advance(state, limit_stepper(config.limit_scheme), params, on_diag=record)
    return ts, ns, ws


def run_gamma_sweep(config: SweepConfig = SweepConfig()) -> SweepReport:
    """Distance of full-system runs to the limit system, one run per gamma.

    Runs for different gamma are independent and may go to worker processes;
    results are gathered in the order of ``config.gammas``.
    """
    ref_t, ref_n, ref_w = _reference_run(config)
    gammas = [float(g) for g in config.gammas]
    job = functools.partial(_sweep_member, config, ref_t=ref_t, ref_n=ref_n, ref_w=ref_w)
    if config.workers > 1 and len(gammas) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(job, gammas))
    else:
        results = [job(g) for g in gammas]
    t = np.asarray(ref_t)
    err_n = [float(np.trapezoid(np.asarray(r[0]), t)) for r in results]
    err_w = [float(max(r[1])) for r in results]
    err_e = [float(np.trapezoid(np.asarray(r[2]), t)) for r in results]
    return SweepReport(
        gammas=gammas,
        err_n_l2t=err_n,
        err_w_w12_sup=err_w,
        err_e_l2t=err_e,
        fitted_order=fit_order(gammas, err_n),
        times=list(ref_t),
        liapunov_c2=[float(r[3]) for r in results],
    )


# ---------------------------------------------------------------------------
# blowup probe


@dataclass(frozen=True)
class BlowupConfig:
    nx: int = 256
    ny: int = 256
    lx: float = 1.0
    ly: float = 1.0
    params: Params = Params(dt=1e-3, t_end=1.0, diag_every=1)
    gammas: tuple[float, ...] = (1.0, 10.0, 1e2, 1e3)
    mass_fraction: float = 1.5
    width: float = 0.05
    # the corner (0, 0): the only place in a rectangle where 1.5x the critical mass can aggregate
    center: tuple[float, float] | None = (0.0, 0.0)
    saturation_factor: float = 10.0
    threshold_factor: float = 1e6
    t_factor: float = 2.0
    max_steps: int = 200_000
    limit_scheme: str = "implicit"


@dataclass
class BlowupReport:
    mass: float
    crit: float
    t_saturation: float | None
    max_linf_n: float
    initial_linf_n: float
    t_full: float
    gammas: list[float] = field(default_factory=list)
    sup_l2_u: list[float] = field(default_factory=list)
    sup_l2_v: list[float] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    limit_event: str = "completed"


def run_blowup_probe(config: BlowupConfig = BlowupConfig()) -> BlowupReport:
    """Run the limit system until ||n||_inf saturates, then the full system past that time.

    Saturation is the first step with ``max n >= saturation_factor * max n0``,
    a fixed-grid stand-in for blowup. Solver aborts are recorded, not raised.
    """
    grid = make_grid(config.nx, config.ny, config.lx, config.ly)
    params = config.params
    crit = critical_mass(params)
    mass = config.mass_fraction * crit
    n0 = gaussian_density(grid, mass, config.width, config.center)
    w0 = Field.constant(grid, 0.0)
    n0max = float(n0.values.max())
    threshold = config.threshold_factor * n0max
    sat_level = config.saturation_factor * n0max

    peak = [n0max]

    def saturated(s, report):
        peak[0] = max(peak[0], report.max_n)
        return report.max_n >= sat_level

    limit_event = "completed"
    try:
        out = advance(
            StateLimit(0.0, n0, w0), limit_stepper(config.limit_scheme), params.replace(gamma=math.inf),
            blowup_threshold=threshold, max_steps=config.max_steps, stop=saturated,
        )
        t_sat = out.state.t if out.event == "stopped" else None
        if out.event == "max_steps":
            limit_event = "max_steps"
    except BlowupAbort as exc:
        t_sat = exc.state.t
        peak[0] = max(peak[0], exc.max_n)
        limit_event = "blowup_abort"
    if t_sat is not None:
        limit_event = "saturated"

    t_full = params.t_end if t_sat is None else min(params.t_end, config.t_factor * t_sat)
    report = BlowupReport(mass, crit, t_sat, peak[0], n0max, t_full, limit_event=limit_event)
    for gamma in config.gammas:
        pg = params.replace(gamma=float(gamma))
        state = equilibrated_full_state(n0, w0, pg)
        sup = [norm_lp(state.u, 2), norm_lp(state.v, 2)]

        def track(s, _report):
            sup[0] = max(sup[0], norm_lp(s.u, 2))
            sup[1] = max(sup[1], norm_lp(s.v, 2))
            return False

        try:
            out = advance(state, full_stepper, pg, t_end=t_full, blowup_threshold=threshold,
                          max_steps=config.max_steps, stop=track)
            event = out.event or "completed"
        except BlowupAbort as exc:
            track(exc.state, None)
            event = "blowup_abort"
        report.gammas.append(float(gamma))
        report.sup_l2_u.append(sup[0])
        report.sup_l2_v.append(sup[1])
        report.events.append(event)
    return report


# ---------------------------------------------------------------------------
# rescaling check


@dataclass
class RescaleReport:
    s: list[float]
    res_u: list[float]
    res_v: list[float]

    @property
    def max_res_u(self) -> float:
        return max(self.res_u, default=0.0)

    @property
    def max_res_v(self) -> float:
        return max(self.res_v, default=0.0)


def _uniform_cadence(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three snapshots")
    d = np.diff(t)
    step = float(d.mean())
    if step <= 0 or np.max(np.abs(d - step)) > 1e-9 * step:
        raise ValueError("snapshot cadence is not uniform")
    return step


def rescale_check(trajectory, params: Params) -> RescaleReport:
    """Residuals of the unit-coefficient Keller-Segel system for the rescaled trajectory.

    ``U(s) = n(t) / theta`` and ``V(s) = w(t)`` with ``t = (1 + theta) s / theta``:
    snapshot j of the limit run sits at rescaled time ``j * dt_snap * theta / (1 + theta)``.
    Time derivatives are centred differences, so residuals exist at interior snapshots.
    """
    dt_snap = _uniform_cadence([s.t for s in trajectory])
    th, d, a = params.theta, params.d_w, params.alpha
    ds = dt_snap * th / (1.0 + th)
    tau = th / ((1.0 + th) * d)
    g = trajectory[0].grid
    U = [s.n.array / th for s in trajectory]
    V = [s.w.array for s in trajectory]
    svals, ru, rv = [], [], []
    for j in range(1, len(trajectory) - 1):
        dU = (U[j + 1] - U[j - 1]) / (2.0 * ds)
        dV = (V[j + 1] - V[j - 1]) / (2.0 * ds)
        r1 = dU - chemotactic_divergence_array(U[j], V[j], g.hx, g.hy)
        r2 = tau * dV - (laplacian_array(V[j], g.hx, g.hy) - (a / d) * V[j] + tau * U[j])
        svals.append(trajectory[j].t * th / (1.0 + th))
        ru.append(math.sqrt(_l2sq(r1, g)))
        rv.append(math.sqrt(_l2sq(r2, g)))
    return RescaleReport(svals, ru, rv)


def limit_residual(trajectory, params: Params) -> list[float]:
    """L2 residual of the unscaled n-equation along a trajectory, same stencil as rescale_check."""
    dt_snap = _uniform_cadence([s.t for s in trajectory])
    g = trajectory[0].grid
    out = []
    for j in range(1, len(trajectory) - 1):
        dn = (trajectory[j + 1].n.array - trajectory[j - 1].n.array) / (2.0 * dt_snap)
        r = dn - params.kappa * chemotactic_divergence_array(trajectory[j].n.array, trajectory[j].w.array, g.hx, g.hy)
        out.append(math.sqrt(_l2sq(r, g)))
    return out


def limit_trajectory(state: StateLimit, params: Params, scheme: str = "implicit") -> list[StateLimit]:
    """Limit run saving every diagnostic time (use diag_every=1 for every step)."""
    traj = []
    advance(state, limit_stepper(scheme), params, on_diag=lambda s, _k: traj.append(s))
    return traj


@dataclass(frozen=True)
class RescaleConfig:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    params: Params = Params(dt=1e-3, t_end=0.2, diag_every=1)
    mass_fraction: float = 0.5
    width: float = 0.15
    center: tuple[float, float] | None = None
    levels: int = 2


def rescale_refinement(config: RescaleConfig = RescaleConfig()) -> tuple[list[float], list[RescaleReport]]:
    """rescale_check on the same smooth run at dt, dt/2, ...; returns (dts, reports)."""
    grid = make_grid(config.nx, config.ny, config.lx, config.ly)
    params = config.params
    mass = config.mass_fraction * critical_mass(params)
    n0 = gaussian_density(grid, mass, config.width, config.center)
    dts, reports = [], []
    for level in range(config.levels):
        p = params.replace(dt=params.dt / 2**level, diag_every=1)
        traj = limit_trajectory(StateLimit(0.0, n0, Field.constant(grid, 0.0)), p)
        dts.append(p.dt)
        reports.append(rescale_check(traj, p))
    return dts, reports


# ---------------------------------------------------------------------------
# Liapunov identity


@dataclass
class LiapunovReport:
    times: list[float]
    liapunov: list[float]
    dissipation: list[float]

    @property
    def residuals(self) -> np.ndarray:
        """``|(L(t+dt) - L(t)) / dt + D(t)|`` for each consecutive pair of rows."""
        t = np.asarray(self.times)
        L = np.asarray(self.liapunov)
        D = np.asarray(self.dissipation)
        return np.abs(np.diff(L) / np.diff(t) + D[:-1])

    @property
    def max_rel_increase(self) -> float:
        """Largest single-row increase of L relative to |L(0)| (<= 0 when L never increases)."""
        L = np.asarray(self.liapunov)
        return float(np.max(np.diff(L)) / abs(L[0]))


def liapunov_run(grid: Grid, params: Params, mass_fraction: float = 0.5, width: float = 0.1,
                 center: tuple[float, float] | None = None) -> LiapunovReport:
    mass = mass_fraction * critical_mass(params)
    state = equilibrated_full_state(gaussian_density(grid, mass, width, center), Field.constant(grid, 0.0), params)
    rep = LiapunovReport([], [], [])

    def record(s, _k):
        rep.times.append(s.t)
        rep.liapunov.append(liapunov(s, params))
        rep.dissipation.append(dissipation(s, params))

    advance(state, full_stepper, params, on_diag=record)
    return rep
