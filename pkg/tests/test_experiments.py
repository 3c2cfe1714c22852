import math

import numpy as np
import pytest

from chemoswitch.core import Field, Params, StateLimit, integrate, make_grid
from chemoswitch.experiments import (
    BlowupConfig,
    SweepConfig,
    fit_order,
    full_stepper,
    gaussian_density,
    limit_residual,
    limit_trajectory,
    liapunov_run,
    rescale_check,
    run_blowup_probe,
    run_gamma_sweep,
)
from chemoswitch.full import equilibrated_full_state
from chemoswitch.timeloop import advance, diag_times


def test_gaussian_density_has_exact_mass():
    g = make_grid(40, 30, 1.0, 0.75)
    for center in (None, (0.0, 0.0), (1.0, 0.2)):
        f = gaussian_density(g, 7.5, 0.05, center)
        assert integrate(f) == pytest.approx(7.5, rel=1e-14)
        assert f.values.min() > 0
    with pytest.raises(ValueError):
        gaussian_density(g, 0.0, 0.1)
    with pytest.raises(ValueError):
        gaussian_density(g, 1.0, -0.1)


def test_diag_times():
    p = Params(dt=0.01, diag_every=3)
    assert diag_times(p, 0.1) == pytest.approx([0.03, 0.06, 0.09, 0.1])
    assert diag_times(Params(dt=0.1, diag_every=1), 0.3) == pytest.approx([0.1, 0.2, 0.3])


def test_advance_row_count_and_alignment():
    g = make_grid(16, 16, 1.0, 1.0)
    p = Params(gamma=10.0, dt=1e-3, t_end=0.023, diag_every=4)
    s = equilibrated_full_state(gaussian_density(g, 2.0, 0.2), Field.constant(g, 0.0), p)
    rows = []
    out = advance(s, full_stepper, p, on_diag=lambda st, k: rows.append((st.t, k)))
    assert out.event is None
    assert out.steps == 23
    assert len(rows) == out.steps // p.diag_every + 2  # the final partial interval adds one row
    assert rows[-1][0] == 0.023
    assert [t for t, _ in rows[:-1]] == pytest.approx([0.004 * k for k in range(6)], abs=1e-15)


def test_advance_stop_callback():
    g = make_grid(8, 8, 1.0, 1.0)
    p = Params(dt=1e-3, t_end=1.0)
    s = StateLimit(0.0, gaussian_density(g, 1.0, 0.2), Field.constant(g, 0.0))
    out = advance(s, lambda st, pp, dt, thr: __import__("chemoswitch").step_limit(st, pp, dt, thr),
                  p, stop=lambda st, rep: st.t >= 0.005 - 1e-12)
    assert out.event == "stopped" and out.steps == 5


def test_fit_order():
    gs = [1.0, 10.0, 100.0]
    assert fit_order(gs, [1.0, 0.1, 0.01]) == pytest.approx(-1.0)
    assert math.isnan(fit_order([1.0], [1.0]))


def small_sweep(**kw):
    base = dict(nx=16, ny=16, params=Params(dt=2e-3, t_end=0.04, diag_every=2), gammas=(1.0, 100.0))
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_self_compare_is_zero():
    rep = run_gamma_sweep(small_sweep(gammas=(5.0,), self_compare=True))
    assert rep.err_n_l2t == [0.0] and rep.err_w_w12_sup == [0.0] and rep.err_e_l2t == [0.0]


def test_sweep_errors_shrink_with_gamma():
    rep = run_gamma_sweep(small_sweep(gammas=(1.0, 10.0, 100.0)))
    assert rep.err_n_l2t[0] > rep.err_n_l2t[1] > rep.err_n_l2t[2]
    assert rep.err_w_w12_sup[0] > rep.err_w_w12_sup[1] > rep.err_w_w12_sup[2]
    assert rep.fitted_order < 0
    assert len(rep.times) == 11


def test_sweep_parallel_matches_serial():
    a = run_gamma_sweep(small_sweep(workers=1))
    b = run_gamma_sweep(small_sweep(workers=2))
    assert (a.err_n_l2t, a.err_w_w12_sup, a.err_e_l2t) == (b.err_n_l2t, b.err_w_w12_sup, b.err_e_l2t)


def test_centered_subcritical_probe_stays_bounded():
    cfg = BlowupConfig(nx=32, ny=32, params=Params(dt=2e-3, t_end=0.2), gammas=(1.0,),
                       mass_fraction=0.5, width=0.1, center=None)
    rep = run_blowup_probe(cfg)
    assert rep.t_saturation is None and rep.limit_event == "completed"
    assert rep.max_linf_n <= 10 * rep.initial_linf_n
    assert rep.events == ["completed"] and rep.t_full == 0.2


def smooth_trajectory(theta, dt=2e-3, steps=10):
    g = make_grid(24, 24, 1.0, 1.0)
    p = Params(theta=theta, dt=dt, t_end=steps * dt, diag_every=1)
    return limit_trajectory(StateLimit(0.0, gaussian_density(g, 5.0, 0.15), Field.constant(g, 0.0)), p), p


@pytest.mark.parametrize("theta", [1.0, 2.0, 0.5])
def test_rescaled_residual_is_chain_rule_multiple(theta):
    traj, p = smooth_trajectory(theta)
    rep = rescale_check(traj, p)
    base = limit_residual(traj, p)
    factor = (1 + theta) / theta**2
    assert len(rep.res_u) == len(traj) - 2
    assert rep.res_u == pytest.approx([factor * r for r in base], rel=1e-10)
    if theta == 1.0:
        assert factor == 2.0


def test_rescale_homogeneous_trajectory():
    g = make_grid(16, 16, 1.0, 1.0)
    p = Params(theta=1.5, alpha=0.8, dt=1e-2, t_end=0.1, diag_every=1)
    nbar = 2.0
    s = StateLimit(0.0, Field.constant(g, nbar), Field.constant(g, nbar / (p.alpha * (1 + p.theta))))
    rep = rescale_check(limit_trajectory(s, p), p)
    assert rep.max_res_u <= 1e-10 and rep.max_res_v <= 1e-10


def test_rescale_rejects_uneven_cadence():
    traj, p = smooth_trajectory(1.0)
    with pytest.raises(ValueError, match="cadence"):
        rescale_check(traj[:3] + traj[4:], p)
    with pytest.raises(ValueError):
        rescale_check(traj[:2], p)


def test_liapunov_decreases_on_small_run():
    g = make_grid(24, 24, 1.0, 1.0)
    rep = liapunov_run(g, Params(gamma=10.0, dt=2e-3, t_end=0.05))
    assert rep.max_rel_increase <= 0
    assert len(rep.residuals) == len(rep.times) - 1
