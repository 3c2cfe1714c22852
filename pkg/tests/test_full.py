import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoswitch.core import Field, Params, StateFull, integrate, make_grid
from chemoswitch.experiments import gaussian_density
from chemoswitch.full import (
    BlowupAbort,
    cfl_limit,
    equilibrated_full_state,
    exchange_factor,
    exchange_relax,
    step_full,
    step_u_transport_diffusion,
    step_w,
)
from chemoswitch.operators import laplacian_neumann


def constant_state(g, u, v, w, t=0.0):
    return StateFull(t, Field.constant(g, u), Field.constant(g, v), Field.constant(g, w))


def test_exchange_closed_form():
    g = make_grid(4, 4, 1.0, 1.0)
    p = Params(theta=1.0, gamma=10.0)
    out = exchange_relax(constant_state(g, 2.0, 1.0, 0.0), p, 0.1)
    assert out.u.values == pytest.approx(np.full(16, 1.5676676), abs=5e-8)
    assert out.v.values == pytest.approx(np.full(16, 1.4323324), abs=5e-8)
    assert np.all(out.u.values == (3 + math.exp(-2)) / 2)


def test_exchange_fixed_point_and_infinite_rate():
    g = make_grid(3, 3, 1.0, 1.0)
    p = Params(theta=2.5, gamma=7.0)
    eq = constant_state(g, 2.5, 1.0, 0.3)
    out = exchange_relax(eq, p, 0.4)
    assert np.allclose(out.u.values, 2.5, rtol=1e-15) and np.allclose(out.v.values, 1.0, rtol=1e-15)
    assert exchange_factor(Params(gamma=math.inf), 1e-3) == 0.0
    inf = exchange_relax(constant_state(g, 0.0, 3.5, 0.0), Params(theta=2.5, gamma=math.inf), 1e-3)
    assert np.allclose(inf.u.values, 2.5) and np.allclose(inf.v.values, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 1e4), st.floats(1e-4, 1.0), st.integers(0, 2**32 - 1))
def test_exchange_keeps_n_and_positivity(theta, gamma, dt, seed):
    g = make_grid(5, 4, 1.0, 1.0)
    rng = np.random.default_rng(seed)
    s = StateFull(0.0, Field(g, rng.uniform(0, 3, 20)), Field(g, rng.uniform(0, 3, 20)), Field.constant(g, 0.0))
    out = exchange_relax(s, Params(theta=theta, gamma=gamma), dt)
    n0 = s.u.values + s.v.values
    assert np.allclose(out.u.values + out.v.values, n0, rtol=1e-14, atol=0)
    assert out.u.values.min() >= 0 and out.v.values.min() >= 0


def test_transport_with_flat_w_is_heat_step():
    g = make_grid(12, 12, 1.0, 1.0)
    rng = np.random.default_rng(1)
    u = Field(g, rng.uniform(0, 1, g.size))
    p = Params()
    dt = 1e-2
    new = step_u_transport_diffusion(u, Field.constant(g, 0.7), p, dt)
    # backward Euler: new - dt Lap new = u
    resid = new.values - dt * laplacian_neumann(new).values - u.values
    assert np.max(np.abs(resid)) <= 1e-8
    c = step_u_transport_diffusion(Field.constant(g, 2.0), Field.constant(g, 0.7), p, dt)
    assert np.max(np.abs(c.values - 2.0)) <= 1e-14


def test_transport_conserves_mass():
    g = make_grid(32, 32, 1.0, 1.0)
    rng = np.random.default_rng(4)
    u = gaussian_density(g, 3.0, 0.1)
    w = Field(g, rng.uniform(0, 1, g.size))
    p = Params()
    dt = 0.5 * cfl_limit(w.array, p, g.hx, g.hy)
    new = step_u_transport_diffusion(u, w, p, dt)
    assert abs(integrate(new) - integrate(u)) <= 1e-12 * integrate(u)
    assert new.values.min() >= 0


def test_step_w_homogeneous_ode():
    g = make_grid(4, 4, 1.0, 1.0)
    p = Params(alpha=1.0)
    w = Field.constant(g, 0.0)
    v = Field.constant(g, 1.0)
    for _ in range(1000):
        w = step_w(w, v, p, 1e-3)
    assert np.all(np.abs(w.values - 0.6321206) <= 5e-4)
    assert np.allclose(w.values, 1 - 1.001 ** -1000, rtol=1e-9)


def test_step_w_steady_balance():
    g = make_grid(6, 6, 1.0, 1.0)
    p = Params(alpha=2.0)
    w = Field.constant(g, 0.75)
    out = step_w(w, Field.constant(g, 1.5), p, 0.05)
    assert np.max(np.abs(out.values - 0.75)) <= 1e-14


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 10.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_step_w_preserves_sign(seed, dt, d_w, alpha):
    # (I + dt alpha - dt D Lap) is an M-matrix, so its inverse is entrywise non-negative
    rng = np.random.default_rng(seed)
    g = make_grid(10, 8, 1.0, 1.0)
    mask = rng.uniform(size=g.size) < 0.2
    w = Field(g, np.where(mask, rng.uniform(0, 5, g.size), 0.0))
    v = Field(g, np.where(rng.uniform(size=g.size) < 0.2, rng.uniform(0, 5, g.size), 0.0))
    out = step_w(w, v, Params(d_w=d_w, alpha=alpha), dt)
    assert out.values.min() >= -1e-10 * max(1.0, out.values.max())


@pytest.mark.parametrize("theta, alpha, gamma", [(1.0, 1.0, 100.0), (0.3, 2.0, 1.0), (4.0, 0.5, math.inf)])
def test_homogeneous_steady_state_is_fixed(theta, alpha, gamma):
    g = make_grid(16, 16, 1.0, 1.0)
    p = Params(theta=theta, alpha=alpha, gamma=gamma, dt=1e-3)
    nbar = 3.0
    v = nbar / (1 + theta)
    s = constant_state(g, theta * v, v, v / alpha)
    worst = 0.0
    for _ in range(1000):
        new, _ = step_full(s, p)
        worst = max(worst, max(float(np.max(np.abs(getattr(new, k).values - getattr(s, k).values))) for k in "uvw"))
        s = new
    assert worst <= 1e-12


def test_step_full_conserves_mass_per_step():
    g = make_grid(32, 32, 1.0, 1.0)
    p = Params(gamma=50.0, dt=1e-3)
    s = equilibrated_full_state(gaussian_density(g, 4 * math.pi, 0.1), Field.constant(g, 0.0), p)
    m0 = integrate(s.u) + integrate(s.v)
    for _ in range(30):
        s, rep = step_full(s, p)
        m = integrate(s.u) + integrate(s.v)
        assert abs(m - m0) <= 1e-12 * m0
        assert rep.dt_used <= p.dt and rep.max_n > 0


def test_blowup_threshold_aborts_with_state():
    g = make_grid(8, 8, 1.0, 1.0)
    p = Params()
    s = equilibrated_full_state(gaussian_density(g, 1.0, 0.2), Field.constant(g, 0.0), p)
    with pytest.raises(BlowupAbort) as info:
        step_full(s, p, blowup_threshold=1e-6)
    assert info.value.state.t > 0 and info.value.max_n > 1e-6
