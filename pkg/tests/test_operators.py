import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_force_chemotaxis, dense_laplacian, neumann_matrix_1d

from chemoswitch.core import Field, make_grid
from chemoswitch.operators import (
    FaceFluxes,
    chemotactic_divergence,
    gradient_faces,
    laplacian_neumann,
)


@pytest.mark.parametrize("lx, ly", [(1.0, 1.0), (1.3, 0.7)])
def test_laplacian_matches_dense_matrix(lx, ly):
    g = make_grid(8, 8, lx, ly)
    rng = np.random.default_rng(1)
    a = dense_laplacian(g)
    for _ in range(20):
        f = Field(g, rng.standard_normal(g.size))
        ref = a @ f.values
        got = laplacian_neumann(f).values
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_laplacian_of_constant_is_zero():
    g = make_grid(5, 7, 2.0, 1.0)
    assert np.all(laplacian_neumann(Field.constant(g, 3.7)).values == 0.0)


@pytest.mark.parametrize("k", [1, 2, 3, 5, 7])
def test_cosine_modes_are_eigenfields(k):
    for nx, lx in ((8, 1.0), (16, 2.5)):
        g = make_grid(nx, 1 + 1, lx, 1.0)
        f = Field.from_function(g, lambda x, y: np.cos(k * np.pi * x / lx))
        lam = -(2.0 / g.hx**2) * (1.0 - math.cos(k * math.pi * g.hx / lx))
        got = laplacian_neumann(f).values
        assert np.max(np.abs(got - lam * f.values)) <= 1e-12 * abs(lam)


def test_eigenvalue_against_direct_matrix_8x1():
    n, l = 8, 1.0
    h = l / n
    evals = np.sort(np.linalg.eigvalsh(neumann_matrix_1d(n, h)))[::-1]
    ks = np.arange(n)
    formula = -(2.0 / h**2) * (1.0 - np.cos(ks * np.pi * h / l))
    assert np.allclose(evals, formula, rtol=0, atol=1e-12 * abs(formula).max())


def test_gradient_faces():
    g = make_grid(6, 4, 1.0, 1.0)
    zero = gradient_faces(Field.constant(g, 2.0))
    assert not zero.fx.any() and not zero.fy.any()
    lin = gradient_faces(Field.from_function(g, lambda x, y: x))
    assert np.all(lin.fx[:, 1:-1] == pytest.approx(1.0, abs=1e-13))
    assert np.all(lin.fx[:, [0, -1]] == 0.0)
    assert not lin.fy.any()


def test_face_flux_shape_check():
    g = make_grid(3, 3, 1.0, 1.0)
    with pytest.raises(ValueError):
        FaceFluxes(g, np.zeros((3, 3)), np.zeros((4, 3)))


def test_chemotaxis_matches_brute_force():
    rng = np.random.default_rng(2024)
    g = make_grid(4, 4, 1.0, 1.0)
    worst = 0.0
    for _ in range(1000):
        u = rng.uniform(0.0, 0.1, g.size)
        w = rng.standard_normal(g.size)
        ref = brute_force_chemotaxis(u, w, g)
        got = chemotactic_divergence(Field(g, u), Field(g, w)).values
        worst = max(worst, float(np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref)))))
    assert worst <= 1e-12


def test_chemotaxis_reductions():
    rng = np.random.default_rng(3)
    g = make_grid(9, 6, 1.0, 0.8)
    w = Field(g, rng.standard_normal(g.size))
    u = Field(g, rng.uniform(0, 1, g.size))
    c = 2.5
    got = chemotactic_divergence(Field.constant(g, c), w).values
    assert np.allclose(got, -c * laplacian_neumann(w).values, rtol=0, atol=1e-12 * np.abs(got).max())
    flat = chemotactic_divergence(u, Field.constant(g, 1.0)).values
    assert np.array_equal(flat, laplacian_neumann(u).values)


grid_shapes = st.tuples(st.integers(2, 9), st.integers(2, 9))


@settings(max_examples=60, deadline=None)
@given(grid_shapes, st.integers(0, 2**32 - 1))
def test_divergences_sum_to_zero(shape, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(shape[0], shape[1], 1.0, 1.7)
    u = Field(g, rng.uniform(0, 5, g.size))
    w = Field(g, 3 * rng.standard_normal(g.size))
    scale = 1.0 / (g.hx * g.hy) * (u.values.max() * np.abs(w.values).max() + u.values.max())
    assert abs(chemotactic_divergence(u, w).values.sum()) <= 1e-12 * scale * g.size
    assert abs(laplacian_neumann(w).values.sum()) <= 1e-12 * scale * g.size


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(-1e3, 1e3)))
def test_laplacian_is_negative_semidefinite(vals):
    g = make_grid(4, 4, 1.0, 1.0)
    f = Field(g, vals)
    assert float(np.dot(vals, laplacian_neumann(f).values)) <= 1e-9 * (1.0 + np.dot(vals, vals)) * 32
