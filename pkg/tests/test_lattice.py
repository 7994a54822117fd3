import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hartree_lab.errors import InvalidArgumentError
from hartree_lab.lattice import (
    build_grid,
    convolve,
    field,
    inner,
    laplacian,
    laplacian_matrix,
    lp_norm,
    sample_interaction,
)

from conftest import even_field


def test_build_grid_spacing():
    g = build_grid(2.0, 4)
    assert (g.length, g.points, g.spacing) == (2.0, 4, 0.5)
    assert build_grid(1.0, 2).spacing == 0.5


@pytest.mark.parametrize("length, points", [(1.0, 0), (1.0, 1), (0.0, 4), (-1.0, 4)])
def test_build_grid_rejects(length, points):
    with pytest.raises(InvalidArgumentError):
        build_grid(length, points)


def test_laplacian_kills_constants():
    g = build_grid(3.0, 7)
    assert np.allclose(laplacian(field(np.full(7, 2.5), g)).values, 0, atol=1e-12)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_laplacian_plane_wave_eigenvalue(m):
    g = build_grid(5.0, 10)
    x = g.positions()
    f = field(np.exp(2j * np.pi * m * x / g.length), g)
    expected = -(2 / g.spacing**2) * (1 - np.cos(2 * np.pi * m / g.points))
    np.testing.assert_allclose(laplacian(f).values, expected * f.values, atol=1e-10)


def test_laplacian_matches_dense_matrix(rng):
    g = build_grid(4.0, 13)
    f = field(rng.normal(size=13) + 1j * rng.normal(size=13), g)
    np.testing.assert_allclose(laplacian(f).values, laplacian_matrix(g) @ f.values, atol=1e-13 / g.spacing**2)


def test_laplacian_self_adjoint(rng):
    g = build_grid(2.0, 9)
    f = field(rng.normal(size=9) + 1j * rng.normal(size=9), g)
    q = field(rng.normal(size=9) + 1j * rng.normal(size=9), g)
    assert abs(inner(f, laplacian(q)) - inner(laplacian(f), q)) <= 1e-12 * g.points / g.spacing**2


def test_lp_norm_examples():
    g = build_grid(2.0, 4)
    assert math.isclose(lp_norm(field(np.full(4, 2.0), g), 2), math.sqrt(8.0), rel_tol=1e-15)
    f = field(np.array([1, -3j, 2, 0.5]), g)
    assert lp_norm(f, math.inf) == 3.0
    assert lp_norm(field(np.zeros(4), g), 3) == 0.0
    with pytest.raises(InvalidArgumentError):
        lp_norm(f, 0.5)


def test_lp_norm_high_precision(rng):
    from fractions import Fraction

    g = build_grid(3.0, 11)
    vals = rng.normal(size=11)
    exact = sum(Fraction(g.spacing) * Fraction(abs(v)) ** 4 for v in vals.tolist())
    assert math.isclose(lp_norm(field(vals, g), 4), float(exact) ** 0.25, rel_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    c_re=st.floats(-50, 50), c_im=st.floats(-50, 50),
    p=st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.0, math.inf]),
    seed=st.integers(0, 2**32 - 1),
)
def test_lp_norm_homogeneous(c_re, c_im, p, seed):
    r = np.random.default_rng(seed)
    g = build_grid(1.7, 6)
    f = field(r.normal(size=6) + 1j * r.normal(size=6), g)
    c = complex(c_re, c_im)
    assert math.isclose(lp_norm(field(c * f.values, g), p), abs(c) * lp_norm(f, p), rel_tol=1e-12, abs_tol=1e-300)


def _direct_convolution(f, q):
    M, h = f.grid.points, f.grid.spacing
    return np.array([sum(h * f.values[(i - j) % M] * q.values[j] for j in range(M)) for i in range(M)])


def test_convolve_examples(rng):
    g = build_grid(3.0, 6)
    q = field(rng.normal(size=6) + 1j * rng.normal(size=6), g)
    delta = np.zeros(6)
    delta[0] = 1 / g.spacing
    np.testing.assert_allclose(convolve(field(delta, g), q).values, q.values, atol=1e-14)
    S = g.spacing * q.values.sum()
    np.testing.assert_allclose(convolve(field(np.full(6, 2.0), g), q).values, 2.0 * S, atol=1e-13)


def test_convolve_direct_sum_commutative_bilinear(rng):
    g = build_grid(2.5, 12)
    f, q, w = (field(rng.normal(size=12) + 1j * rng.normal(size=12), g) for _ in range(3))
    np.testing.assert_allclose(convolve(f, q).values, _direct_convolution(f, q), atol=1e-12)
    np.testing.assert_allclose(convolve(f, q).values, convolve(q, f).values, atol=1e-12)
    lhs = convolve(field(2 * f.values - 3j * w.values, g), q).values
    np.testing.assert_allclose(lhs, 2 * convolve(f, q).values - 3j * convolve(w, q).values, atol=1e-12)


def test_convolve_grid_mismatch():
    with pytest.raises(InvalidArgumentError):
        convolve(field(np.ones(4), build_grid(1.0, 4)), field(np.ones(4), build_grid(2.0, 4)))


@pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 4.0])
def test_young_inequality(rng, r):
    g = build_grid(2 * np.pi, 16)
    v = field(even_field(g, rng), g)
    phi = rng.normal(size=16) + 1j * rng.normal(size=16)
    dens = field(np.abs(phi) ** 2, g)
    assert lp_norm(convolve(v, dens), 2 * r) <= lp_norm(v, 2 * r) * lp_norm(dens, 1) + 1e-10


def test_sample_interaction_beta_zero():
    g = build_grid(4.0, 8)
    np.testing.assert_allclose(sample_interaction(field(np.ones(8), g), 10, 0.0).values, 0.1)
    v = field(np.array([3.0, 2, 1, 0, 0, 0, 1, 2]), g)
    assert np.array_equal(sample_interaction(v, 1, 0.0).values, v.values)


def test_sample_interaction_box_half_width():
    g = build_grid(8.0, 16)
    x = g.displacements()
    a = 2.0
    box = field(np.where(np.abs(x) <= a, 3.0, 0.0), g)
    out = sample_interaction(box, 4, 0.5)
    expected = np.where(np.abs(x) <= a / 2, 3.0 * 4 ** (-0.5), 0.0)
    np.testing.assert_allclose(out.values, expected)


def test_sample_interaction_rejects_odd():
    g = build_grid(4.0, 8)
    with pytest.raises(InvalidArgumentError):
        sample_interaction(field(np.arange(8.0), g), 2, 0.0)
