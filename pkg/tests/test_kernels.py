import numpy as np
import pytest

from starlab import _kernels_py as py
from starlab import kernels
from starlab.numerics import sphere_quadrature

try:
    from starlab import _kernels as cy
except ImportError:  # pragma: no cover - extension not built
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled extension not built")
PS = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0]


def _data(seed, T=7, N=5, m=3, n=2):
    g = np.random.default_rng(seed)
    return g.uniform(-1, 1, (T, N, m, n))


def _grid(n=2):
    gr = sphere_quadrature(n, 32 if n == 2 else 8)
    return gr.nodes, gr.weights


def _check(a, b, rtol=1e-12):
    np.testing.assert_allclose(a[0], b[0], rtol=rtol)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-14)
    np.testing.assert_array_equal(a[2], b[2])


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("p", PS)
def test_reference_segment_matches_direct(p):
    X = _data(0)[:, :, 0, :]
    U, w = _grid()
    s, fw, ninf = py.segment_sums(X, U, w, p, 2.0)
    H = np.abs(np.einsum("tkd,gd->tkg", X, U))
    rho = np.exp(-np.mean(np.log(H), axis=1)) if p == 0 else np.mean(H**p, axis=1) ** (-1 / p)
    np.testing.assert_allclose(s, rho**2 @ w, rtol=1e-12)
    np.testing.assert_allclose(fw, 1.0)
    assert np.all(ninf == 0)


def test_reference_power_mean_matches_segment():
    X = _data(1)[:, :, 0, :]
    U, w = _grid()
    H = np.abs(np.einsum("tkd,gd->tkg", X, U))
    _check(py.power_mean_sums(H, w, 0.5, 2.0), py.segment_sums(X, U, w, 0.5, 2.0))


def test_ellipsoid_equals_power_mean():
    X = _data(2)[:, :, 0, :]
    U, w = _grid()
    a = 0.3
    H = np.sqrt(np.einsum("tkd,gd->tkg", X, U) ** 2 + a * a)
    _check(py.ellipsoid_sums(X, U, w, a, 1.0, 2.0), py.power_mean_sums(H, w, -1.0, 2.0))


def test_infinite_nodes_counted():
    # a zero column gives h = 0 at every node, hence rho = inf for p <= 0
    U, w = _grid()
    X = np.zeros((2, 2, 2))
    X[:, 1] = [0.3, 0.4]
    s, fw, ninf = py.segment_sums(X, U, w, -0.5, 2.0)
    np.testing.assert_array_equal(ninf, len(w))
    np.testing.assert_allclose(fw, 0.0)
    np.testing.assert_allclose(s, 0.0)
    s, fw, ninf = py.segment_sums(X, U, w, 0.5, 2.0)
    np.testing.assert_array_equal(ninf, 0)
    assert np.all(np.isfinite(s))


@needs_cy
@pytest.mark.parametrize("p", PS)
def test_segment_backends_agree(p):
    X = _data(3)[:, :, 0, :]
    U, w = _grid()
    _check(cy.segment_sums(X, U, w, p, 2.0), py.segment_sums(X, U, w, p, 2.0), rtol=1e-10)


@needs_cy
@pytest.mark.parametrize("p", PS)
def test_ball_backends_agree(p):
    X = _data(4, m=3, n=2)
    U, w = _grid()
    _check(cy.ball_block_sums(X, U, w, p, 2.0), py.ball_block_sums(X, U, w, p, 2.0))


@needs_cy
@pytest.mark.parametrize("p", PS)
def test_cm_alpha_backends_agree(p):
    X = _data(5, m=4, n=2)
    U, w = _grid()
    _check(cy.cm_alpha_block_sums(X, U, w, 0.2, p, 2.0), py.cm_alpha_block_sums(X, U, w, 0.2, p, 2.0))


@needs_cy
@pytest.mark.parametrize("q", [0.5, 1.0])
def test_ellipsoid_backends_agree(q):
    X = _data(6)[:, :, 0, :]
    U, w = _grid()
    _check(cy.ellipsoid_sums(X, U, w, 0.2, q, 2.0), py.ellipsoid_sums(X, U, w, 0.2, q, 2.0))


@needs_cy
@pytest.mark.parametrize("p", PS)
def test_power_mean_backends_agree(p):
    g = np.random.default_rng(7)
    H = g.uniform(0.01, 2.0, (6, 4, 20))
    w = np.full(20, 1 / 20)
    _check(cy.power_mean_sums(H, w, p, 3.0), py.power_mean_sums(H, w, p, 3.0))


@needs_cy
def test_backends_agree_on_infinities():
    U, w = _grid()
    X = np.zeros((2, 2, 2))
    X[:, 1] = [0.3, 0.4]
    _check(cy.segment_sums(X, U, w, -0.5, 2.0), py.segment_sums(X, U, w, -0.5, 2.0), rtol=1e-10)


@needs_cy
def test_three_dimensional_backends_agree():
    X = _data(8, m=4, n=3)
    U, w = _grid(3)
    _check(cy.ball_block_sums(X, U, w, -1.0, 3.0), py.ball_block_sums(X, U, w, -1.0, 3.0))
