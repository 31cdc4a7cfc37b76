import numpy as np
import pytest

from cartan_frames.errors import NonUniformGrid
from cartan_frames.stencils import derivative, fd_weights, grid_step


def test_three_point_weights():
    np.testing.assert_allclose(fd_weights((-1, 0, 1), 1), [-0.5, 0.0, 0.5], atol=1e-14)
    np.testing.assert_allclose(fd_weights((-1, 0, 1), 2), [1.0, -2.0, 1.0], atol=1e-14)


def test_five_point_first_derivative_weights():
    w = fd_weights((-2, -1, 0, 1, 2), 1)
    np.testing.assert_allclose(w, np.array([1, -8, 0, 8, -1]) / 12, atol=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_exact_on_low_degree_polynomials(order):
    x = np.linspace(-1, 1, 41)
    h = x[1] - x[0]
    f = 1 + 2 * x - x**2 + 0.5 * x**3
    exact = {1: 2 - 2 * x + 1.5 * x**2, 2: -2 + 3 * x, 3: 3 + 0 * x}[order]
    d, boundary = derivative(f, h, order=order)
    np.testing.assert_allclose(d[~boundary], exact[~boundary], atol=1e-8)
    assert boundary[0] and boundary[-1]
    assert not boundary[len(x) // 2]


@pytest.mark.parametrize("order", [1, 2, 3])
def test_one_sided_ends_exact_to_degree_order_plus_one(order):
    x = np.linspace(0, 1, 21)
    p = np.polynomial.Polynomial(np.arange(1.0, order + 3))
    d, boundary = derivative(p(x), x[1] - x[0], order=order)
    np.testing.assert_allclose(d[boundary], p.deriv(order)(x)[boundary], atol=1e-7)


def test_periodic_has_no_boundary_and_fourth_order():
    errs = []
    for n in (32, 64):
        x = np.arange(n) * (2 * np.pi / n)
        d, boundary = derivative(np.sin(3 * x), x[1], periodic=True)
        assert not boundary.any()
        errs.append(np.max(np.abs(d - 3 * np.cos(3 * x))))
    assert np.log2(errs[0] / errs[1]) > 3.8


def test_derivative_along_axis():
    x = np.linspace(0, 1, 30)
    y = np.linspace(0, 2, 20)
    X, Y = np.meshgrid(x, y, indexing="ij")
    d, _ = derivative(X**2 * Y, x[1] - x[0], order=1, axis=0)
    np.testing.assert_allclose(d, 2 * X * Y, atol=1e-10)


def test_grid_step():
    assert grid_step(np.linspace(0, 1, 11)) == pytest.approx(0.1)
    with pytest.raises(NonUniformGrid):
        grid_step(np.array([0.0, 0.1, 0.3, 0.4]))
