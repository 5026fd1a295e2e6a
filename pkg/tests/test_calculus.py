import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unicorn_lab import calculus as cal
from unicorn_lab.errors import DomainError

finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def poly(xs, ys):
    return ys[0] * ys[0]


def test_polynomial_second_derivative_table():
    lj = cal.jet_lift(poly, ([0.0, 0.0], [0.7, -1.2]), orders=(0, 2))
    np.testing.assert_array_equal(lj.y_tensor(2), [[2.0, 0.0], [0.0, 0.0]])


def test_quadratic_form_hessian_is_matrix():
    A = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 3.0]])

    def f(xs, ys):
        return 0.5 * sum(A[i, j] * ys[i] * ys[j] for i in range(3) for j in range(3))

    lj = cal.jet_lift(f, ([0.0] * 3, [0.1, 0.2, 0.3]), orders=(1, 3))
    np.testing.assert_allclose(lj.y_tensor(2), A, atol=1e-15)
    assert np.all(lj.y_tensor(3) == 0.0)


def test_transcendental_against_mpmath():
    # f(y) = exp(y0) * atan(y1 / y0) * sqrt(y0^2 + y1^2)
    def f(xs, ys):
        return cal.exp(ys[0]) * cal.arctan(ys[1] / ys[0]) * cal.sqrt(ys[0] * ys[0] + ys[1] * ys[1])

    y = (0.8, -0.4)
    lj = cal.jet_lift(f, ([0.0, 0.0], list(y)), orders=(0, 3))
    mp.mp.dps = 40
    g = lambda a, b: mp.exp(a) * mp.atan(b / a) * mp.sqrt(a * a + b * b)  # noqa: E731
    for (i, j, k) in [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)]:
        na = [i, j, k].count(0)
        ref = mp.diff(g, (mp.mpf(y[0]), mp.mpf(y[1])), (na, 3 - na))
        assert lj.y_tensor(3)[i, j, k] == pytest.approx(float(ref), rel=1e-12, abs=1e-13)


def test_mixed_partial_symmetry_is_exact():
    def f(xs, ys):
        return cal.exp(xs[0] * ys[1]) * cal.sqrt(1.0 + ys[0] * ys[0] + xs[1] * ys[1] * ys[2])

    lj = cal.jet_lift(f, ([0.3, -0.2, 0.1], [0.5, 0.4, -0.7]), orders=(1, 3))
    T = lj.y_tensor(3)
    assert np.array_equal(T, T.transpose(1, 0, 2))
    assert np.array_equal(T, T.transpose(0, 2, 1))
    assert np.array_equal(T, T.transpose(2, 1, 0))
    M = lj.xy_tensor(2)
    assert np.array_equal(M, M.transpose(0, 2, 1))


@given(finite, finite, finite)
def test_jets_agree_with_finite_differences(a, b, c):
    x = [0.2, -0.1]
    y = [1.0 + 0.2 * a, 0.5 * b]

    def f(xs, ys):
        r = ys[0] * ys[0] + (1.0 + xs[0] * xs[0]) * ys[1] * ys[1]
        return cal.sqrt(r) * cal.exp(0.3 * c * cal.arctan(ys[1] / ys[0]) + xs[1])

    lj = cal.jet_lift(f, (x, y), orders=(0, 2))
    H = cal.fd_hessian(lambda v: float(f(x, list(v))), y)
    np.testing.assert_allclose(lj.y_tensor(2), H, rtol=1e-5, atol=1e-6)
    d = np.array([0.6, -0.8])
    g = cal.fd_derivative(lambda v: float(f(x, list(v))), y, d, 1)
    assert lj.y_tensor(1) @ d == pytest.approx(g, rel=1e-5, abs=1e-8)


@given(finite, finite)
def test_linearity(a, b):
    at = ([0.1, 0.2], [0.9, -0.3])

    def f(xs, ys):
        return cal.exp(ys[0] * xs[0]) + ys[1] * ys[1] * ys[0]

    def g(xs, ys):
        return cal.sin(ys[1]) * cal.sqrt(ys[0])

    def h(xs, ys):
        return a * f(xs, ys) + b * g(xs, ys)

    F, G, H = (cal.jet_lift(k, at, orders=(1, 3)).jet.coeffs for k in (f, g, h))
    np.testing.assert_allclose(H, a * F + b * G, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_fd_cubic():
    assert cal.fd_derivative(lambda s: s[0] ** 3, [1.0], [1.0], 1, 1e-5) == pytest.approx(3.0, abs=1e-9)
    assert cal.fd_derivative(lambda s: s[0] ** 3, [1.0], [1.0], 2) == pytest.approx(6.0, abs=1e-5)
    assert cal.fd_derivative(lambda s: s[0] ** 3, [1.0], [1.0], 3) == pytest.approx(6.0, abs=1e-6)
    assert cal.FD_DEFAULT_STEPS == {1: 1e-5, 2: 1e-4, 3: 5e-3}


def test_batched_jets_match_single():
    Y = np.array([[1.0, 0.5, -0.3], [0.2, 0.9, 0.4]])

    def f(xs, ys):
        return cal.exp(ys[0] * ys[1]) / (1.0 + ys[1] * ys[1])

    batch = cal.jet_lift(f, ([0.0, 0.0], Y), orders=(0, 2)).y_tensor(2)
    for k in range(3):
        one = cal.jet_lift(f, ([0.0, 0.0], Y[:, k]), orders=(0, 2)).y_tensor(2)
        np.testing.assert_allclose(batch[..., k], one, rtol=1e-14)


def test_sqrt_singular_branch_raises():
    def f(xs, ys):
        return cal.sqrt(ys[0] * ys[0] - ys[1] * ys[1])

    with pytest.raises(DomainError):
        cal.jet_lift(f, ([0.0, 0.0], [1.0, 1.0]), orders=(0, 3))


def test_solve_jets_matches_numpy():
    alg = cal.algebra(((2, 3),), 3)
    t = [alg.variable(0, 0.3), alg.variable(1, -0.2)]
    M = [[2.0 + t[0], t[1]], [0.5 * t[0] * t[1], 1.0 + t[1] * t[1]]]
    r = [cal.exp(t[0]), t[1]]
    sol = cal.solve_jets(M, r)
    Mv = np.array([[c.value if isinstance(c, cal.Jet) else c for c in row] for row in M])
    np.testing.assert_allclose([s.value for s in sol], np.linalg.solve(Mv, [math.exp(0.3), -0.2]))
    # derivative along t0 by differencing the solve
    h = 1e-6

    def at(u):
        Mu = np.array([[2.0 + u, -0.2], [0.5 * u * -0.2, 1.04]])
        return np.linalg.solve(Mu, [math.exp(u), -0.2])

    fd = (at(0.3 + h) - at(0.3 - h)) / (2 * h)
    np.testing.assert_allclose([s.derivative((1, 0)) for s in sol], fd, rtol=1e-8)
