import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unicorn_lab import calculus as cal
from unicorn_lab.background import euclidean_const_axis, make_background, metric_at, radial
from unicorn_lab.errors import DomainError, KindError, PoleError, RangeError
from unicorn_lab.metric import (
    FinslerMetric,
    adapted_frame,
    approach_directions,
    cartan,
    energy,
    energy_gradient_closed,
    finsleroid_Phi,
    frame_to_coordinates,
    hessian,
    hessian_at_pole,
    hessian_closed,
    lift_energy,
    phi,
    regularity_probe,
    sign_property_a,
)

mp.mp.dps = 40

# frozen high-precision values for K = 2
PHI_POLE_K2 = 6.1337074062362276  # exp(pi / sqrt(3))
PHI0_K2 = 1.8305194665556097
DPHI0_K2 = 3.6610389331112193
A0_K2 = 13.403206069756135


def mp_phi(K, s):
    """Profile from the piecewise arctan form of the metric, evaluated with mpmath."""
    K, s = mp.mpf(K), mp.mpf(s)
    g = K / 2
    h = mp.sqrt(1 - g * g / 4)
    G = g / h
    q = mp.sqrt(1 - s * s)
    if s == 0:
        Phi = mp.atan(G / 2)
    else:
        side = mp.pi / 2 if s > 0 else -mp.pi / 2
        Phi = side + mp.atan(G / 2) - mp.atan((q + g * s / 2) / (h * s))
    return (1 + g * s * q) * mp.exp(G * Phi)


def test_frozen_values_are_consistent_with_mpmath():
    assert float(mp.exp(mp.pi / mp.sqrt(3))) == pytest.approx(PHI_POLE_K2, rel=1e-15)
    assert float(mp_phi(2, 0)) == pytest.approx(PHI0_K2, rel=1e-15)
    assert float(mp.diff(lambda t: mp_phi(2, t), 0)) == pytest.approx(DPHI0_K2, rel=1e-14)


def test_phi_values():
    p = phi(0.0, 0.3)
    assert (p.value, p.derivative) == (1.0, 0.0)
    assert phi(2.0, 1.0).value == pytest.approx(PHI_POLE_K2, rel=1e-14)
    assert phi(2.0, 1.0).derivative == 0.0
    p0 = phi(2.0, 0.0)
    assert p0.value == pytest.approx(PHI0_K2, rel=1e-14)
    assert p0.derivative == pytest.approx(DPHI0_K2, rel=1e-14)
    assert p0.derivative == pytest.approx(2.0 * p0.value, rel=1e-14)


@pytest.mark.parametrize("K", [-3.0, -1.0, 0.5, 2.0, 3.5])
def test_phi_against_mpmath(K):
    for s in np.linspace(-0.95, 0.95, 9):
        ref = mp_phi(K, s)
        assert phi(K, s).value == pytest.approx(float(ref), rel=1e-13)
        dref = mp.diff(lambda t: mp_phi(K, t), s)
        assert phi(K, s).derivative == pytest.approx(float(dref), rel=1e-11, abs=1e-14)


def test_phi_derivative_against_fd():
    d = cal.fd_derivative(lambda v: phi(2.0, v[0]).value, [0.0], [1.0], 1)
    assert d == pytest.approx(3.661, abs=1e-3)
    near = cal.fd_derivative(lambda v: phi(2.0, v[0]).value, [1 - 1e-3], [1.0], 1, 1e-5)
    far = cal.fd_derivative(lambda v: phi(2.0, v[0]).value, [1 - 1e-1], [1.0], 1, 1e-5)
    assert 0 < near < far


def test_phi_range_errors():
    with pytest.raises(RangeError):
        phi(4.0, 0.0)
    with pytest.raises(RangeError):
        phi(1.0, 1.5)


def test_sign_property_values():
    assert sign_property_a(2.0, 0.0) == pytest.approx(A0_K2, rel=1e-13)
    assert sign_property_a(2.0, 1.0) == 0.0 and sign_property_a(-3.0, -1.0) == 0.0
    s = np.round(np.arange(-0.9, 0.91, 0.1), 10)
    assert np.all(sign_property_a(-1.0, s) < 0)


@given(st.floats(-3.9, 3.9).filter(lambda k: abs(k) > 1e-3), st.floats(-0.999, 0.999))
def test_sign_property_sign(K, s):
    assert np.sign(sign_property_a(K, s)) == np.sign(K)


@given(st.floats(-3.9, 3.9), st.floats(-1.0, 1.0))
def test_phi_c1_bound(K, s):
    sup = max(phi(K, 1.0).value, phi(K, -1.0).value, phi(K, 0.0).value)
    sup = max(sup, float(np.max(phi(K, np.linspace(-1, 1, 201)).value)))
    assert abs(phi(K, s).derivative) <= 4 * sup * math.sqrt(max(1 - s * s, 0.0)) + 1e-12


def test_Phi_two_ways():
    r = finsleroid_Phi(1.0, 0.0, 1.0)
    G = 1.0 / math.sqrt(1 - 0.25)
    assert r.compact == pytest.approx(math.atan(G / 2), rel=1e-14)
    assert r.piecewise == pytest.approx(r.compact, rel=1e-14)
    for b in (1.0, -1.0):
        r = finsleroid_Phi(1.0, b, 1.0)
        assert r.piecewise == pytest.approx(r.compact, abs=1e-12)
    with pytest.raises(DomainError):
        finsleroid_Phi(1.0, 0.0, 0.0)


# ------------------------------------------------------------------ energy

E3 = euclidean_const_axis(3)
R3 = radial(3)


def random_xy(bg, rng, count):
    for x in bg.sample_points(count, rng):
        yield x, rng.normal(size=bg.dim)


def test_energy_riemannian_degeneration(rng):
    m = FinslerMetric.finsleroid(R3, 0.0)
    for x, y in random_xy(R3, rng, 5):
        assert energy(m, x, y) == pytest.approx(0.5 * y @ metric_at(R3, x) @ y, rel=1e-14)


@given(st.sampled_from([-3.0, -1.0, 0.5, 2.0, 3.5]), st.sampled_from([0.5, 2.0, 7.0]),
       st.integers(0, 10_000))
def test_homogeneity(K, t, seed):
    rng = np.random.default_rng(seed)
    m = FinslerMetric.finsleroid(R3, K)
    x, y = next(random_xy(R3, rng, 1))
    assert energy(m, x, t * y) == pytest.approx(t * t * energy(m, x, y), rel=1e-12)


def test_energy_at_axis():
    m = FinslerMetric.finsleroid(E3, 2.0)
    assert energy(m, [0, 0, 0], [0, 0, 1]) == pytest.approx(0.5 * PHI_POLE_K2, rel=1e-14)
    assert energy(m, [0, 0, 0], [0, 0, -1]) == pytest.approx(0.5 / PHI_POLE_K2, rel=1e-14)


def test_energy_against_mpmath(rng):
    m = FinslerMetric.finsleroid(E3, 1.5)
    for y in rng.normal(size=(5, 3)):
        a = np.linalg.norm(y)
        ref = 0.5 * a * a * mp_phi(1.5, y[2] / a)
        assert energy(m, [0, 0, 0], y) == pytest.approx(float(ref), rel=1e-13)


@pytest.mark.parametrize("K", [-3.0, 1.0, 2.0])
def test_gradient_closed_form(K, rng):
    m = FinslerMetric.finsleroid(R3, K)
    for x, y in random_xy(R3, rng, 10):
        P = adapted_frame(R3, x)
        lj = lift_energy(m, x, np.linalg.solve(P, y), orders=(0, 1), frame=P)
        jet = lj.y_tensor(1)
        closed = energy_gradient_closed(m, x, y)
        np.testing.assert_allclose(closed, jet, rtol=1e-9, atol=1e-12)
        yt = np.linalg.solve(P, y)
        assert yt @ closed == pytest.approx(2 * energy(m, x, y), rel=1e-10)


def test_gradient_at_poles():
    m = FinslerMetric.finsleroid(R3, 2.0)
    x = [0.0, 0.0, 2.0]
    np.testing.assert_allclose(energy_gradient_closed(m, x, [0, 0, 1]), [0, 0, PHI_POLE_K2], rtol=1e-13)
    np.testing.assert_allclose(energy_gradient_closed(m, x, [0, 0, -1]), [0, 0, -1 / PHI_POLE_K2],
                               rtol=1e-13)


def test_gradient_riemannian():
    m = FinslerMetric.finsleroid(E3, 0.0)
    np.testing.assert_allclose(energy_gradient_closed(m, [0, 0, 0], [0.3, 1, 2]), [0.3, 1, 2])


# ----------------------------------------------------------------- hessian


def test_hessian_riemannian_is_a(rng):
    w = make_background("warped", 3)
    m = FinslerMetric.riemannian(w)
    for x, y in random_xy(w, rng, 5):
        np.testing.assert_allclose(hessian(m, x, y).g, metric_at(w, x), rtol=1e-13)
        assert np.all(hessian(m, x, y).C == 0)


def test_randers_euler(rng):
    m = FinslerMetric.randers(R3, 0.5)
    for x, y in random_xy(R3, rng, 10):
        g = hessian(m, x, y).g
        assert y @ g @ y == pytest.approx(2 * energy(m, x, y), rel=1e-10)


@pytest.mark.parametrize("K", [-3.0, -1.0, 0.5, 2.0, 3.5])
def test_hessian_closed_form(K):
    rng = np.random.default_rng(int(10 * K) + 50)
    m = FinslerMetric.finsleroid(R3, K)
    for x, y in random_xy(R3, rng, 100):
        P = adapted_frame(R3, x)
        jet = lift_energy(m, x, np.linalg.solve(P, y), orders=(0, 2), frame=P).y_tensor(2)
        closed = hessian_closed(m, x, y)
        np.testing.assert_allclose(closed, jet, rtol=1e-9, atol=1e-9 * np.abs(jet).max())


def test_hessian_matches_finite_differences():
    m = FinslerMetric.finsleroid(R3, 2.0)
    x = [0.0, 0.0, 2.0]
    y = [1.0, 0.0, 1.0]
    fd = cal.fd_hessian(lambda v: energy(m, x, v), y, 1e-4)
    g = hessian(m, x, y).g
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6 * np.abs(g).max())


def test_hessian_frame_example():
    m = FinslerMetric.finsleroid(E3, 2.0)
    g = hessian(m, [0, 0, 0], [1.0, 0.0, 1.0]).g
    P = adapted_frame(E3, [0, 0, 0])
    closed = frame_to_coordinates(E3, [0, 0, 0], hessian_closed(m, [0, 0, 0], [1.0, 0.0, 1.0]))
    # euclidean frame is orthonormal so the closed form maps back unchanged
    np.testing.assert_allclose(P.T @ P, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(g, closed, rtol=1e-12)


def test_pole_guard():
    m = FinslerMetric.finsleroid(R3, 1.0)
    with pytest.raises(PoleError) as info:
        hessian(m, [0, 0, 2], [1e-8, 0, 1])
    assert info.value.cone == m.pole_cone
    hessian(m, [0, 0, 2], [1e-5, 0, 1])


def test_hessian_at_pole_values():
    assert np.array_equal(hessian_at_pole(FinslerMetric.finsleroid(E3, 0.0), [0, 0, 0], 1), np.eye(3))
    g = hessian_at_pole(FinslerMetric.finsleroid(E3, 2.0), [0, 0, 0], 1)
    np.testing.assert_allclose(g, PHI_POLE_K2 * np.eye(3), rtol=1e-14)
    with pytest.raises(KindError):
        hessian_at_pole(FinslerMetric.randers(E3), [0, 0, 0], 1)


@pytest.mark.parametrize("sign", [1, -1])
def test_pole_continuity_cross_check(sign):
    m = FinslerMetric.finsleroid(E3, 2.0)
    g = hessian(m, [0, 0, 0], [1e-4, 0.0, sign]).g
    np.testing.assert_allclose(g, hessian_at_pole(m, [0, 0, 0], sign), atol=5e-3)


def test_cartan_properties(rng):
    assert np.all(cartan(FinslerMetric.finsleroid(R3, 0.0), [0, 0, 2], [1, 2, 3]) == 0)
    m = FinslerMetric.finsleroid(R3, 1.0)
    worst = 0.0
    for x, y in random_xy(R3, rng, 50):
        C = cartan(m, x, y)
        assert np.array_equal(C, C.transpose(1, 0, 2)) and np.array_equal(C, C.transpose(0, 2, 1))
        worst = max(worst, np.abs(np.einsum("ijk,k->ij", C, y)).max())
    assert worst <= 1e-9


@pytest.mark.parametrize("K", [-3.5, -1.0, 1.0, 3.5])
def test_strong_convexity(K, rng):
    m = FinslerMetric.finsleroid(R3, K)
    for x, y in random_xy(R3, rng, 30):
        assert hessian(m, x, y).min_eigenvalue > 0


# -------------------------------------------------------------- regularity

ANGLES = [1e-2, 1e-3, 1e-4, 1e-5]


@pytest.mark.parametrize("sign", [1, -1])
def test_regularity_order_two(sign):
    m = FinslerMetric.finsleroid(R3, 2.0)
    r = regularity_probe(m, [0.3, 0.4, 2.0], 2, ANGLES, sign)
    assert r.converged
    # errors shrink linearly in the angle: the Hessian is Lipschitz, not better
    ratios = r.abs_errors[:-1] / r.abs_errors[1:]
    np.testing.assert_allclose(ratios, 10.0, rtol=0.05)
    assert r.errors[-1] < 1e-4
    np.testing.assert_allclose(r.errors, r.abs_errors / np.abs(r.limit).max())


def test_regularity_order_one():
    m = FinslerMetric.finsleroid(R3, 2.0)
    r = regularity_probe(m, [0.3, 0.4, 2.0], 1, ANGLES, 1)
    assert r.converged and r.errors[-1] < 1e-4
    np.testing.assert_allclose(r.limit, [0, 0, PHI_POLE_K2], rtol=1e-14)


def test_third_derivatives_bounded_but_discontinuous():
    # measured behaviour: bounded norms along a ray, azimuth-dependent limit
    m = FinslerMetric.finsleroid(R3, 2.0)
    r = regularity_probe(m, [0.3, 0.4, 2.0], 3, ANGLES, 1)
    assert r.growth_ratio < 1.1
    assert r.jump > 1.0


def test_fourth_derivatives_blow_up():
    m = FinslerMetric.finsleroid(R3, 2.0)
    r = regularity_probe(m, [0.3, 0.4, 2.0], 4, [1e-2, 1e-4], 1)
    assert r.growth_ratio > 50


def test_approach_directions_angles():
    d = approach_directions(3, [0.1, 0.01], -1)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)
    np.testing.assert_allclose(np.arccos(-d[:, -1]), [0.1, 0.01], rtol=1e-10)


def test_adapted_frame_orthonormal(rng):
    w = make_background("warped", 4)
    for x in w.sample_points(5, rng):
        P = adapted_frame(w, x)
        a = metric_at(w, x)
        np.testing.assert_allclose(P.T @ a @ P, np.eye(4), atol=1e-13)
