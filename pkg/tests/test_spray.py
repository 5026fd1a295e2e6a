import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unicorn_lab import calculus as cal
from unicorn_lab.background import make_background
from unicorn_lab.errors import PoleError
from unicorn_lab.metric import FinslerMetric, pole_angle
from unicorn_lab.spray import berwald_residual, landsberg_tensor, max_mixed_curvature, spray

RADIAL = make_background("radial", 3)
EUCLID = make_background("euclidean-const-axis", 3)


def metrics():
    return [
        FinslerMetric.finsleroid(RADIAL, 1.0),
        FinslerMetric.finsleroid(EUCLID, 2.0),
        FinslerMetric.finsleroid(make_background("radial-perturbed", 3), -1.5),
        FinslerMetric.finsleroid(make_background("warped", 3), 2.5),
        FinslerMetric.randers(RADIAL, 0.4),
        FinslerMetric.riemannian(make_background("warped", 3, warp="cosh")),
    ]


def off_axis(m, x, rng, count=3):
    out = []
    while len(out) < count:
        y = rng.normal(size=m.dim)
        if m.kind != "finsleroid" or pole_angle(m, x, y) > 0.1:
            out.append(y)
    return out


def test_flat_riemannian_spray_vanishes():
    m = FinslerMetric.finsleroid(EUCLID, 0.0)
    s = spray(m, [0.1, 0.2, 0.3], [1.0, -2.0, 0.5])
    for arr in (s.G, s.G_i, s.G_ij, s.G_ijk):
        assert np.all(arr == 0)
    L = landsberg_tensor(m, [0.1, 0.2, 0.3], [1.0, -2.0, 0.5])
    assert L.norm_P == 0 and L.identity_residual == 0


def test_riemannian_spray_is_christoffel(rng):
    from unicorn_lab.background import levi_civita

    w = make_background("warped", 3)
    m = FinslerMetric.riemannian(w)
    for x in w.sample_points(5, rng):
        y = rng.normal(size=3)
        G = levi_civita(w, x).christoffel
        np.testing.assert_allclose(spray(m, x, y).G_ij, G, atol=1e-13)
        np.testing.assert_allclose(spray(m, x, y).G, 0.5 * np.einsum("lij,i,j->l", G, y, y), atol=1e-13)


@pytest.mark.parametrize("m", metrics(), ids=lambda m: f"{m.kind}-{m.background.key}")
def test_homogeneity_degrees(m, rng):
    for x in m.background.sample_points(3, rng):
        for y in off_axis(m, x, rng, 2):
            a, b = spray(m, x, y), spray(m, x, 2 * y)
            np.testing.assert_allclose(b.G, 4 * a.G, rtol=1e-10, atol=1e-13)
            np.testing.assert_allclose(b.G_i, 2 * a.G_i, rtol=1e-10, atol=1e-13)
            np.testing.assert_allclose(b.G_ij, a.G_ij, rtol=1e-10, atol=1e-13)
            np.testing.assert_allclose(b.G_ijk, 0.5 * a.G_ijk, rtol=1e-9, atol=1e-13)


@pytest.mark.parametrize("m", metrics(), ids=lambda m: f"{m.kind}-{m.background.key}")
def test_identity_and_symmetry(m, rng):
    worst = 0.0
    for x in m.background.sample_points(4, rng):
        for y in off_axis(m, x, rng):
            L = landsberg_tensor(m, x, y)
            worst = max(worst, L.identity_residual / (1 + L.norm_mixed))
            np.testing.assert_allclose(L.P, L.P.transpose(0, 2, 1), atol=1e-12)
            assert np.array_equal(L.P_mixed, L.P_mixed.transpose(0, 2, 1, 3))
    assert worst <= 1e-7


def test_derivatives_match_finite_differences(rng):
    m = FinslerMetric.finsleroid(RADIAL, 1.0)
    x = np.array([0.3, 0.4, 2.0])
    y = np.array([1.0, -0.4, 0.6])
    s = spray(m, x, y)
    for l in range(3):
        fd = [cal.fd_derivative(lambda v: spray(m, x, v).G[l], y, e, 1) for e in np.eye(3)]
        np.testing.assert_allclose(s.G_i[l], fd, rtol=1e-5, atol=1e-9)
    fd2 = (spray(m, x, y + 1e-5 * np.eye(3)[0]).G_ij - spray(m, x, y - 1e-5 * np.eye(3)[0]).G_ij) / 2e-5
    np.testing.assert_allclose(s.G_ijk[..., 0], fd2, rtol=1e-5, atol=1e-8)


def test_radial_unicorn_is_landsberg_not_berwald(rng):
    m = FinslerMetric.finsleroid(RADIAL, 1.0)
    x = np.array([0.5, -0.3, 1.8])
    for y in off_axis(m, x, rng, 5):
        assert landsberg_tensor(m, x, y).norm_P <= 1e-7
    assert berwald_residual(m, x, off_axis(m, x, rng, 4)) > 1e-2
    assert max_mixed_curvature(m, x, off_axis(m, x, rng, 2)) > 1e-2


def test_perturbed_is_not_landsberg(rng):
    p = make_background("radial-perturbed", 3)
    m = FinslerMetric.finsleroid(p, 1.0)
    for x in p.sample_points(3, rng):
        assert max(landsberg_tensor(m, x, y).norm_P for y in off_axis(m, x, rng)) > 1e-3


def test_berwald_controls(rng):
    r0 = FinslerMetric.finsleroid(RADIAL, 0.0)
    x = [0.3, 0.4, 2.0]
    assert berwald_residual(r0, x, off_axis(r0, x, rng, 3)) <= 1e-9
    e1 = FinslerMetric.finsleroid(EUCLID, 1.0)
    assert berwald_residual(e1, [0.1, 0.1, 0.1], off_axis(e1, [0.1, 0.1, 0.1], rng, 3)) <= 1e-8


def test_spray_pole_cone():
    m = FinslerMetric.finsleroid(RADIAL, 1.0)
    with pytest.raises(PoleError):
        spray(m, [0, 0, 2], [1e-3, 0, 1])


@given(st.integers(0, 2**32 - 1))
def test_identity_property(seed):
    rng = np.random.default_rng(seed)
    m = FinslerMetric.finsleroid(RADIAL, 1.0)
    x = RADIAL.sample_points(1, rng)[0]
    y = off_axis(m, x, rng, 1)[0]
    L = landsberg_tensor(m, x, y)
    assert L.identity_residual <= 1e-7 * (1 + L.norm_mixed)
