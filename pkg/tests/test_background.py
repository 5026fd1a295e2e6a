import numpy as np
import pytest

from unicorn_lab.background import (
    CATALOG,
    axis_at,
    axis_vector,
    landsberg_condition_residual,
    levi_civita,
    make_background,
    metric_at,
    metricity_residual,
)
from unicorn_lab.errors import DomainError


@pytest.fixture(params=CATALOG)
def bg(request):
    return make_background(request.param, 3)


def test_euclidean_identity_and_flat():
    e = make_background("euclidean-const-axis", 3)
    x = [0.5, -1.0, 2.0]
    np.testing.assert_array_equal(metric_at(e, x), np.eye(3))
    np.testing.assert_array_equal(axis_at(e, x), [0, 0, 1])
    lc = levi_civita(e, x)
    assert np.all(lc.christoffel == 0) and np.all(lc.nabla_beta == 0) and lc.div_beta == 0
    assert landsberg_condition_residual(e, x) == 0.0


def test_radial_values():
    r = make_background("radial", 3)
    np.testing.assert_allclose(axis_at(r, [0, 0, 2]), [0, 0, 1])
    p = 2 * np.ones(3) / np.sqrt(3)
    np.testing.assert_allclose(axis_at(r, p), np.ones(3) / np.sqrt(3), atol=1e-15)
    lc = levi_civita(r, [0, 0, 2])
    np.testing.assert_allclose(lc.nabla_beta, 0.5 * np.diag([1, 1, 0]), atol=1e-15)
    assert lc.div_beta == pytest.approx(1.0, abs=1e-14)


def test_radial_excludes_origin():
    r = make_background("radial", 3)
    with pytest.raises(DomainError):
        axis_at(r, [0.0, 0.0, 0.1])
    with pytest.raises(DomainError):
        metric_at(r, [0.0, 0.0, 5.0])


def test_warped_matches_formula():
    w = make_background("warped", 3, warp="cosh", rate=0.7)
    x = [0.4, 0.1, -0.3]
    f = np.cosh(0.7 * 0.4)
    np.testing.assert_allclose(metric_at(w, x), np.diag([1, f * f, f * f]), rtol=1e-12)


def test_catalog_invariants(bg, rng):
    for x in bg.sample_points(30, rng):
        a = metric_at(bg, x)
        b = axis_at(bg, x)
        assert np.all(np.linalg.eigvalsh(a) > 0)
        assert b @ np.linalg.solve(a, b) == pytest.approx(1.0, abs=1e-10)
        lc = levi_civita(bg, x)
        np.testing.assert_array_equal(lc.christoffel, lc.christoffel.transpose(0, 2, 1))
        assert metricity_residual(bg, x) <= 1e-8
        assert lc.div_beta == pytest.approx(np.trace(np.linalg.solve(a, lc.nabla_beta)), abs=1e-12)


def test_metricity_at_100_points(bg, rng):
    assert max(metricity_residual(bg, x) for x in bg.sample_points(100, rng)) <= 1e-8


def test_exterior_derivative_matches_antisymmetric_part(bg, rng):
    # d beta_{ij} = d_i b_j - d_j b_i must equal nabla_i b_j - nabla_j b_i
    for x in bg.sample_points(10, rng):
        lc = levi_civita(bg, x)
        db = lc.axis_derivative - lc.axis_derivative.T
        np.testing.assert_allclose(lc.nabla_beta - lc.nabla_beta.T, db, atol=1e-12)


def test_radial_axis_is_closed(rng):
    r = make_background("radial", 3)
    for x in r.sample_points(10, rng):
        nb = levi_civita(r, x).nabla_beta
        np.testing.assert_allclose(nb, nb.T, atol=1e-14)


@pytest.mark.parametrize("key,params", [("radial", {}), ("warped", {}), ("warped", {"warp": "cosh"}),
                                        ("euclidean-const-axis", {})])
def test_landsberg_condition_holds(key, params, rng):
    bg = make_background(key, 3, **params)
    for x in bg.sample_points(20, rng):
        if key == "radial" and not 1.0 <= np.linalg.norm(x) <= 3.0:
            continue
        assert landsberg_condition_residual(bg, x) <= 1e-8
        lc = levi_civita(bg, x)
        a, b = lc.metric, lc.axis
        # k = nabla beta(v, v) / (a(v, v) - beta(v)^2) is direction independent
        for v in rng.normal(size=(4, 3)):
            k = v @ lc.nabla_beta @ v / (v @ a @ v - (b @ v) ** 2)
            assert k == pytest.approx(lc.div_beta / 2, abs=1e-8)


def test_perturbed_is_negative_control():
    p = make_background("radial-perturbed", 3)
    assert landsberg_condition_residual(p, [0.7, 0.3, -0.4]) > 1e-3


def test_axis_vector_is_unit():
    w = make_background("warped", 3)
    x = [0.2, 0.3, 0.1]
    v = axis_vector(w, x)
    assert v @ metric_at(w, x) @ v == pytest.approx(1.0)


def test_unknown_key():
    with pytest.raises(KeyError):
        make_background("sphere", 3)
