"""Geodesic spray, Landsberg tensor and Berwald curvature.

One jet of the energy of order one in ``x`` and five in ``y`` feeds every
quantity here.  The spray coefficients are then assembled as jets in ``y``
alone, so their first three ``y``-derivatives come out exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import calculus as cal
from .errors import SingularHessian
from .metric import FinslerMetric, _directions, _guard_pole, _point, lift_energy

SPRAY_ORDERS = (1, 5)


@dataclass(frozen=True)
class SprayData:
    """Spray ``G[l]`` and its y-derivatives ``G_i[l, i]``, ``G_ij[l, i, j]``,
    ``G_ijk[l, i, j, k]`` at ``(x, y)``."""

    x: np.ndarray
    y: np.ndarray
    G: np.ndarray
    G_i: np.ndarray
    G_ij: np.ndarray
    G_ijk: np.ndarray


@dataclass(frozen=True)
class LandsbergData:
    """Landsberg tensor ``P[l, i, j]`` and Berwald curvature ``P_mixed[l, i, j, k]``.

    ``identity_residual`` is the Frobenius norm of
    ``P^l_ij + (F/2) g^{lk} l_m P^m_ijk``, which vanishes identically.
    """

    P: np.ndarray
    P_mixed: np.ndarray
    norm_P: float
    norm_mixed: float
    identity_residual: float


@dataclass(frozen=True)
class _Core:
    spray: SprayData
    g: np.ndarray
    ginv: np.ndarray
    dg_dx: np.ndarray  # [i, j, m] = d g_jm / d x^i
    C: np.ndarray
    l: np.ndarray
    F: float


def _core(m: FinslerMetric, x, y) -> _Core:
    x = _point(m, x)
    y = cal.as_vector(_directions(m, y), m.dim)
    _guard_pole(m, x, y, m.spray_cone)
    n = m.dim
    lj = lift_energy(m, x, y, orders=SPRAY_ORDERS, total=SPRAY_ORDERS[1])
    J = lj.jet
    xv = range(n)
    yv = range(n, 2 * n)

    g = lj.y_tensor(2)
    eig = np.linalg.eigvalsh(g)
    if eig[0] < 1e-10:
        raise SingularHessian(f"fundamental tensor has min eigenvalue {eig[0]:.3g}")

    target = cal.algebra(((n, 3),), 3)
    ymap = tuple(yv)
    dy = [J.partial(n + k) for k in range(n)]
    gjet = [[dy[i].partial(n + j).project(target, ymap) for j in range(n)] for i in range(n)]
    mixed = [[dy[i].partial(k).project(target, ymap) for k in xv] for i in range(n)]
    Ex = [J.partial(k).project(target, ymap) for k in xv]
    ys = [target.variable(k, y[k]) for k in range(n)]
    rhs = [sum(ys[k] * mixed[i][k] for k in range(n)) - Ex[i] for i in range(n)]
    Gjet = [0.5 * c for c in cal.solve_jets(gjet, rhs)]

    tv = tuple(range(n))
    spray = SprayData(
        x=x,
        y=y,
        G=np.array([c.value for c in Gjet]),
        G_i=np.stack([c.derivative_tensor(tv, 1) for c in Gjet]),
        G_ij=np.stack([c.derivative_tensor(tv, 2) for c in Gjet]),
        G_ijk=np.stack([c.derivative_tensor(tv, 3) for c in Gjet]),
    )
    E = float(lj.value)
    F = np.sqrt(2.0 * E)
    dg = lj.xy_tensor(2)
    return _Core(
        spray=spray,
        g=g,
        ginv=np.linalg.inv(g),
        dg_dx=dg,
        C=0.5 * lj.y_tensor(3),
        l=lj.y_tensor(1) / F,
        F=F,
    )


def spray(m: FinslerMetric, x, y) -> SprayData:
    """Spray coefficients ``G^l = 1/2 g^{lm} (y^k E_{y^m x^k} - E_{x^m})``."""
    return _core(m, x, y).spray


def landsberg_from_core(core: _Core) -> LandsbergData:
    s = core.spray
    g, ginv, C = core.g, core.ginv, core.C
    inner = (
        core.dg_dx
        - 2.0 * np.einsum("ki,jkm->ijm", s.G_i, C)
        - np.einsum("kij,km->ijm", s.G_ij, g)
        - np.einsum("kim,jk->ijm", s.G_ij, g)
    )
    P = 0.5 * np.einsum("lm,ijm->lij", ginv, inner)
    mixed = -s.G_ijk
    resid = P + 0.5 * core.F * np.einsum("lk,m,mijk->lij", ginv, core.l, mixed)
    return LandsbergData(
        P=P,
        P_mixed=mixed,
        norm_P=float(np.linalg.norm(P)),
        norm_mixed=float(np.linalg.norm(mixed)),
        identity_residual=float(np.linalg.norm(resid)),
    )


def landsberg_tensor(m: FinslerMetric, x, y) -> LandsbergData:
    """Landsberg tensor from its defining formula, plus the mixed curvature."""
    return landsberg_from_core(_core(m, x, y))


def berwald_residual(m: FinslerMetric, x, directions) -> float:
    """Largest Frobenius distance between ``G_ij`` at two sample directions.

    Zero exactly when the spray is quadratic at ``x``.
    """
    tensors = [spray(m, x, y).G_ij for y in directions]
    worst = 0.0
    for A, B in itertools.combinations(tensors, 2):
        worst = max(worst, float(np.linalg.norm(A - B)))
    return worst


def max_mixed_curvature(m: FinslerMetric, x, directions) -> float:
    return max(float(np.linalg.norm(spray(m, x, y).G_ijk)) for y in directions)
