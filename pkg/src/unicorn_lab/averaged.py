"""Indicatrix quadrature, the averaged Riemannian metric, indicatrix curvature.

Quadrature nodes are images of unit-sphere directions (taken in the adapted
frame, so the poles of the sphere are the axis directions) under the radial
map ``u -> u / F(u)``.  The induced volume of the indicatrix pulls back to
``sqrt(det g) |det P| F(u)^(-n) dsigma(u)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import calculus as cal
from .connection import LinearConnection
from .errors import ConvexityError, KindError
from .metric import FinslerMetric, _point, adapted_frame, energy_expr, finsler_norm, hessian_batch


def sphere_area(n: int) -> float:
    """Area of the unit sphere in ``R^n``."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _resolution(n, resolution):
    if n == 3:
        if np.ndim(resolution) == 0:
            return (int(resolution), 2 * int(resolution))
        return tuple(int(r) for r in resolution)
    return int(resolution)


def sphere_rule(n: int, resolution, rng: np.random.Generator | None = None):
    """Directions ``(n, N)`` on the unit sphere, with weights and a Monte Carlo flag.

    ``n = 2``: midpoint trapezoid in the angle from the last axis.
    ``n = 3``: Gauss-Legendre in the polar angle times trapezoid in azimuth.
    ``n >= 4``: uniform random directions.
    """
    res = _resolution(n, resolution)
    if n == 2:
        psi = 2.0 * math.pi * (np.arange(res) + 0.5) / res
        U = np.vstack([np.sin(psi), np.cos(psi)])
        return U, np.full(res, 2.0 * math.pi / res), False
    if n == 3:
        npol, naz = res
        t, w = np.polynomial.legendre.leggauss(npol)
        theta = 0.5 * math.pi * (t + 1.0)
        wt = 0.5 * math.pi * w * np.sin(theta)
        psi = 2.0 * math.pi * (np.arange(naz) + 0.5) / naz
        TH, PS = np.meshgrid(theta, psi, indexing="ij")
        U = np.vstack([
            (np.sin(TH) * np.cos(PS)).ravel(),
            (np.sin(TH) * np.sin(PS)).ravel(),
            np.cos(TH).ravel(),
        ])
        W = np.outer(wt, np.full(naz, 2.0 * math.pi / naz)).ravel()
        return U, W, False
    rng = np.random.default_rng(0) if rng is None else rng
    U = rng.normal(size=(n, res))
    U /= np.linalg.norm(U, axis=0)
    return U, np.full(res, sphere_area(n) / res), True


@dataclass(frozen=True)
class IndicatrixQuadrature:
    x: np.ndarray
    nodes: np.ndarray          # (N, n), coordinates of points with F = 1
    weights: np.ndarray        # (N,), induced volume weights
    hessians: np.ndarray       # (N, n, n), fundamental tensor at the nodes
    total: float
    standard_error: float | None = None


def indicatrix_nodes(m: FinslerMetric, x, resolution, rng=None) -> IndicatrixQuadrature:
    x = _point(m, x)
    n = m.dim
    P = adapted_frame(m.background, x)
    U, w, mc = sphere_rule(n, resolution, rng)
    Y0 = P @ U
    r = 1.0 / finsler_norm(m, x, Y0)
    Y = Y0 * r
    g = hessian_batch(m, x, Y)
    eig = np.linalg.eigvalsh(g)[:, 0]
    if np.any(eig <= 0.0) or not np.all(np.isfinite(eig)):
        raise ConvexityError(f"fundamental tensor not positive definite (min eigenvalue {eig.min():.3g})")
    W = w * np.sqrt(np.linalg.det(g)) * abs(np.linalg.det(P)) * r**n
    se = None
    if mc:
        vals = W * len(W)
        se = float(np.std(vals, ddof=1) / math.sqrt(len(W)))
    return IndicatrixQuadrature(x, Y.T, W, g, float(W.sum()), se)


@dataclass(frozen=True)
class AveragedMetric:
    gamma: np.ndarray
    resolution: object
    error_estimate: float | None
    total_measure: float


def _gamma(q: IndicatrixQuadrature) -> np.ndarray:
    G = np.einsum("b,bij->ij", q.weights, q.hessians)
    return 0.5 * (G + G.T)


def _doubled(n, resolution):
    res = _resolution(n, resolution)
    return tuple(2 * r for r in res) if isinstance(res, tuple) else 2 * res


def averaged_metric(m: FinslerMetric, x, resolution, estimate_error: bool = True,
                    rng=None) -> AveragedMetric:
    """``gamma_ij = integral of g_ij over the indicatrix`` (unnormalised)."""
    q = indicatrix_nodes(m, x, resolution, rng)
    gamma = _gamma(q)
    err = None
    if estimate_error:
        fine = _gamma(indicatrix_nodes(m, x, _doubled(m.dim, resolution), rng))
        err = float(np.max(np.abs(fine - gamma)))
        if q.standard_error is not None:
            err = max(err, q.standard_error)
    if np.linalg.eigvalsh(gamma)[0] <= 0.0:
        raise ConvexityError("averaged metric is not positive definite")
    return AveragedMetric(gamma, resolution, err, q.total)


def convergence_order(m: FinslerMetric, x, base_resolution, levels: int = 3,
                      quantity: str = "measure") -> float:
    """Observed order of the quadrature under repeated resolution doubling.

    Returns ``inf`` when successive differences already sit at rounding level.
    """
    res = base_resolution
    vals = []
    for _ in range(levels):
        q = indicatrix_nodes(m, x, res)
        vals.append(q.total if quantity == "measure" else _gamma(q))
        res = _doubled(m.dim, res)
    diffs = [float(np.max(np.abs(np.asarray(b) - np.asarray(a)))) for a, b in zip(vals, vals[1:])]
    floor = 1e-13 * float(np.max(np.abs(vals[-1])))
    if diffs[-1] <= floor:
        return math.inf
    return math.log2(diffs[-2] / diffs[-1])


def gamma_field(m: FinslerMetric, resolution):
    def gamma(x):
        return averaged_metric(m, x, resolution, estimate_error=False).gamma

    return gamma


def gamma_samples(m: FinslerMetric, xs, resolution, step: float = 1e-3) -> list:
    """``(x, gamma, dgamma[k, i, j])`` on a grid, with central differences in ``x``."""
    gamma = gamma_field(m, resolution)
    n = m.dim
    out = []
    for x in np.atleast_2d(np.asarray(xs, dtype=float)):
        dg = np.empty((n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            dg[k] = (gamma(x + e) - gamma(x - e)) / (2 * step)
        out.append((x, gamma(x), dg))
    return out


def gamma_metricity_residual(conn: LinearConnection, m: FinslerMetric, xs, resolution,
                             step: float = 1e-3, samples: list | None = None) -> float:
    """Max over the grid of ``|d_k gamma_ij - Gamma^l_ki gamma_lj - Gamma^l_kj gamma_il|``.

    The base derivative of ``gamma`` is a central difference with ``step``.
    Precomputed ``samples`` from :func:`gamma_samples` may be passed to
    compare several connections on the same grid.
    """
    if samples is None:
        samples = gamma_samples(m, xs, resolution, step)
    worst = 0.0
    for x, g0, dg in samples:
        G = conn(x)
        res = dg - np.einsum("lki,lj->kij", G, g0) - np.einsum("lkj,il->kij", G, g0)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


# -------------------------------------------------------------- curvature


@dataclass(frozen=True)
class CurvatureStats:
    mean: float
    max_deviation: float
    values: np.ndarray
    candidates: dict
    closest: str


def curvature_candidates(K: float) -> dict:
    return {"1-K^2/16": 1.0 - K * K / 16.0, "1-K^2/4": 1.0 - K * K / 4.0}


def _brioschi(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Euv_terms):
    Evv, Fuv, Guu = Euv_terms
    M1 = np.array([
        [-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
        [Fv - 0.5 * Gu, E, F],
        [0.5 * Gv, F, G],
    ])
    M2 = np.array([
        [np.zeros_like(E), 0.5 * Ev, 0.5 * Gu],
        [0.5 * Ev, E, F],
        [0.5 * Gu, F, G],
    ])
    d1 = np.linalg.det(np.moveaxis(M1, (0, 1), (-2, -1)))
    d2 = np.linalg.det(np.moveaxis(M2, (0, 1), (-2, -1)))
    return (d1 - d2) / (E * G - F * F) ** 2


def _chart_samples(count, rng, theta_range=(0.35, math.pi - 0.35)):
    theta = rng.uniform(*theta_range, size=count)
    psi = rng.uniform(0.0, 2.0 * math.pi, size=count)
    return theta, psi


def _first_forms_jet(m, x, P, theta, psi):
    """Jets in the chart of E, F, G of the induced metric, batched over samples."""
    n = m.dim
    alg = cal.algebra(((n, 2), (2, 3)), 5)
    zeros = np.zeros_like(theta)
    eta = [alg.variable(i, zeros) for i in range(n)]
    th = alg.variable(n, theta)
    ps = alg.variable(n + 1, psi)
    u = [cal.sin(th) * cal.cos(ps), cal.sin(th) * cal.sin(ps), cal.cos(th)]
    y0 = [sum(P[i][j] * u[j] for j in range(n)) for i in range(n)]
    F0 = cal.sqrt(2.0 * energy_expr(m, list(x), y0))
    Y = [c / F0 for c in y0]
    Efull = energy_expr(m, list(x), [Y[i] + eta[i] for i in range(n)])
    chart = cal.algebra(((2, 3),), 3)
    cmap = (n, n + 1)
    g = [[Efull.partial(i).partial(j).project(chart, cmap) for j in range(n)] for i in range(n)]
    Yc = [c.project(chart, cmap) for c in Y]
    Yu = [c.partial(0) for c in Yc]
    Yv = [c.partial(1) for c in Yc]

    def form(A, B):
        return sum(g[i][j] * A[i] * B[j] for i in range(n) for j in range(n))

    return form(Yu, Yu), form(Yu, Yv), form(Yv, Yv)


def _curvature_jet(m, x, P, theta, psi):
    E, F, G = _first_forms_jet(m, x, P, theta, psi)
    d = lambda J, a, b: J.derivative((a, b))  # noqa: E731
    return _brioschi(
        d(E, 0, 0), d(F, 0, 0), d(G, 0, 0),
        d(E, 1, 0), d(E, 0, 1), d(F, 1, 0), d(F, 0, 1), d(G, 1, 0), d(G, 0, 1),
        (d(E, 0, 2), d(F, 1, 1), d(G, 2, 0)),
    )


def _first_forms_float(m, x, P, theta, psi):
    """E, F, G at chart points from exact chart tangents and Hessians."""
    n = m.dim
    u = np.vstack([np.sin(theta) * np.cos(psi), np.sin(theta) * np.sin(psi), np.cos(theta)])
    ut = np.vstack([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), -np.sin(theta)])
    up = np.vstack([-np.sin(theta) * np.sin(psi), np.sin(theta) * np.cos(psi), np.zeros_like(theta)])
    y0, y0t, y0p = P @ u, P @ ut, P @ up
    from .metric import lift_energy

    lj = lift_energy(m, x, y0, orders=(0, 2))
    Fv = np.sqrt(2.0 * lj.value)
    dF = lj.y_tensor(1) / Fv
    Y = y0 / Fv
    Yt = y0t / Fv - y0 * np.sum(dF * y0t, axis=0) / Fv**2
    Yp = y0p / Fv - y0 * np.sum(dF * y0p, axis=0) / Fv**2
    g = hessian_batch(m, x, Y)
    E = np.einsum("bij,ib,jb->b", g, Yt, Yt)
    F = np.einsum("bij,ib,jb->b", g, Yt, Yp)
    G = np.einsum("bij,ib,jb->b", g, Yp, Yp)
    return E, F, G


def _curvature_fd(m, x, P, theta, psi, step):
    h = step
    offsets = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    B = len(theta)
    T = np.concatenate([theta + a * h for a, _ in offsets])
    S = np.concatenate([psi + b * h for _, b in offsets])
    E, F, G = (v.reshape(len(offsets), B) for v in _first_forms_float(m, x, P, T, S))

    def du(A):
        return (A[1] - A[2]) / (2 * h)

    def dv(A):
        return (A[3] - A[4]) / (2 * h)

    def duu(A):
        return (A[1] - 2 * A[0] + A[2]) / h**2

    def dvv(A):
        return (A[3] - 2 * A[0] + A[4]) / h**2

    def duv(A):
        return (A[5] - A[6] - A[7] + A[8]) / (4 * h * h)

    return _brioschi(E[0], F[0], G[0], du(E), dv(E), du(F), dv(F), du(G), dv(G),
                     (dvv(E), duv(F), duu(G)))


def indicatrix_curvature(m: FinslerMetric, x, samples=200, rng=None, method: str = "jet",
                         step: float = 1e-3) -> CurvatureStats:
    """Gauss curvature of the indicatrix with the metric induced by ``g``.

    The chart is polar angle / azimuth about the axis in the adapted frame,
    with polar angles kept away from the axis.  ``samples`` is a count or an
    array of ``(theta, psi)`` pairs.  ``method="fd"`` differentiates the first
    fundamental form numerically with ``step`` instead of using jets.
    """
    if m.kind not in ("finsleroid", "riemannian") or m.dim != 3:
        raise KindError("indicatrix curvature is implemented for 3-dimensional Finsleroid metrics")
    x = _point(m, x)
    if np.ndim(samples) == 0:
        rng = np.random.default_rng(0) if rng is None else rng
        theta, psi = _chart_samples(int(samples), rng)
    else:
        theta, psi = np.asarray(samples, dtype=float).T
    P = adapted_frame(m.background, x)
    if method == "jet":
        vals = _curvature_jet(m, x, P, theta, psi)
    elif method == "fd":
        vals = _curvature_fd(m, x, P, theta, psi, step)
    else:
        raise ValueError("method must be 'jet' or 'fd'")
    mean = float(np.mean(vals))
    K = float(cal.value_of(m.charge_at(x)))
    cands = curvature_candidates(K)
    closest = min(cands, key=lambda k: abs(cands[k] - mean))
    return CurvatureStats(mean, float(np.max(np.abs(vals - mean))), vals, cands, closest)

