"""Linear connections on the base, torsion, and parallel transport.

Coefficients follow ``nabla_{d_i} d_j = Gamma[l, i, j] d_l``; torsion is
``T[l, i, j] = Gamma[l, i, j] - Gamma[l, j, i]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .background import (
    RiemannBackground,
    landsberg_condition_residual,
    levi_civita,
    metric_at,
)
from .errors import HypothesisError, ODEError
from .metric import FinslerMetric, finsler_norm

TAGS = ("levi-civita", "randers-compatible", "semi-symmetric", "custom")
TORSION_ZERO = 1e-10


@dataclass(frozen=True)
class LinearConnection:
    coefficients: Callable[[np.ndarray], np.ndarray]
    tag: str
    dim: int
    background: RiemannBackground | None = None
    note: str = ""

    def __call__(self, x):
        return self.coefficients(np.asarray(x, dtype=float))


def _hypothesis_points(bg, count=12, seed=20161):
    return bg.sample_points(count, np.random.default_rng(seed))


def levi_civita_connection(bg: RiemannBackground) -> LinearConnection:
    return LinearConnection(lambda x: levi_civita(bg, x).christoffel, "levi-civita", bg.dim, bg)


def _axis_sharp_data(lc):
    ainv = np.linalg.inv(lc.metric)
    bs = ainv @ lc.axis
    # B[l, i] = (nabla*_i b#)^l
    B = np.einsum("lm,im->li", ainv, lc.nabla_beta)
    return bs, B


def randers_compatible(bg: RiemannBackground, check: bool = True) -> LinearConnection:
    """Connection that parallelises both ``a`` and the axis form.

    ``nabla_X Y = nabla*_X Y + (a(nabla*_X b#, Y) b# - a(Y, b#) nabla*_X b#) / a(b#, b#)``.
    """
    if check:
        lengths = []
        for p in _hypothesis_points(bg):
            lc = levi_civita(bg, p)
            lengths.append(lc.axis @ np.linalg.solve(lc.metric, lc.axis))
        if max(lengths) - min(lengths) > 1e-6:
            raise HypothesisError("axis vector field does not have constant length")

    def coeffs(x):
        lc = levi_civita(bg, x)
        bs, B = _axis_sharp_data(lc)
        a = lc.metric
        norm2 = bs @ a @ bs
        corr = np.einsum("mi,mj,l->lij", B, a, bs) - np.einsum("j,li->lij", lc.axis, B)
        return lc.christoffel + corr / norm2

    return LinearConnection(coeffs, "randers-compatible", bg.dim, bg)


def unicorn_lambda(bg: RiemannBackground, x) -> np.ndarray:
    """Torsion form ``lambda = -(div b# / (n - 1)) b``."""
    lc = levi_civita(bg, x)
    return -lc.div_beta / (bg.dim - 1) * lc.axis


def unicorn_connection(bg: RiemannBackground, variant: str = "n-1",
                       check: bool = True) -> LinearConnection:
    """Semi-symmetric metric connection with torsion ``lambda(Y) X - lambda(X) Y``.

    ``variant="n+1"`` builds the deliberately wrong connection whose last
    term carries ``div b# / (n + 1)``; it serves as a negative control.
    """
    if variant not in ("n-1", "n+1"):
        raise ValueError("variant must be 'n-1' or 'n+1'")
    if check:
        worst = max(landsberg_condition_residual(bg, p) for p in _hypothesis_points(bg))
        if worst > 1e-8:
            raise HypothesisError(
                f"background violates the Landsberg condition (residual {worst:.3g})"
            )
    n = bg.dim

    def coeffs(x):
        lc = levi_civita(bg, x)
        bs, _ = _axis_sharp_data(lc)
        k = lc.div_beta / (n - 1)
        k_last = k if variant == "n-1" else lc.div_beta / (n + 1)
        eye = np.eye(n)
        return (
            lc.christoffel
            - k * np.einsum("j,li->lij", lc.axis, eye)
            + k_last * np.einsum("ij,l->lij", lc.metric, bs)
        )

    tag = "semi-symmetric" if variant == "n-1" else "custom"
    note = "" if variant == "n-1" else "n+1 variant"
    return LinearConnection(coeffs, tag, n, bg, note)


def custom_connection(func: Callable, dim: int, bg=None) -> LinearConnection:
    return LinearConnection(func, "custom", dim, bg)


def torsion(conn: LinearConnection, x) -> np.ndarray:
    G = conn(x)
    return G - np.swapaxes(G, 1, 2)


@dataclass(frozen=True)
class TorsionDecomposition:
    """``T = T1 + T2`` with ``T1 = A1 + S1``.

    ``trace[i] = sum_j T[j, i, j]`` is the trace of ``Y -> T(X, Y)``;
    ``T2`` is its vectorial part, ``A1`` the totally skew part of ``T1``
    after lowering with the given metric, ``S1`` the rest.
    """

    T: np.ndarray
    trace: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    A1: np.ndarray
    S1: np.ndarray

    @property
    def classification(self) -> str:
        parts = [
            name
            for name, t in (("axial", self.A1), ("cyclic-traceless", self.S1), ("vectorial", self.T2))
            if np.max(np.abs(t), initial=0.0) > TORSION_ZERO
        ]
        return "+".join(parts) if parts else "torsion-free"


def torsion_decompose(conn: LinearConnection, x, metric=None) -> TorsionDecomposition:
    T = torsion(conn, x)
    n = conn.dim
    if metric is None:
        metric = metric_at(conn.background, x) if conn.background is not None else np.eye(n)
    metric = np.asarray(metric, dtype=float)
    tr = np.einsum("jij->i", T)
    eye = np.eye(n)
    T2 = (np.einsum("i,lj->lij", tr, eye) - np.einsum("j,li->lij", tr, eye)) / (n - 1)
    T1 = T - T2
    low = np.einsum("lm,mij->lij", metric, T1)
    A_low = (low + np.einsum("lij->ijl", low) + np.einsum("lij->jli", low)) / 3.0
    A1 = np.einsum("lm,mij->lij", np.linalg.inv(metric), A_low)
    return TorsionDecomposition(T, tr, T1, T2, A1, T1 - A1)


# ------------------------------------------------------------------ curves


@dataclass(frozen=True)
class Curve:
    """Smooth curve ``t -> point(t)`` on ``[0, 1]`` with its velocity."""

    point: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    label: str = ""
    reverse_of: "Curve | None" = field(default=None, repr=False)

    def reversed(self) -> "Curve":
        return Curve(lambda t: self.point(1.0 - t), lambda t: -self.velocity(1.0 - t),
                     self.label + " (reversed)")

    def length(self, samples: int = 64) -> float:
        t = np.linspace(0.0, 1.0, samples + 1)
        mid = 0.5 * (t[1:] + t[:-1])
        return float(sum(np.linalg.norm(self.velocity(s)) for s in mid) / samples)


def circular_arc(center, radius, u, v, angle) -> Curve:
    """Arc ``center + radius (cos s u + sin s v)`` for ``s`` in ``[0, angle]``."""
    c, u, v = (np.asarray(w, dtype=float) for w in (center, u, v))
    return Curve(
        lambda t: c + radius * (math.cos(angle * t) * u + math.sin(angle * t) * v),
        lambda t: radius * angle * (-math.sin(angle * t) * u + math.cos(angle * t) * v),
        f"arc r={radius:g}",
    )


def segment(p0, p1) -> Curve:
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    return Curve(lambda t: p0 + t * (p1 - p0), lambda t: p1 - p0, "segment")


def bezier(control) -> Curve:
    P = np.asarray(control, dtype=float)
    d = len(P) - 1
    binom = [math.comb(d, k) for k in range(d + 1)]
    dbinom = [math.comb(d - 1, k) for k in range(d)]
    dP = d * (P[1:] - P[:-1])

    def point(t):
        w = np.array([binom[k] * t**k * (1 - t) ** (d - k) for k in range(d + 1)])
        return w @ P

    def velocity(t):
        w = np.array([dbinom[k] * t**k * (1 - t) ** (d - 1 - k) for k in range(d)])
        return w @ dP

    return Curve(point, velocity, f"bezier degree {d}")


def sample_curves(bg: RiemannBackground, count: int, rng: np.random.Generator) -> list:
    """Arcs, segments and cubic Bezier curves lying inside the chart."""
    n = bg.dim
    curves = []
    kinds = ("arc", "segment", "bezier")
    shell = bg.r_min is not None
    while len(curves) < count:
        kind = kinds[len(curves) % 3]
        if kind == "arc":
            u, v = np.linalg.qr(rng.normal(size=(n, 2)))[0].T
            if shell:
                r = 0.5 * (bg.r_min + bg.r_max) if bg.r_max < 3 else 2.0
                c = np.zeros(n)
            else:
                r = rng.uniform(0.2, 0.4) * bg.box
                c = rng.uniform(-0.3, 0.3, size=n) * bg.box
            curve = circular_arc(c, r, u, v, rng.uniform(0.5, 2.5))
        elif kind == "segment":
            if shell:
                d = rng.normal(size=n)
                d /= np.linalg.norm(d)
                lo, hi = bg.r_min, bg.r_max
                curve = segment(d * (lo + 0.2 * (hi - lo)), d * (hi - 0.3 * (hi - lo)))
            else:
                p = bg.sample_points(2, rng)
                curve = segment(p[0], p[1])
        else:
            curve = bezier(bg.sample_points(4, rng))
        ts = np.linspace(0.0, 1.0, 41)
        if all(bg.contains(curve.point(t)) for t in ts):
            curves.append(curve)
    return curves


# --------------------------------------------------------------- transport


@dataclass(frozen=True)
class TransportResult:
    curve: Curve
    initial: np.ndarray
    transported: np.ndarray
    f_drift: float | None
    gamma_drift: float | None
    a_drift: float | None
    tolerance: float
    steps: int


def _rate_matrix(conn, curve, t):
    x = curve.point(t)
    return np.einsum("lij,i->lj", conn(x), curve.velocity(t))


def transport_matrix(conn: LinearConnection, curve: Curve, tol: float = 1e-9,
                     max_steps: int = 200_000):
    """Fundamental matrix of ``v' + Gamma(x') v = 0`` by classical RK4.

    The step satisfies ``h^4 * max|Gamma x'| <= tol`` (the curve parameter
    runs over ``[0, 1]``).
    """
    probe = max(np.linalg.norm(_rate_matrix(conn, curve, t)) for t in np.linspace(0, 1, 9))
    scale = max(probe, 1e-12)
    steps = max(8, math.ceil(1.0 / (tol / scale) ** 0.25))
    if steps > max_steps:
        raise ODEError(f"transport needs {steps} steps (> {max_steps}); step size underflow")
    h = 1.0 / steps
    n = conn.dim
    Phi = np.eye(n)
    for k in range(steps):
        t = k * h
        A1 = _rate_matrix(conn, curve, t)
        A2 = _rate_matrix(conn, curve, t + 0.5 * h)
        A3 = _rate_matrix(conn, curve, t + h)
        k1 = -A1 @ Phi
        k2 = -A2 @ (Phi + 0.5 * h * k1)
        k3 = -A2 @ (Phi + 0.5 * h * k2)
        k4 = -A3 @ (Phi + h * k3)
        Phi = Phi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(Phi)):
        raise ODEError("transport diverged")
    return Phi, steps


def _relative_drift(before, after):
    return np.abs(after - before) / before


def parallel_transport(conn: LinearConnection, curve: Curve, v0, tol: float = 1e-9,
                       metric: FinslerMetric | None = None, gamma: Callable | None = None):
    """Transport ``v0`` (shape ``(n,)`` or ``(n, k)``) along ``curve``.

    Drifts are relative changes of the Finsler norm (``metric``), of the
    ``gamma``-norm (``gamma(x)`` returns a matrix) and of the background
    norm; each is the maximum over the transported vectors.
    """
    Phi, steps = transport_matrix(conn, curve, tol)
    v0 = np.asarray(v0, dtype=float)
    v1 = Phi @ v0
    x0, x1 = curve.point(0.0), curve.point(1.0)
    f_drift = g_drift = a_drift = None
    if metric is not None:
        f_drift = float(np.max(_relative_drift(finsler_norm(metric, x0, v0),
                                               finsler_norm(metric, x1, v1))))
    if gamma is not None:
        G0, G1 = gamma(x0), gamma(x1)
        n0 = np.sqrt(np.einsum("i...,ij,j...->...", v0, G0, v0))
        n1 = np.sqrt(np.einsum("i...,ij,j...->...", v1, G1, v1))
        g_drift = float(np.max(_relative_drift(n0, n1)))
    if conn.background is not None:
        a0, a1 = metric_at(conn.background, x0), metric_at(conn.background, x1)
        n0 = np.sqrt(np.einsum("i...,ij,j...->...", v0, a0, v0))
        n1 = np.sqrt(np.einsum("i...,ij,j...->...", v1, a1, v1))
        a_drift = float(np.max(_relative_drift(n0, n1)))
    return TransportResult(curve, v0, v1, f_drift, g_drift, a_drift, tol, steps)


@dataclass(frozen=True)
class CompatibilityReport:
    max_f_drift: float
    max_gamma_drift: float | None
    tolerance: float
    compatible: bool
    transports: int


def compatibility_check(conn: LinearConnection, m: FinslerMetric, curves, vectors,
                        tol: float = 1e-9, gamma: Callable | None = None) -> CompatibilityReport:
    """Max Finsler-norm drift over all curves and vectors.

    ``vectors`` has shape ``(k, n)``.  The verdict is "compatible" when the
    drift stays within ten times the integrator tolerance.
    """
    V = np.asarray(vectors, dtype=float).T
    worst, worst_g = 0.0, None
    for c in curves:
        r = parallel_transport(conn, c, V, tol, metric=m, gamma=gamma)
        worst = max(worst, r.f_drift)
        if r.gamma_drift is not None:
            worst_g = max(worst_g or 0.0, r.gamma_drift)
    return CompatibilityReport(worst, worst_g, tol, worst <= 10 * tol, len(curves) * V.shape[1])
