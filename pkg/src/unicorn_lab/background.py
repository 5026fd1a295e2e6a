"""Riemannian backgrounds ``(a, b)`` and their Levi-Civita data.

A background is a pair of closed-form callables: ``x -> a_ij(x)`` and
``x -> b_i(x)``, where ``b`` has unit length with respect to ``a``.  The
callables are written with the primitives of :mod:`unicorn_lab.calculus`, so
they accept floats, arrays or jets and every derivative is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import calculus as cal
from .errors import DomainError

CATALOG = ("euclidean-const-axis", "radial", "radial-perturbed", "warped")
WARPS = ("exp", "cosh")


@dataclass(frozen=True)
class RiemannBackground:
    """Single-chart Riemannian metric with a unit axis 1-form.

    ``metric_expr(x)`` returns an ``n x n`` nested list and ``axis_expr(x)``
    a length-``n`` list; entries may be floats, arrays or jets.  The chart is
    the box ``|x_i| <= box`` intersected with the shell
    ``r_min <= |x| <= r_max`` when those are set.
    """

    key: str
    dim: int
    metric_expr: Callable
    axis_expr: Callable
    box: float = 4.0
    r_min: float | None = None
    r_max: float | None = None
    params: dict = field(default_factory=dict)

    def check_domain(self, x):
        xv = np.asarray([cal.value_of(c) for c in x], dtype=float)
        if xv.shape[0] != self.dim:
            raise DomainError(f"expected a point of dimension {self.dim}")
        if not np.all(np.isfinite(xv)) or np.any(np.abs(xv) > self.box + 1e-12):
            raise DomainError(f"{self.key}: point outside the chart box |x_i| <= {self.box}")
        if self.r_min is not None or self.r_max is not None:
            r = np.sqrt(np.sum(xv**2, axis=0))
            lo = self.r_min if self.r_min is not None else 0.0
            hi = self.r_max if self.r_max is not None else np.inf
            if np.any(r < lo - 1e-12) or np.any(r > hi + 1e-12):
                raise DomainError(f"{self.key}: |x| outside [{lo}, {hi}]")

    def contains(self, x) -> bool:
        try:
            self.check_domain(x)
        except DomainError:
            return False
        return True

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from the chart by rejection."""
        out = []
        lo = self.r_min or 0.0
        hi = min(self.r_max or np.inf, self.box * np.sqrt(self.dim))
        # keep away from the chart boundary so stencils fit
        while len(out) < count:
            if self.r_min is not None or self.r_max is not None:
                d = rng.normal(size=self.dim)
                d /= np.linalg.norm(d)
                r = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
                p = r * d
            else:
                p = rng.uniform(-0.8 * self.box, 0.8 * self.box, size=self.dim)
            if self.contains(p):
                out.append(p)
        return np.array(out)


@dataclass(frozen=True)
class LeviCivitaData:
    """Christoffel symbols ``christoffel[l, i, j]`` and derived axis data.

    ``nabla_beta[i, j]`` is ``(nabla_i b)_j``; ``div_beta`` its ``a``-trace.
    ``metric_derivative[k, i, j]`` is ``d a_ij / d x^k``.
    """

    christoffel: np.ndarray
    nabla_beta: np.ndarray
    div_beta: float
    metric: np.ndarray
    axis: np.ndarray
    metric_derivative: np.ndarray
    axis_derivative: np.ndarray


def metric_at(bg: RiemannBackground, x) -> np.ndarray:
    x = cal.as_vector(x, bg.dim)
    bg.check_domain(x)
    return np.array(bg.metric_expr(list(x)), dtype=float)


def axis_at(bg: RiemannBackground, x) -> np.ndarray:
    x = cal.as_vector(x, bg.dim)
    bg.check_domain(x)
    return np.array(bg.axis_expr(list(x)), dtype=float)


def axis_vector(bg: RiemannBackground, x) -> np.ndarray:
    """The ``a``-dual vector field of the axis form."""
    return np.linalg.solve(metric_at(bg, x), axis_at(bg, x))


def _first_jets(bg, x):
    n = bg.dim
    alg = cal.algebra(((n, 1),), 1)
    xs = [alg.variable(i, x[i]) for i in range(n)]

    def lift(c):
        return c if isinstance(c, cal.Jet) else alg.constant(c)

    A = [[lift(c) for c in row] for row in bg.metric_expr(xs)]
    B = [lift(c) for c in bg.axis_expr(xs)]
    a = np.array([[c.value for c in row] for row in A], dtype=float)
    da = np.array([[[c.coeffs[1 + k] for c in row] for row in A] for k in range(n)])
    b = np.array([c.value for c in B], dtype=float)
    db = np.array([[c.coeffs[1 + k] for c in B] for k in range(n)])
    return a, da, b, db


def levi_civita(bg: RiemannBackground, x) -> LeviCivitaData:
    """Levi-Civita connection of ``a`` and the covariant derivative of ``b``."""
    x = cal.as_vector(x, bg.dim)
    bg.check_domain(x)
    a, da, b, db = _first_jets(bg, x)
    ainv = np.linalg.inv(a)
    # lowered symbols [m, i, j] = (d_i a_mj + d_j a_mi - d_m a_ij) / 2
    low = 0.5 * (
        np.einsum("imj->mij", da) + np.einsum("jmi->mij", da) - da
    )
    gamma = np.einsum("lm,mij->lij", ainv, low)
    nb = db - np.einsum("lij,l->ij", gamma, b)
    div = float(np.einsum("ij,ij->", ainv, nb))
    return LeviCivitaData(gamma, nb, div, a, b, da, db)


def metricity_residual(bg: RiemannBackground, x, christoffel=None) -> float:
    """Max-norm of ``nabla a`` for the given (default Levi-Civita) symbols."""
    lc = levi_civita(bg, x)
    G = lc.christoffel if christoffel is None else christoffel
    na = (
        lc.metric_derivative
        - np.einsum("lki,lj->kij", G, lc.metric)
        - np.einsum("lkj,il->kij", G, lc.metric)
    )
    return float(np.max(np.abs(na)))


def landsberg_condition_residual(bg: RiemannBackground, x) -> float:
    """Frobenius distance of ``nabla b`` from ``(div b / (n-1)) (a - b b)``."""
    lc = levi_civita(bg, x)
    n = bg.dim
    target = lc.div_beta / (n - 1) * (lc.metric - np.outer(lc.axis, lc.axis))
    return float(np.linalg.norm(lc.nabla_beta - target))


def _identity_metric(n):
    def metric(x):
        return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

    return metric


def euclidean_const_axis(n: int = 3, box: float = 4.0) -> RiemannBackground:
    def axis(x):
        return [0.0] * (n - 1) + [1.0]

    return RiemannBackground("euclidean-const-axis", n, _identity_metric(n), axis, box=box)


def radial(n: int = 3, r_min: float = 0.5, r_max: float = 4.0) -> RiemannBackground:
    """Euclidean metric with the unit radial axis ``b = x / |x|``."""
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")

    def axis(x):
        r = cal.sqrt(sum(c * c for c in x))
        return [c / r for c in x]

    return RiemannBackground(
        "radial", n, _identity_metric(n), axis, box=r_max, r_min=r_min, r_max=r_max,
        params={"r_min": r_min, "r_max": r_max},
    )


def radial_perturbed(n: int = 3, epsilon: float = 0.3, box: float = 2.0) -> RiemannBackground:
    """Euclidean metric with axis ``(eps x^1, 0, ..., 0, 1)`` normalised."""

    def axis(x):
        raw = [epsilon * x[0]] + [0.0] * (n - 2) + [1.0]
        norm = cal.sqrt(1.0 + (epsilon * x[0]) * (epsilon * x[0]))
        return [c / norm for c in raw]

    return RiemannBackground(
        "radial-perturbed", n, _identity_metric(n), axis, box=box, params={"epsilon": epsilon}
    )


def warped(n: int = 3, warp: str = "exp", rate: float = 0.5, box: float = 1.5) -> RiemannBackground:
    """Warped product ``(dx^1)^2 + f(x^1)^2 |dx'|^2`` with axis ``dx^1``."""
    if warp not in WARPS:
        raise ValueError(f"warp must be one of {WARPS}")

    def f(t):
        if warp == "exp":
            return cal.exp(rate * t)
        return 0.5 * (cal.exp(rate * t) + cal.exp(-rate * t))

    def metric(x):
        w = f(x[0])
        w2 = w * w
        return [
            [1.0 if i == j == 0 else (w2 if i == j else 0.0) for j in range(n)]
            for i in range(n)
        ]

    def axis(x):
        return [1.0] + [0.0] * (n - 1)

    return RiemannBackground(
        "warped", n, metric, axis, box=box, params={"warp": warp, "rate": rate}
    )


def make_background(key: str, n: int = 3, **params) -> RiemannBackground:
    """Build a catalog background by key."""
    if n < 2 or n > 5:
        raise ValueError("dimension must be between 2 and 5")
    if key == "euclidean-const-axis":
        return euclidean_const_axis(n, **params)
    if key == "radial":
        return radial(n, **params)
    if key == "radial-perturbed":
        return radial_perturbed(n, **params)
    if key == "warped":
        return warped(n, **params)
    raise KeyError(f"unknown background {key!r}; choose from {CATALOG}")
