"""Finsleroid-Finsler and related (alpha, beta) metrics.

The Finsleroid energy with charge ``K`` (``|K| < 4``) is::

    E = 1/2 (alpha^2 + K/2 beta q) exp(2A),
    2A = G arctan((4 beta / q + K) / c),   c = sqrt(16 - K^2),  G = 2K / c,

with ``q = sqrt(alpha^2 - beta^2)``.  It is an (alpha, beta) metric
``E = 1/2 alpha^2 phi(beta / alpha)`` whose profile ``phi`` extends
continuously to ``s = +-1``.  The energy is twice but not three times
differentiable at the axis directions ``+-b#``; evaluations near those
directions are guarded by exclusion cones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import calculus as cal
from .background import RiemannBackground, axis_at, metric_at
from .errors import ConsistencyError, DomainError, KindError, PoleError, RangeError

KINDS = ("riemannian", "randers", "finsleroid", "alpha-beta")
POLE_CONE = 1e-6
SPRAY_CONE = 1e-2


def charge_constants(K):
    """Return ``(c, G)`` with ``c = sqrt(16 - K^2)`` and ``G = 2K / c``."""
    c = cal.sqrt(16.0 - K * K)
    return c, 2.0 * K / c


def _check_charge(K):
    Kv = np.asarray(cal.value_of(K), dtype=float)
    if np.any(np.abs(Kv) >= 4.0) or not np.all(np.isfinite(Kv)):
        raise RangeError(f"Finsleroid charge must satisfy |K| < 4, got {Kv}")


# ---------------------------------------------------------------- profile


@dataclass(frozen=True)
class PhiEval:
    s: float
    value: float
    derivative: float
    exponent: float


def two_A(K: float, s):
    """Exponent ``2A(s)`` of the profile; ``+-G pi/2`` at ``s = +-1``."""
    _check_charge(K)
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > 1.0):
        raise RangeError("s must lie in [-1, 1]")
    c, G = charge_constants(K)
    r = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    return G * np.arctan2(4.0 * s + K * r, c * r)


def phi(K: float, s) -> PhiEval:
    """Profile ``phi(s)`` and ``phi'(s)`` of the Finsleroid energy.

    At ``s = +-1`` the value is the continuous extension ``exp(+-G pi/2)`` and
    the derivative is zero.
    """
    _check_charge(K)
    s_arr = np.asarray(s, dtype=float)
    if np.any(np.abs(s_arr) > 1.0):
        raise RangeError("s must lie in [-1, 1]")
    c, G = charge_constants(K)
    r = np.sqrt(np.clip(1.0 - s_arr * s_arr, 0.0, None))
    ex = two_A(K, s_arr)
    pole = np.abs(s_arr) == 1.0
    ex = np.where(pole, np.sign(s_arr) * G * math.pi / 2, ex)
    e = np.exp(ex)
    value = np.where(pole, e, (1.0 + 0.5 * K * s_arr * r) * e)
    deriv = np.where(pole, 0.0, K * r * e)
    if np.ndim(s) == 0:
        return PhiEval(float(s), float(value), float(deriv), float(ex))
    return PhiEval(s_arr, value, deriv, ex)


def sign_property_a(K: float, s, rtol: float = 1e-10):
    """``phi'(-s) phi(s) + phi(-s) phi'(s)``, checked against its closed form.

    The closed form is ``2K sqrt(1 - s^2) exp(2A(-s) + 2A(s))``; a mismatch
    beyond ``rtol`` raises :class:`ConsistencyError`.
    """
    plus, minus = phi(K, s), phi(K, -np.asarray(s, dtype=float))
    direct = minus.derivative * plus.value + minus.value * plus.derivative
    s_arr = np.asarray(s, dtype=float)
    closed = 2.0 * K * np.sqrt(np.clip(1.0 - s_arr**2, 0.0, None)) * np.exp(
        two_A(K, -s_arr) + two_A(K, s_arr)
    )
    err = np.abs(direct - closed)
    if np.any(err > rtol * np.abs(closed) + 1e-300):
        raise ConsistencyError(f"sign-property closed form mismatch: max error {err.max()}")
    return float(direct) if np.ndim(s) == 0 else direct


@dataclass(frozen=True)
class PhiBranches:
    piecewise: float
    compact: float


def finsleroid_Phi(g: float, b: float, q: float) -> PhiBranches:
    """The Finsleroid angle in its piecewise and its compact arctan form.

    ``g`` is the half charge (``|g| < 2``), ``b`` the axis component and
    ``q >= 0`` the transverse length of the direction.
    """
    if abs(g) >= 2.0:
        raise RangeError("half charge must satisfy |g| < 2")
    if q < 0.0:
        raise DomainError("q must be non-negative")
    if b == 0.0 and q == 0.0:
        raise DomainError("Phi is undefined at the zero vector")
    h = math.sqrt(1.0 - g * g / 4.0)
    G = g / h
    if b > 0.0:
        piece = math.pi / 2 + math.atan(G / 2) - math.atan((q + g * b / 2) / (h * b))
    elif b < 0.0:
        piece = -math.pi / 2 + math.atan(G / 2) - math.atan((q + g * b / 2) / (h * b))
    else:
        piece = math.atan(G / 2)
    compact = math.atan2(2 * b + g * q, 2 * h * q)
    return PhiBranches(piece, compact)


# ---------------------------------------------------------------- metrics


@dataclass(frozen=True)
class FinslerMetric:
    """A Finsler metric built on a Riemannian background.

    ``charge`` is the Finsleroid charge: a number, or a callable of the base
    point composed from :mod:`unicorn_lab.calculus` primitives.
    ``randers_scale`` multiplies the unit axis for the Randers kind so that
    ``F = alpha + k beta`` stays positive.  ``phi``/``dphi`` define the
    profile of a general (alpha, beta) metric ``E = 1/2 alpha^2 phi(s)``.
    """

    background: RiemannBackground
    kind: str = "finsleroid"
    charge: float | Callable = 0.0
    randers_scale: float = 0.5
    phi: Callable | None = None
    dphi: Callable | None = None
    pole_cone: float = POLE_CONE
    spray_cone: float = SPRAY_CONE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindError(f"unknown metric kind {self.kind!r}")
        if self.kind == "finsleroid" and not callable(self.charge):
            _check_charge(self.charge)
        if self.kind == "randers" and not 0.0 <= abs(self.randers_scale) < 1.0:
            raise RangeError("Randers scale must satisfy |k| < 1 for a unit axis")
        if self.kind == "alpha-beta" and (self.phi is None or self.dphi is None):
            raise KindError("an (alpha, beta) metric needs phi and its derivative dphi")

    @classmethod
    def riemannian(cls, bg):
        return cls(bg, "riemannian")

    @classmethod
    def randers(cls, bg, scale=0.5):
        return cls(bg, "randers", randers_scale=scale)

    @classmethod
    def finsleroid(cls, bg, K):
        return cls(bg, "finsleroid", charge=K)

    @classmethod
    def alpha_beta(cls, bg, phi, dphi):
        return cls(bg, "alpha-beta", phi=phi, dphi=dphi)

    @property
    def dim(self):
        return self.background.dim

    @property
    def constant_charge(self):
        return not callable(self.charge)

    def charge_at(self, x):
        if self.kind != "finsleroid":
            return 0.0
        if callable(self.charge):
            K = self.charge(x)
            _check_charge(K)
            return K
        return self.charge

    def profile(self, s):
        """``(phi(s), phi'(s))`` with ``E = 1/2 alpha^2 phi(beta / alpha)``."""
        if self.kind == "finsleroid":
            if not self.constant_charge:
                raise KindError("profile of a position-dependent charge is undefined")
            p = phi(self.charge, s)
            return p.value, p.derivative
        if self.kind == "randers":
            k = self.randers_scale
            return (1 + k * s) ** 2, 2 * k * (1 + k * s)
        if self.kind == "riemannian":
            return np.ones_like(s, dtype=float), np.zeros_like(s, dtype=float)
        return self.phi(s), self.dphi(s)


def _quad(M, y):
    n = len(y)
    return sum(M[i][j] * y[i] * y[j] for i in range(n) for j in range(n))


def energy_expr(m: FinslerMetric, x, y):
    """Energy as an expression of entry lists ``x`` and ``y``.

    Works on floats, arrays (trailing batch axes) and jets.
    """
    n = m.dim
    A = m.background.metric_expr(x)
    b = m.background.axis_expr(x)
    alpha2 = _quad(A, y)
    beta = sum(b[i] * y[i] for i in range(n))
    if m.kind == "riemannian":
        return 0.5 * alpha2
    if m.kind == "randers":
        F = cal.sqrt(alpha2) + m.randers_scale * beta
        return 0.5 * F * F
    if m.kind == "alpha-beta":
        alpha = cal.sqrt(alpha2)
        return 0.5 * alpha2 * m.phi(beta / alpha)
    K = m.charge_at(x)
    R = [[A[i][j] - b[i] * b[j] for j in range(n)] for i in range(n)]
    q2 = _quad(R, y)
    if isinstance(q2, cal.Jet):
        q = cal.sqrt(q2)
    else:
        q = np.sqrt(np.maximum(q2, 0.0))
    if isinstance(K, (int, float)) and K == 0.0:
        return 0.5 * alpha2
    c, G = charge_constants(K)
    expo = G * cal.arctan2(4.0 * beta + K * q, c * q)
    return 0.5 * (alpha2 + 0.5 * K * beta * q) * cal.exp(expo)


def _point(m, x):
    x = cal.as_vector(x, m.dim)
    m.background.check_domain(x)
    return x


def _directions(m, y):
    y = np.asarray(y, dtype=float)
    if y.shape[0] != m.dim:
        raise DomainError(f"direction must have {m.dim} components")
    if np.any(np.sum(y * y, axis=0) == 0.0):
        raise DomainError("direction must be non-zero")
    return y


def energy(m: FinslerMetric, x, y):
    """Energy ``E(x, y)``; ``y`` may carry trailing batch axes."""
    x = _point(m, x)
    y = _directions(m, y)
    E = energy_expr(m, list(x), list(y))
    return float(E) if np.ndim(E) == 0 else np.asarray(E)


def finsler_norm(m: FinslerMetric, x, y):
    return np.sqrt(2.0 * energy(m, x, y))


def adapted_frame(bg: RiemannBackground, x) -> np.ndarray:
    """Columns form an ``a``-orthonormal frame whose last vector is ``b#``.

    The remaining vectors come from Gram-Schmidt on the standard basis, with
    the basis vector most aligned to ``b#`` left out.
    """
    a = metric_at(bg, x)
    b = axis_at(bg, x)
    bsharp = np.linalg.solve(a, b)
    bsharp /= math.sqrt(bsharp @ a @ bsharp)
    n = bg.dim
    drop = int(np.argmax(np.abs(b) / np.sqrt(np.diag(np.linalg.inv(a)))))
    frame = []
    for k in range(n):
        if k == drop:
            continue
        v = np.eye(n)[k]
        for w in frame + [bsharp]:
            v = v - (w @ a @ v) * w
        frame.append(v / math.sqrt(v @ a @ v))
    return np.column_stack(frame + [bsharp])


def pole_angle(m: FinslerMetric, x, y) -> float:
    """Angle (in ``a``) between ``y`` and the nearer of ``+-b#``."""
    a = metric_at(m.background, x)
    b = axis_at(m.background, x)
    y = np.asarray(y, dtype=float)
    beta = b @ y
    q2 = y @ (a - np.outer(b, b)) @ y
    return float(np.arctan2(math.sqrt(max(q2, 0.0)), abs(beta)))


def _guard_pole(m, x, y, cone):
    if m.kind != "finsleroid":
        return
    ang = pole_angle(m, x, y)
    if ang < cone:
        raise PoleError(
            f"direction within {ang:.3g} rad of the Finsleroid axis; "
            f"pole policy excludes a cone of {cone:g} rad at this order",
            angle=ang,
            cone=cone,
        )


def lift_energy(m: FinslerMetric, x, y, orders=(0, 2), total=None, frame=None):
    """Jet of the energy at ``(x, y)``.

    With ``frame`` given, the direction variables are components in that
    frame (``y = frame @ y_frame``) and ``y`` is read in frame components.
    """
    x = np.asarray(x, dtype=float)

    def f(xs, ys):
        if frame is not None:
            n = len(ys)
            ys = [sum(frame[i][j] * ys[j] for j in range(n)) for i in range(n)]
        return energy_expr(m, xs, ys)

    return cal.jet_lift(f, (x, y), orders=orders, total=total)


@dataclass(frozen=True)
class HessianReport:
    g: np.ndarray
    det: float
    min_eigenvalue: float
    l: np.ndarray
    C: np.ndarray


def hessian(m: FinslerMetric, x, y) -> HessianReport:
    """Fundamental tensor, its spectrum, ``dF/dy`` and the Cartan tensor."""
    x = _point(m, x)
    y = cal.as_vector(_directions(m, y), m.dim)
    _guard_pole(m, x, y, m.pole_cone)
    lj = lift_energy(m, x, y, orders=(0, 3))
    g = lj.y_tensor(2)
    F = math.sqrt(2.0 * float(lj.value))
    return HessianReport(
        g=g,
        det=float(np.linalg.det(g)),
        min_eigenvalue=float(np.linalg.eigvalsh(g)[0]),
        l=lj.y_tensor(1) / F,
        C=0.5 * lj.y_tensor(3),
    )


def hessian_batch(m: FinslerMetric, x, Y) -> np.ndarray:
    """Fundamental tensors at many directions; ``Y`` has shape ``(n, B)``.

    Returns an array of shape ``(B, n, n)``.  No pole guard: callers keep
    their nodes off the axis.
    """
    x = _point(m, x)
    lj = lift_energy(m, x, np.asarray(Y, dtype=float), orders=(0, 2))
    return np.moveaxis(lj.y_tensor(2), -1, 0)


def cartan(m: FinslerMetric, x, y) -> np.ndarray:
    """First Cartan tensor ``C_ijk = 1/2 d g_ij / d y^k``."""
    return hessian(m, x, y).C


def _require_finsleroid(m):
    if m.kind != "finsleroid":
        raise KindError("this closed form is defined for Finsleroid metrics only")


def _frame_components(m, x, y):
    P = adapted_frame(m.background, x)
    a = metric_at(m.background, x)
    return P, P.T @ a @ np.asarray(y, dtype=float)


def energy_gradient_closed(m: FinslerMetric, x, y) -> np.ndarray:
    """``dE/dy`` in the adapted frame from its closed form.

    ``exp(2A) (y + K/2 q e_n)``, valid on and off the axis.
    """
    _require_finsleroid(m)
    x = _point(m, x)
    y = cal.as_vector(_directions(m, y), m.dim)
    _, yt = _frame_components(m, x, y)
    K = m.charge_at(x)
    c, G = charge_constants(K)
    beta = yt[-1]
    q = math.sqrt(float(yt[:-1] @ yt[:-1]))
    e2A = math.exp(G * math.atan2(4.0 * beta + K * q, c * q))
    out = e2A * yt
    out[-1] += e2A * 0.5 * K * q
    return out


def hessian_closed(m: FinslerMetric, x, y) -> np.ndarray:
    """Fundamental tensor in the adapted frame from its closed form."""
    _require_finsleroid(m)
    x = _point(m, x)
    y = cal.as_vector(_directions(m, y), m.dim)
    _guard_pole(m, x, y, m.pole_cone)
    _, yt = _frame_components(m, x, y)
    n = m.dim
    K = m.charge_at(x)
    c, G = charge_constants(K)
    beta = yt[-1]
    alpha2 = float(yt @ yt)
    q = math.sqrt(float(yt[:-1] @ yt[:-1]))
    e2A = math.exp(G * math.atan2(4.0 * beta + K * q, c * q))
    en = np.zeros(n)
    en[-1] = 1.0
    denom = alpha2 + 0.5 * K * beta * q
    bracket = (
        K * (alpha2 * (np.outer(yt, en) + np.outer(en, yt))
             - beta * (np.outer(yt, yt) + alpha2 * np.outer(en, en))) / (2.0 * q)
        + np.eye(n) * denom
        + 0.25 * K * K * np.outer(en, en) * q * q
    )
    return e2A / denom * bracket


def hessian_at_pole(m: FinslerMetric, x, sign: int) -> np.ndarray:
    """Fundamental tensor at ``sign * b#`` in the adapted frame.

    The closed forms of the three entry blocks all reduce to
    ``exp(sign G pi/2) * I``.
    """
    _require_finsleroid(m)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    x = _point(m, x)
    K = m.charge_at(x)
    _, G = charge_constants(K)
    return math.exp(sign * G * math.pi / 2) * np.eye(m.dim)


def frame_to_coordinates(bg: RiemannBackground, x, g_frame) -> np.ndarray:
    """Convert a bilinear form from adapted-frame to coordinate components."""
    P = adapted_frame(bg, x)
    L = metric_at(bg, x) @ P
    return L @ g_frame @ L.T


def approach_directions(n: int, angles, sign: int = 1, azimuth: float = 0.3) -> np.ndarray:
    """Unit directions (frame components) at the given angles from ``sign e_n``."""
    angles = np.asarray(angles, dtype=float)
    perp = np.zeros(n)
    perp[0] = math.cos(azimuth)
    if n > 2:
        perp[1] = math.sin(azimuth)
    out = np.outer(np.sin(angles), perp)
    out[:, -1] = sign * np.cos(angles)
    return out


@dataclass(frozen=True)
class RegularityReport:
    """Behaviour of the ``order``-th y-derivatives along an approach to the axis.

    For orders 1 and 2, ``errors`` are max-norm distances to the closed-form
    limit relative to the largest entry of the limit (``abs_errors`` keeps the
    unscaled ones) and ``converged`` tells whether they decrease monotonically.  For
    higher orders ``norms`` holds the Frobenius norms, ``growth_ratio`` is
    last over first, and ``jump`` is the max-norm difference between the
    tensors reached from two orthogonal azimuths at the smallest angle, a
    direct witness of discontinuity.
    """

    order: int
    angles: np.ndarray
    values: list
    limit: np.ndarray | None
    errors: np.ndarray | None
    abs_errors: np.ndarray | None
    norms: np.ndarray
    converged: bool
    growth_ratio: float | None
    jump: float | None


def regularity_probe(m: FinslerMetric, x, order: int, angles, sign: int = 1,
                     azimuth: float = 0.3) -> RegularityReport:
    """Follow the ``order``-th y-derivatives of ``E`` towards ``sign * b#``.

    Derivatives are taken in the adapted frame at unit directions making the
    given angles with the axis.  No pole cone is applied.
    """
    _require_finsleroid(m)
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be 1, 2, 3 or 4")
    x = _point(m, x)
    P = adapted_frame(m.background, x)
    n = m.dim
    angles = np.asarray(angles, dtype=float)

    def derivs(dirs):
        lj = lift_energy(m, x, dirs.T, orders=(0, order), frame=P)
        return np.moveaxis(lj.y_tensor(order), -1, 0)

    values = derivs(approach_directions(n, angles, sign, azimuth))
    norms = np.array([np.linalg.norm(v) for v in values])
    K = m.charge_at(x)
    _, G = charge_constants(K)
    limit = errors = abs_errors = growth = jump = None
    if order == 1:
        limit = np.zeros(n)
        limit[-1] = sign * math.exp(sign * G * math.pi / 2)
    elif order == 2:
        limit = hessian_at_pole(m, x, sign)
    if limit is not None:
        abs_errors = np.array([np.max(np.abs(v - limit)) for v in values])
        errors = abs_errors / np.max(np.abs(limit))
        converged = bool(np.all(np.diff(errors) < 0))
    else:
        growth = float(norms[-1] / norms[0]) if norms[0] > 0 else math.nan
        other = derivs(approach_directions(n, angles[-1:], sign, azimuth + math.pi / 2))[0]
        jump = float(np.max(np.abs(values[-1] - other)))
        converged = False
    return RegularityReport(order, angles, list(values), limit, errors, abs_errors, norms,
                            converged, growth, jump)
