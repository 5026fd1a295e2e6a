"""Truncated Taylor arithmetic and finite-difference oracles.

A :class:`Jet` is an element of a truncated multivariate polynomial algebra.
Variables are organised in groups (typically base coordinates ``x`` and
direction coordinates ``y``); each group carries its own maximal degree and
the algebra carries a maximal total degree.  Composing jets with the
primitives below (:func:`sqrt`, :func:`exp`, :func:`arctan`, ...) yields the
exact Taylor coefficients of the composite function, so every derivative in
the library is exact to rounding.

Coefficients may carry trailing batch axes, which lets one jet evaluation
cover a whole grid of base points.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

FD_DEFAULT_STEPS = {1: 1e-5, 2: 1e-4, 3: 5e-3}
FD_TRUNCATION_ORDER = 2


class TaylorAlgebra:
    """Truncated polynomial algebra over grouped variables.

    Parameters
    ----------
    groups : tuple of (int, int)
        ``(number of variables, maximal degree)`` for each variable group.
    total : int
        Maximal total degree of a monomial.
    """

    def __init__(self, groups, total):
        self.groups = tuple((int(nv), int(deg)) for nv, deg in groups)
        self.total = int(total)
        self.nvars = sum(nv for nv, _ in self.groups)
        offsets = np.cumsum([0] + [nv for nv, _ in self.groups])
        self.group_vars = tuple(
            tuple(range(offsets[k], offsets[k + 1])) for k in range(len(self.groups))
        )

        per_group = []
        for nv, deg in self.groups:
            cap = min(deg, self.total)
            per_group.append(
                [e for e in itertools.product(range(cap + 1), repeat=nv) if sum(e) <= cap]
            )
        monos = [
            sum(parts, ())
            for parts in itertools.product(*per_group)
            if sum(map(sum, parts)) <= self.total
        ]
        # zero monomial first, then by degree; reversed tuple order puts e_0 before e_1
        monos.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
        self.exponents = np.array(monos, dtype=np.int64).reshape(len(monos), self.nvars)
        self.size = len(monos)
        self.index = {m: k for k, m in enumerate(monos)}
        self.factorials = np.array(
            [math.prod(math.factorial(v) for v in m) for m in monos], dtype=float
        )
        self._build_products()
        self._partials = {}

    def _key(self, exps):
        base = self.total + 1
        weights = base ** np.arange(self.nvars, dtype=np.int64)
        return exps @ weights

    def _valid(self, exps):
        ok = exps.sum(axis=-1) <= self.total
        for vars_, (_, deg) in zip(self.group_vars, self.groups):
            if vars_:
                ok &= exps[..., list(vars_)].sum(axis=-1) <= deg
        return ok

    def _build_products(self):
        E = self.exponents
        deg = E.sum(axis=1)
        I, J = np.nonzero(deg[:, None] + deg[None, :] <= self.total)
        S = E[I] + E[J]
        ok = self._valid(S)
        I, J, S = I[ok], J[ok], S[ok]
        keys = self._key(S)
        own = self._key(E)
        order = np.argsort(own)
        K = order[np.searchsorted(own[order], keys)]
        perm = np.argsort(K, kind="stable")
        self._I, self._J, K = I[perm], J[perm], K[perm]
        self._starts = np.flatnonzero(np.r_[True, K[1:] != K[:-1]])
        if len(self._starts) != self.size:
            raise AssertionError("product table does not cover every monomial")

    def multiply(self, a, b):
        a, b = _align(a, b)
        return np.add.reduceat(a[self._I] * b[self._J], self._starts, axis=0)

    def partial_map(self, var):
        """Index maps realising d/d(var) on coefficient arrays."""
        if var not in self._partials:
            src, dst, fac = [], [], []
            for k, m in enumerate(map(tuple, self.exponents)):
                up = list(m)
                up[var] += 1
                j = self.index.get(tuple(up))
                if j is not None:
                    src.append(j)
                    dst.append(k)
                    fac.append(up[var])
            self._partials[var] = (np.array(src, int), np.array(dst, int), np.array(fac, float))
        return self._partials[var]

    def constant(self, value):
        value = np.asarray(value, dtype=float)
        c = np.zeros((self.size,) + value.shape)
        c[0] = value
        return Jet(self, c)

    def variable(self, var, value):
        """The jet of ``value + t_var``."""
        jet = self.constant(value)
        e = [0] * self.nvars
        e[var] = 1
        jet.coeffs[self.index[tuple(e)]] = 1.0
        return jet

    def __repr__(self):
        return f"TaylorAlgebra(groups={self.groups}, total={self.total}, size={self.size})"


@lru_cache(maxsize=None)
def algebra(groups, total):
    """Cached :class:`TaylorAlgebra` constructor."""
    return TaylorAlgebra(groups, total)


def _align(a, b):
    """Pad coefficient arrays so their batch axes broadcast."""
    if a.ndim < b.ndim:
        a = a.reshape(a.shape + (1,) * (b.ndim - a.ndim))
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape + (1,) * (a.ndim - b.ndim))
    return a, b


def _series_power(a, p, N):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0.0) and not (float(p).is_integer() and p >= 0):
        raise DomainError(f"power {p} expanded at a non-positive base")
    out = np.empty((N + 1,) + a.shape)
    coef = 1.0
    for k in range(N + 1):
        out[k] = coef * a ** (p - k)
        coef *= (p - k) / (k + 1)
    return out


def _series_exp(a, N):
    e = np.exp(np.asarray(a, dtype=float))
    return np.stack([e / math.factorial(k) for k in range(N + 1)])


def _series_log(a, N):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0.0):
        raise DomainError("log expanded at a non-positive base")
    out = [np.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, N + 1)]
    return np.stack(out)


def _series_arctan(a, N):
    # arctan' = 1/(1+t^2); invert the quadratic series, then integrate
    a = np.asarray(a, dtype=float)
    q = [1.0 + a * a, 2.0 * a, np.ones_like(a)]
    inv = [1.0 / q[0]]
    for k in range(1, N):
        acc = sum(q[j] * inv[k - j] for j in (1, 2) if j <= k)
        inv.append(-acc / q[0])
    out = [np.arctan(a)] + [inv[k - 1] / k for k in range(1, N + 1)]
    return np.stack([np.broadcast_to(c, a.shape) for c in out])


def _series_sin(a, N, phase=0.0):
    a = np.asarray(a, dtype=float)
    return np.stack(
        [np.sin(a + phase + k * math.pi / 2) / math.factorial(k) for k in range(N + 1)]
    )


class Jet:
    """Truncated Taylor expansion of a scalar around a base point."""

    __slots__ = ("algebra", "coeffs")
    __array_ufunc__ = None

    def __init__(self, alg, coeffs):
        self.algebra = alg
        self.coeffs = coeffs

    @property
    def value(self):
        return self.coeffs[0]

    @property
    def batch_shape(self):
        return self.coeffs.shape[1:]

    def _lift(self, other):
        if isinstance(other, Jet):
            if other.algebra is not self.algebra:
                raise ValueError("jets from different algebras cannot be combined")
            return other
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is not None:
            a, b = _align(self.coeffs, o.coeffs)
            return Jet(self.algebra, a + b)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.batch_shape, other.shape)
        c = np.array(np.broadcast_to(self.coeffs, (self.algebra.size,) + shape))
        c[0] += other
        return Jet(self.algebra, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.algebra, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        if o is not None:
            return Jet(self.algebra, self.algebra.multiply(self.coeffs, o.coeffs))
        return Jet(self.algebra, self.coeffs * np.asarray(other, dtype=float))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is not None:
            return self * o.reciprocal()
        return Jet(self.algebra, self.coeffs / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = self.algebra.constant(np.ones(self.batch_shape))
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base
                p >>= 1
            return out
        return self.compose(_series_power(self.value, float(p), self.algebra.total))

    def reciprocal(self):
        if np.any(self.value == 0.0):
            raise DomainError("reciprocal of a jet with zero value")
        v = self.value
        N = self.algebra.total
        series = np.stack([(-1.0) ** k / v ** (k + 1) for k in range(N + 1)])
        return self.compose(series)

    def compose(self, series):
        """Evaluate ``sum_k series[k] * (self - value)**k`` by Horner's rule."""
        u = self.coeffs.copy()
        u[0] = 0.0
        shape = np.broadcast_shapes(self.batch_shape, series.shape[1:])
        u = np.broadcast_to(u, (self.algebra.size,) + shape)
        acc = np.zeros((self.algebra.size,) + shape)
        acc[0] = series[-1]
        for k in range(len(series) - 2, -1, -1):
            acc = self.algebra.multiply(acc, u)
            acc[0] += series[k]
        return Jet(self.algebra, acc)

    def partial(self, var):
        """Jet of the partial derivative with respect to variable ``var``.

        The result is exact only up to one degree less than the input.
        """
        src, dst, fac = self.algebra.partial_map(var)
        c = np.zeros_like(self.coeffs)
        c[dst] = self.coeffs[src] * fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(self.algebra, c)

    def coefficient(self, exponent):
        return self.coeffs[self.algebra.index[tuple(exponent)]]

    def derivative(self, exponent):
        k = self.algebra.index[tuple(exponent)]
        return self.coeffs[k] * self.algebra.factorials[k]

    def derivative_tensor(self, variables, order):
        """Dense symmetric array of all ``order``-th partials in ``variables``."""
        idx, fac = _tensor_map(self.algebra, tuple(variables), order)
        flat = self.coeffs[idx] * fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return flat.reshape((len(variables),) * order + self.batch_shape)

    def project(self, target, var_map):
        """Restrict to a smaller algebra, setting unmapped variables to zero.

        ``var_map[k]`` is the index in this algebra of target variable ``k``.
        Monomials of the target are looked up in the source; callers must
        make sure the requested degrees are valid in the source.
        """
        idx = _projection_map(self.algebra, target, tuple(var_map))
        return Jet(target, self.coeffs[idx])

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Jet(value={self.value!r}, size={self.algebra.size})"


@lru_cache(maxsize=None)
def _tensor_map(alg, variables, order):
    idx, fac = [], []
    for combo in itertools.product(range(len(variables)), repeat=order):
        e = [0] * alg.nvars
        for c in combo:
            e[variables[c]] += 1
        k = alg.index[tuple(e)]
        idx.append(k)
        fac.append(alg.factorials[k])
    return np.array(idx, int), np.array(fac)


@lru_cache(maxsize=None)
def _projection_map(source, target, var_map):
    idx = []
    for m in map(tuple, target.exponents):
        e = [0] * source.nvars
        for k, v in enumerate(m):
            e[var_map[k]] += v
        idx.append(source.index[tuple(e)])
    return np.array(idx, int)


def _unary(x, series_fn, float_fn, *args):
    if isinstance(x, Jet):
        return x.compose(series_fn(x.value, *args, x.algebra.total))
    return float_fn(x)


def sqrt(x):
    if isinstance(x, Jet):
        return x.compose(_series_power(x.value, 0.5, x.algebra.total))
    return np.sqrt(x)


def exp(x):
    return _unary(x, _series_exp, np.exp)


def log(x):
    return _unary(x, _series_log, np.log)


def arctan(x):
    return _unary(x, _series_arctan, np.arctan)


def arctan2(y, x):
    """Two-argument arctangent; jets are supported for ``x > 0``."""
    if isinstance(y, Jet) or isinstance(x, Jet):
        xv = x.value if isinstance(x, Jet) else np.asarray(x)
        if np.any(xv <= 0.0):
            raise DomainError("jet arctan2 requires a positive second argument")
        return arctan(y / x)
    return np.arctan2(y, x)


def sin(x):
    if isinstance(x, Jet):
        return x.compose(_series_sin(x.value, x.algebra.total))
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return x.compose(_series_sin(x.value, x.algebra.total, math.pi / 2))
    return np.cos(x)


def value_of(x):
    """Numeric value of a jet or a plain number."""
    return x.value if isinstance(x, Jet) else x


@dataclass(frozen=True)
class LiftedJet:
    """Taylor data of a scalar field of ``(x, y)`` at one base point.

    The first ``n`` algebra variables perturb ``x`` and the next ``n`` perturb
    ``y``.
    """

    x: np.ndarray
    y: np.ndarray
    jet: Jet

    @property
    def dim(self):
        return len(self.y)

    @property
    def value(self):
        return self.jet.value

    def _xvars(self):
        return tuple(range(self.dim))

    def _yvars(self):
        return tuple(range(self.dim, 2 * self.dim))

    def y_tensor(self, order):
        """All ``order``-th partials in ``y``."""
        if order == 0:
            return self.jet.value
        return self.jet.derivative_tensor(self._yvars(), order)

    def xy_tensor(self, order):
        """Array ``[k, i1, ..., i_order]`` of d/dx^k d^order/dy^i1...dy^i_order."""
        out = []
        for k in self._xvars():
            d = self.jet.partial(k)
            out.append(d.value if order == 0 else d.derivative_tensor(self._yvars(), order))
        return np.stack(out)


def jet_lift(f: Callable, at: tuple, orders=(1, 3), total=None) -> LiftedJet:
    """Lift ``f(x, y)`` to its Taylor jet at ``at = (x, y)``.

    ``f`` receives two lists of jets (base coordinates and direction
    coordinates) and must be composed from arithmetic and the primitives of
    this module.  ``orders = (kx, ky)`` bounds the degree in each block;
    ``total`` bounds the total degree and defaults to ``kx + ky``.  Batch axes
    of ``x``/``y`` beyond the first are carried through.
    """
    x, y = (np.asarray(v, dtype=float) for v in at)
    n = len(y)
    kx, ky = orders
    if kx < 0 or ky < 0:
        raise ValueError("orders must be non-negative")
    total = kx + ky if total is None else total
    alg = algebra(((n, kx), (n, ky)), total)
    if kx > 0:
        xs = [alg.variable(i, x[i]) for i in range(n)]
    else:
        xs = [x[i] for i in range(n)]
    ys = [alg.variable(n + i, y[i]) if ky > 0 else y[i] for i in range(n)]
    out = f(xs, ys)
    if not isinstance(out, Jet):
        batch = np.broadcast_shapes(*(np.shape(v) for v in y))
        out = alg.constant(np.broadcast_to(np.asarray(out, dtype=float), batch))
    return LiftedJet(x, y, out)


def fd_derivative(f: Callable, at, direction, order: int, step: float | None = None) -> float:
    """Central finite-difference estimate of a directional derivative.

    ``f`` maps a point (ndarray) to a float.  All stencils have truncation
    error of order ``step**2``.  Intended only as an independent cross-check.
    """
    if order not in FD_DEFAULT_STEPS:
        raise ValueError("order must be 1, 2 or 3")
    h = FD_DEFAULT_STEPS[order] if step is None else float(step)
    if h <= 0:
        raise ValueError("step must be positive")
    p = np.asarray(at, dtype=float)
    d = np.asarray(direction, dtype=float)

    def F(t):
        return float(f(p + t * h * d))

    if order == 1:
        return (F(1) - F(-1)) / (2 * h)
    if order == 2:
        return (F(1) - 2 * F(0) + F(-1)) / h**2
    return (F(2) - 2 * F(1) + 2 * F(-1) - F(-2)) / (2 * h**3)


def fd_mixed(f: Callable, at, u, v, step: float = 1e-4) -> float:
    """Central estimate of the mixed second derivative along ``u`` and ``v``."""
    p = np.asarray(at, dtype=float)
    u = np.asarray(u, dtype=float) * step
    v = np.asarray(v, dtype=float) * step
    return (f(p + u + v) - f(p + u - v) - f(p - u + v) + f(p - u - v)) / (4 * step**2)


def fd_hessian(f: Callable, at, step: float = 1e-4) -> np.ndarray:
    """Dense finite-difference Hessian assembled from :func:`fd_mixed`."""
    n = len(at)
    eye = np.eye(n)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = fd_mixed(f, at, eye[i], eye[j], step)
    return H


def as_vector(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or (n is not None and len(v) != n):
        raise ValueError(f"expected a vector of length {n}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def check_symmetric(M, tol: float = 1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(M - M.T), initial=0.0) > tol * max(1.0, np.max(np.abs(M))):
        raise ValueError("matrix is not symmetric")
    return M


def solve_jets(matrix: Sequence[Sequence], rhs: Sequence) -> list:
    """Gaussian elimination with partial pivoting on jet-valued systems."""
    n = len(rhs)
    A = [list(row) for row in matrix]
    b = list(rhs)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: float(np.max(np.abs(value_of(A[r][col])))))
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        inv = 1.0 / A[col][col]
        for r in range(col + 1, n):
            f = A[r][col] * inv
            for c in range(col + 1, n):
                A[r][c] = A[r][c] - f * A[col][c]
            b[r] = b[r] - f * b[col]
    out = [None] * n
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc = acc - A[r][c] * out[c]
        out[r] = acc / A[r][r]
    return out
