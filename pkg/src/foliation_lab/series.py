"""Truncated power series over complex float64.

Bivariate series are dense triangular arrays ``c[i, j]`` (coefficient of
``x**i * y**j``) with ``i + j <= order``; univariate series are vectors of
length ``order + 1``. Values are immutable. Every statement about them is
"up to truncation order, within ``eps``".
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels

EPS_ZERO = 1e-10


class SeriesError(ValueError):
    pass


class OrderMismatch(SeriesError):
    pass


class NotAUnit(SeriesError):
    pass


class DegenerateJet(SeriesError):
    pass


def _triangle_mask(order):
    i, j = np.indices((order + 1, order + 1))
    return i + j <= order


def _frozen(arr):
    arr.setflags(write=False)
    return arr


class TruncSeries2:
    """Element of C[[x, y]] modulo (x, y)**(order + 1)."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order=None):
        c = np.array(coeffs, dtype=complex, ndmin=2)
        if order is None:
            order = max(c.shape) - 1
        if order < 0:
            raise SeriesError("order must be non-negative")
        out = np.zeros((order + 1, order + 1), dtype=complex)
        ni, nj = min(c.shape[0], order + 1), min(c.shape[1], order + 1)
        out[:ni, :nj] = c[:ni, :nj]
        out[~_triangle_mask(order)] = 0.0
        if not np.all(np.isfinite(out)):
            raise SeriesError("non-finite coefficient")
        self.coeffs = _frozen(out)
        self.order = order

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, order):
        return cls(np.zeros((1, 1)), order)

    @classmethod
    def constant(cls, value, order):
        return cls(np.array([[value]]), order)

    @classmethod
    def one(cls, order):
        return cls.constant(1.0, order)

    @classmethod
    def x(cls, order):
        return cls.from_dict({(1, 0): 1.0}, order)

    @classmethod
    def y(cls, order):
        return cls.from_dict({(0, 1): 1.0}, order)

    @classmethod
    def from_dict(cls, terms, order):
        c = np.zeros((order + 1, order + 1), dtype=complex)
        for (i, j), v in terms.items():
            if i + j <= order:
                c[i, j] += v
        return cls(c, order)

    def to_dict(self, eps=0.0):
        idx = np.argwhere(np.abs(self.coeffs) > eps)
        return {(int(i), int(j)): complex(self.coeffs[i, j]) for i, j in idx}

    # structure ----------------------------------------------------------
    def __getitem__(self, ij):
        i, j = ij
        if i < 0 or j < 0 or i + j > self.order:
            return 0j
        return complex(self.coeffs[i, j])

    def _check(self, other):
        if not isinstance(other, TruncSeries2):
            return TruncSeries2.constant(other, self.order)
        if other.order != self.order:
            raise OrderMismatch(f"orders {self.order} and {other.order} differ")
        return other

    def truncate(self, order):
        return TruncSeries2(self.coeffs, order)

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs)))

    def valuation(self, eps=EPS_ZERO):
        """Smallest total degree with a coefficient above ``eps``; inf if none."""
        idx = np.argwhere(np.abs(self.coeffs) > eps)
        if idx.size == 0:
            return math.inf
        return int(idx.sum(axis=1).min())

    def degree(self, eps=0.0):
        idx = np.argwhere(np.abs(self.coeffs) > eps)
        if idx.size == 0:
            return -1
        return int(idx.sum(axis=1).max())

    def homogeneous(self, k):
        """Degree-k part as a vector indexed by the power of y."""
        return np.array([self[k - j, j] for j in range(k + 1)])

    def is_zero(self, eps=EPS_ZERO):
        return self.valuation(eps) == math.inf

    # ring operations ----------------------------------------------------
    def __add__(self, other):
        other = self._check(other)
        return TruncSeries2(self.coeffs + other.coeffs, self.order)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries2(-self.coeffs, self.order)

    def __sub__(self, other):
        other = self._check(other)
        return TruncSeries2(self.coeffs - other.coeffs, self.order)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncSeries2):
            return self.scale(other)
        other = self._check(other)
        return TruncSeries2(kernels.mul2(self.coeffs, other.coeffs, self.order), self.order)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, s):
        return TruncSeries2(self.coeffs * complex(s), self.order)

    def __pow__(self, n):
        result = TruncSeries2.one(self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def mul_monomial(self, i, j):
        c = np.zeros_like(self.coeffs)
        n = self.order + 1
        if i < n and j < n:
            c[i:, j:] = self.coeffs[: n - i, : n - j]
        return TruncSeries2(c, self.order)

    def diff_x(self):
        n = self.order + 1
        c = np.zeros((n, n), dtype=complex)
        c[:-1, :] = self.coeffs[1:, :] * np.arange(1, n)[:, None]
        return TruncSeries2(c, self.order)

    def diff_y(self):
        n = self.order + 1
        c = np.zeros((n, n), dtype=complex)
        c[:, :-1] = self.coeffs[:, 1:] * np.arange(1, n)[None, :]
        return TruncSeries2(c, self.order)

    def __call__(self, x, y):
        return kernels.polyval2(self.coeffs, x, y)

    def allclose(self, other, tol=1e-12):
        other = self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= tol)

    def restrict_x0(self):
        """Univariate series s(0, y)."""
        return TruncSeries1(self.coeffs[0, :], self.order)

    def restrict_y0(self):
        return TruncSeries1(self.coeffs[:, 0], self.order)

    def __repr__(self):
        terms = ", ".join(f"x^{i}y^{j}: {v:.6g}" for (i, j), v in sorted(self.to_dict(1e-15).items()))
        return f"TruncSeries2(order={self.order}, {{{terms}}})"


def invert_unit(s, eps=EPS_ZERO):
    """Multiplicative inverse of a unit (nonzero constant term)."""
    c0 = s[0, 0]
    if abs(c0) <= eps:
        raise NotAUnit(f"constant term {abs(c0):.3g} below threshold")
    # 1/s = (1/c0) * sum (-t)^k with t = s/c0 - 1 of positive valuation
    t = s.scale(1.0 / c0) - 1.0
    result = TruncSeries2.one(s.order)
    for _ in range(s.order):
        result = 1.0 - t * result
    return result.scale(1.0 / c0)


def compose2(s, u, v, eps=EPS_ZERO):
    """s(u(x, y), v(x, y)) truncated at the common order."""
    if abs(u[0, 0]) > eps or abs(v[0, 0]) > eps:
        raise SeriesError("substituted series must have zero constant term")
    order = u.order
    if v.order != order:
        raise OrderMismatch("u and v orders differ")
    # Horner in x over rows, each row a polynomial in v
    deg = min(s.order, order)
    result = TruncSeries2.zero(order)
    for i in range(deg, -1, -1):
        row = TruncSeries2.zero(order)
        for j in range(deg - i, -1, -1):
            row = row * v + s[i, j]
        result = result * u + row
    return result


def divide_with_remainder(s, q, eps=EPS_ZERO):
    """Truncated division: ``(u, val)`` with ``u`` minimizing s - u q.

    ``val`` is the valuation of ``s - u*q``; divisibility holds up to
    truncation iff ``val > order``.
    """
    q = s._check(q)
    vq = q.valuation(eps)
    if vq == math.inf:
        raise SeriesError("division by the zero series")
    order = s.order
    mask = _triangle_mask(order)
    qorder = order - vq
    monomials = [(i, k - i) for k in range(qorder + 1) for i in range(k, -1, -1)]
    columns = [q.mul_monomial(i, j).coeffs[mask] for i, j in monomials]
    A = np.stack(columns, axis=1)
    b = s.coeffs[mask]
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    u = TruncSeries2.from_dict(dict(zip(monomials, sol)), order)
    r = s - u * q
    scale = max(1.0, s.max_abs())
    return u, r.valuation(eps * scale)


class TruncSeries1:
    """Element of C[[z]] modulo z**(order + 1)."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order=None):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if order is None:
            order = c.size - 1
        out = np.zeros(order + 1, dtype=complex)
        n = min(c.size, order + 1)
        out[:n] = c[:n]
        if not np.all(np.isfinite(out)):
            raise SeriesError("non-finite coefficient")
        self.coeffs = _frozen(out)
        self.order = order

    @classmethod
    def identity(cls, order):
        return cls([0.0, 1.0], order)

    def __getitem__(self, k):
        return complex(self.coeffs[k]) if 0 <= k <= self.order else 0j

    def _check(self, other):
        if not isinstance(other, TruncSeries1):
            return TruncSeries1([other], self.order)
        if other.order != self.order:
            raise OrderMismatch(f"orders {self.order} and {other.order} differ")
        return other

    def truncate(self, order):
        return TruncSeries1(self.coeffs, order)

    def __add__(self, other):
        other = self._check(other)
        return TruncSeries1(self.coeffs + other.coeffs, self.order)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries1(-self.coeffs, self.order)

    def __sub__(self, other):
        other = self._check(other)
        return TruncSeries1(self.coeffs - other.coeffs, self.order)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncSeries1):
            return TruncSeries1(self.coeffs * complex(other), self.order)
        other = self._check(other)
        return TruncSeries1(np.convolve(self.coeffs, other.coeffs)[: self.order + 1], self.order)

    __rmul__ = __mul__

    def valuation(self, eps=EPS_ZERO):
        idx = np.flatnonzero(np.abs(self.coeffs) > eps)
        return int(idx[0]) if idx.size else math.inf

    def derivative(self):
        return TruncSeries1(self.coeffs[1:] * np.arange(1, self.order + 1), self.order)

    def compose(self, g):
        """self(g(z)); ``g`` must have zero constant term."""
        g = self._check(g)
        if abs(g[0]) > EPS_ZERO:
            raise SeriesError("inner series must have zero constant term")
        result = TruncSeries1([self.coeffs[-1]], self.order)
        for a in self.coeffs[-2::-1]:
            result = result * g + a
        return result

    def __call__(self, z):
        return np.polyval(self.coeffs[::-1], np.asarray(z, dtype=complex))

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs)))

    def allclose(self, other, tol=1e-12):
        other = self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= tol)

    def __repr__(self):
        return f"TruncSeries1(order={self.order}, {np.array2string(self.coeffs, precision=6)})"


class JetDiffeo:
    """Germ of a diffeomorphism of (C, 0) as a truncated series."""

    __slots__ = ("series",)

    def __init__(self, series, eps=EPS_ZERO):
        if not isinstance(series, TruncSeries1):
            series = TruncSeries1(series)
        if abs(series[0]) > eps:
            raise DegenerateJet(f"constant term {abs(series[0]):.3g} is not zero")
        if abs(series[1]) <= eps:
            raise DegenerateJet("linear coefficient vanishes")
        c = np.array(series.coeffs)
        c[0] = 0.0
        self.series = TruncSeries1(c, series.order)

    @classmethod
    def identity(cls, order):
        return cls(TruncSeries1.identity(order))

    @classmethod
    def linear(cls, mu, order):
        return cls(TruncSeries1([0.0, mu], order))

    @property
    def order(self):
        return self.series.order

    @property
    def coeffs(self):
        return self.series.coeffs

    @property
    def multiplier(self):
        return self.series[1]

    def __getitem__(self, k):
        return self.series[k]

    def __call__(self, z):
        return self.series(z)

    def compose(self, other):
        """self o other."""
        return JetDiffeo(self.series.compose(other.series))

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self):
        return inverse1(self)

    def conjugate_by(self, phi):
        """phi o self o phi^-1 (push-forward by phi)."""
        return phi.compose(self).compose(phi.inverse())

    def iterate(self, k):
        result = JetDiffeo.identity(self.order)
        for _ in range(k):
            result = self.compose(result)
        return result

    def truncate(self, order):
        return JetDiffeo(self.series.truncate(order))

    def deviation(self, other):
        return float(np.max(np.abs(self.coeffs - other.coeffs)))

    def __repr__(self):
        return f"JetDiffeo({np.array2string(self.coeffs, precision=6)})"


def compose1(f, g):
    return f.compose(g)


def inverse1(f):
    """Compositional inverse, solved order by order from f(g(z)) = z."""
    a1 = f.multiplier
    order = f.order
    g = np.zeros(order + 1, dtype=complex)
    g[1] = 1.0 / a1
    for k in range(2, order + 1):
        fg = f.series.compose(TruncSeries1(g, order))
        g[k] -= fg[k] / a1
    return JetDiffeo(TruncSeries1(g, order))
