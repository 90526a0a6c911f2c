"""Point blow-ups of polynomial 1-forms in two standard charts.

A chart carries local coordinates ``(u, v)`` in which the newest exceptional
component is ``{u = 0}``. In the x-chart ``(u, v) = (x, t)`` with ``y = x t``;
in the y-chart ``(u, v) = (y, s)`` with ``x = s y`` (coordinates swapped so
that the divisor is always the first axis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .series import EPS_ZERO, TruncSeries2


class BlowupError(ValueError):
    pass


class RootFindingError(BlowupError):
    pass


def _trim(arr, rel=1e-15):
    """Coefficient array -> TruncSeries2 of its actual total degree."""
    arr = np.asarray(arr, dtype=complex)
    scale = np.max(np.abs(arr)) if arr.size else 0.0
    arr = np.where(np.abs(arr) <= rel * scale, 0.0, arr)
    idx = np.argwhere(arr != 0)
    deg = int(idx.sum(axis=1).max()) if idx.size else 0
    return TruncSeries2(arr, max(deg, 1))


def _pad(arr, order):
    out = np.zeros((order + 1, order + 1), dtype=complex)
    n0, n1 = min(arr.shape[0], order + 1), min(arr.shape[1], order + 1)
    out[:n0, :n1] = arr[:n0, :n1]
    return out


def shift_poly(c, dx=0.0, dy=0.0):
    """Coefficients of p(x + dx, y + dy) for the polynomial with coefficients c."""
    c = np.asarray(c, dtype=complex)
    n0, n1 = c.shape
    if dx != 0:
        i = np.arange(n0)
        M = comb(i[None, :], i[:, None]) * np.power(complex(dx), np.maximum(i[None, :] - i[:, None], 0))
        M = np.triu(M)
        c = M @ c
    if dy != 0:
        j = np.arange(n1)
        M = comb(j[None, :], j[:, None]) * np.power(complex(dy), np.maximum(j[None, :] - j[:, None], 0))
        M = np.triu(M)
        c = c @ M.T
    return c


class OneForm:
    """omega = a dx + b dy with polynomial (or truncated) coefficients."""

    __slots__ = ("a", "b", "is_polynomial")

    def __init__(self, a, b, is_polynomial=True):
        if not isinstance(a, TruncSeries2):
            a = TruncSeries2(a)
        if not isinstance(b, TruncSeries2):
            b = TruncSeries2(b)
        order = max(a.order, b.order)
        self.a = a.truncate(order) if a.order != order else a
        self.b = b.truncate(order) if b.order != order else b
        self.is_polynomial = is_polynomial
        if self.a.max_abs() == 0 and self.b.max_abs() == 0:
            raise BlowupError("the zero 1-form defines no foliation")

    @classmethod
    def from_dicts(cls, a, b, is_polynomial=True):
        deg = max([i + j for i, j in list(a) + list(b)] + [1])
        return cls(TruncSeries2.from_dict(a, deg), TruncSeries2.from_dict(b, deg), is_polynomial)

    @classmethod
    def exact(cls, f):
        """The differential df of a polynomial f (TruncSeries2)."""
        return cls(f.diff_x(), f.diff_y())

    @property
    def order(self):
        return self.a.order

    def truncate(self, order):
        return OneForm(self.a.truncate(order), self.b.truncate(order), False)

    def scale(self, s):
        return OneForm(self.a.scale(s), self.b.scale(s), self.is_polynomial)

    def __add__(self, other):
        order = max(self.order, other.order)
        return OneForm(self.a.truncate(order) + other.a.truncate(order),
                       self.b.truncate(order) + other.b.truncate(order),
                       self.is_polynomial and other.is_polynomial)

    def max_abs(self):
        return max(self.a.max_abs(), self.b.max_abs())

    def valuation(self, eps=EPS_ZERO):
        """Common valuation of (a, b) with threshold relative to the size of omega."""
        tol = eps * max(1.0, self.max_abs())
        return min(self.a.valuation(tol), self.b.valuation(tol))

    def __call__(self, x, y):
        return self.a(x, y), self.b(x, y)

    def vector_field(self):
        """(P, Q) with P d/dx + Q d/dy spanning the kernel: (b, -a)."""
        return self.b, -self.a

    def linear_part(self):
        """Jacobian at 0 of the kernel field b d/dx - a d/dy."""
        b, a = self.b, self.a
        return np.array([[b[1, 0], b[0, 1]], [-a[1, 0], -a[0, 1]]], dtype=complex)

    def translate(self, point):
        """The form in coordinates centred at ``point``."""
        p0, p1 = complex(point[0]), complex(point[1])
        return OneForm(_trim(shift_poly(self.a.coeffs, p0, p1)),
                       _trim(shift_poly(self.b.coeffs, p0, p1)), self.is_polynomial)

    def pullback(self, phi):
        """Phi^* omega for a jet map ``phi = (phi1, phi2)`` of TruncSeries2 with matching orders."""
        from .series import compose2
        p1, p2 = phi
        order = p1.order
        a, b = self.a.truncate(order), self.b.truncate(order)
        ap, bp = compose2(a, p1, p2), compose2(b, p1, p2)
        return OneForm(ap * p1.diff_x() + bp * p2.diff_x(),
                       ap * p1.diff_y() + bp * p2.diff_y(), False)

    def allclose(self, other, tol=1e-12):
        order = max(self.order, other.order)
        return (self.a.truncate(order).allclose(other.a.truncate(order), tol)
                and self.b.truncate(order).allclose(other.b.truncate(order), tol))

    def __repr__(self):
        return f"OneForm(a={self.a!r}, b={self.b!r})"


@dataclass(frozen=True)
class Chart:
    """Substitution history from base coordinates to the local chart."""

    history: tuple = ()

    def then(self, step):
        return Chart(self.history + (step,))

    @property
    def depth(self):
        return sum(1 for kind, _ in self.history if kind != "translate")

    @property
    def id(self):
        parts = []
        for kind, data in self.history:
            if kind == "translate":
                if data != (0, 0):
                    parts.append(f"@({_fmt(data[0])},{_fmt(data[1])})")
            else:
                parts.append(kind[0])
        return "/".join(parts) or "base"

    def to_base(self, u, v):
        """Map local coordinates back to base coordinates."""
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        for kind, data in reversed(self.history):
            if kind == "translate":
                u, v = u + data[0], v + data[1]
            elif kind == "x":
                u, v = u, u * v
            else:
                u, v = v * u, u
        return u, v


def _fmt(z):
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


@dataclass
class DivisorPoint:
    """A distinguished point of the new component in chart coordinates (0, v)."""

    v: complex
    multiplicity: int
    residual: float
    exact: bool


@dataclass
class PulledBackForm:
    chart: Chart
    total: OneForm
    m: int
    strict: OneForm
    input_scale: float = 1.0
    points: list = field(default_factory=list)

    def restricted(self):
        """(A(0, v), B(0, v)) as coefficient vectors in v."""
        return self.strict.a.coeffs[0, :].copy(), self.strict.b.coeffs[0, :].copy()


def pullback_x_chart(c):
    """c(x, x t) as an array indexed [x power, t power]."""
    n = c.shape[0]
    out = np.zeros((2 * n - 1, n), dtype=complex)
    for i in range(n):
        for j in range(n - i):
            out[i + j, j] += c[i, j]
    return out


def pullback_y_chart(c):
    """c(s y, y) as an array indexed [y power, s power]."""
    n = c.shape[0]
    out = np.zeros((2 * n - 1, n), dtype=complex)
    for i in range(n):
        for j in range(n - i):
            out[i + j, i] += c[i, j]
    return out


def _mul_first(arr):
    out = np.zeros((arr.shape[0] + 1, arr.shape[1]), dtype=complex)
    out[1:] = arr
    return out


def _mul_second(arr):
    out = np.zeros((arr.shape[0], arr.shape[1] + 1), dtype=complex)
    out[:, 1:] = arr
    return out


def _add(p, q):
    shape = (max(p.shape[0], q.shape[0]), max(p.shape[1], q.shape[1]))
    out = np.zeros(shape, dtype=complex)
    out[: p.shape[0], : p.shape[1]] += p
    out[: q.shape[0], : q.shape[1]] += q
    return out


def _chart_forms(omega, kind):
    a, b = omega.a.coeffs, omega.b.coeffs
    if kind == "x":
        ap, bp = pullback_x_chart(a), pullback_x_chart(b)
        # dy = t dx + x dt
        A = _add(ap, _mul_second(bp))
        B = _mul_first(bp)
    else:
        ap, bp = pullback_y_chart(a), pullback_y_chart(b)
        # dx = s dy + y ds
        A = _add(_mul_second(ap), bp)
        B = _mul_first(ap)
    return A, B


def _first_valuation(arr, tol):
    rows = np.flatnonzero(np.any(np.abs(arr) > tol, axis=1))
    return int(rows[0]) if rows.size else math.inf


def blow_up_point(omega, center=(0, 0), chart=None, eps=EPS_ZERO, check_center=True,
                  find_points=True):
    """Blow up the origin after translating ``center`` there.

    Returns the pulled-back forms in the x-chart and y-chart. The
    multiplicity ``m`` is the exponent of the divisor coordinate that
    divides the total transform, the same in both charts.
    """
    chart = chart or Chart()
    scale = max(1.0, omega.max_abs())
    if center != (0, 0):
        omega = omega.translate(center)
    if check_center:
        a0, b0 = abs(omega.a[0, 0]), abs(omega.b[0, 0])
        if max(a0, b0) > eps * scale:
            raise BlowupError(f"center {center} is not a singular point (|a|={a0:.3g}, |b|={b0:.3g})")
    base = chart.then(("translate", (complex(center[0]), complex(center[1]))))
    tol = eps * scale
    results = []
    forms = {kind: _chart_forms(omega, kind) for kind in ("x", "y")}
    m = min(min(_first_valuation(A, tol), _first_valuation(B, tol)) for A, B in forms.values())
    if m == math.inf:
        raise BlowupError("form vanishes identically")
    for kind in ("x", "y"):
        A, B = forms[kind]
        total = OneForm(_trim(A), _trim(B), omega.is_polynomial)
        strict = OneForm(_trim(A[m:]), _trim(B[m:]), omega.is_polynomial)
        pb = PulledBackForm(base.then((kind, None)), total, m, strict, scale)
        if find_points:
            pb.points = singular_points_on_divisor(pb, eps)
        results.append(pb)
    return results[0], results[1]


def is_divisor_invariant(p, eps=EPS_ZERO):
    """{u = 0} is invariant iff the dv coefficient vanishes identically on it."""
    _, B0 = p.restricted()
    return bool(np.max(np.abs(B0)) <= eps * p.input_scale)


def _stored_here(p, v):
    kind = p.chart.history[-1][0]
    return abs(v) <= 1 + 1e-9 if kind == "x" else abs(v) < 1 - 1e-9


def singular_points_on_divisor(p, eps=EPS_ZERO):
    """Singular points (invariant divisor) or tangency points (dicritical) stored in this chart."""
    A0, B0 = p.restricted()
    tol = eps * p.input_scale
    if is_divisor_invariant(p, eps):
        target = A0
    else:
        target = B0
    roots = polynomial_roots(target, tol)
    out = []
    for v, mult, res, exact in roots:
        if _stored_here(p, v):
            out.append(DivisorPoint(v, mult, res, exact))
    out.sort(key=lambda d: _point_key(d.v))
    return out


def _point_key(v):
    """Ordering by modulus then angle in [0, 2 pi), rounded so that tiny
    perturbations do not reorder points."""
    ang = float(np.angle(v)) % (2 * np.pi)
    if ang > 2 * np.pi - 1e-8:
        ang = 0.0
    return (round(abs(v), 8), round(ang, 8))


def polynomial_roots(coeffs, tol=EPS_ZERO, cluster=1e-5):
    """Roots of sum coeffs[k] v**k with multiplicities.

    Returns a list of ``(root, multiplicity, residual, exact)``. Zero roots are
    split off exactly; the rest come from companion-matrix eigenvalues, with
    clusters merged and polished by Newton on the appropriate derivative.
    """
    c = np.array(coeffs, dtype=complex)
    c[np.abs(c) <= tol] = 0.0
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise RootFindingError("polynomial vanishes identically on the divisor")
    low, high = int(nz[0]), int(nz[-1])
    out = []
    if low > 0:
        out.append((0j, low, 0.0, True))
    core = c[low: high + 1]
    deg = core.size - 1
    if deg == 0:
        return out
    if deg <= 2:
        out.extend(_closed_form_roots(core))
        return out
    raw = np.roots(core[::-1])
    poly = np.polynomial.Polynomial(core)
    groups = []
    for r in raw:
        for g in groups:
            if abs(r - np.mean(g)) < cluster * max(1.0, abs(r)):
                g.append(r)
                break
        else:
            groups.append([r])
    for g in groups:
        k = len(g)
        r = complex(np.mean(g))
        d = poly.deriv(k - 1) if k > 1 else poly
        dd = d.deriv()
        for _ in range(50):
            den = dd(r)
            if den == 0:
                break
            step = d(r) / den
            r -= step
            if abs(step) < 1e-16 * max(1.0, abs(r)):
                break
        res = abs(poly(r)) / max(1.0, np.max(np.abs(core)))
        if not np.isfinite(r) or res > 1e-6:
            raise RootFindingError(f"root near {r} did not converge (residual {res:.3g})")
        out.append((_snap(r), k, float(res), False))
    return out


def _closed_form_roots(core):
    if core.size == 2:
        return [(_snap(-core[0] / core[1]), 1, 0.0, True)]
    c0, c1, c2 = core
    disc = c1 * c1 - 4 * c2 * c0
    if abs(disc) <= 1e-14 * max(abs(c1) ** 2, abs(c2 * c0)):
        return [(_snap(-c1 / (2 * c2)), 2, 0.0, True)]
    sq = np.sqrt(complex(disc))
    # numerically stable pair
    q = -0.5 * (c1 + (sq if (np.conj(c1) * sq).real >= 0 else -sq))
    r1, r2 = q / c2, c0 / q
    return [(_snap(r1), 1, 0.0, True), (_snap(r2), 1, 0.0, True)]


def _snap(z, tol=1e-13):
    z = complex(z)
    re = round(z.real) if abs(z.real - round(z.real)) < tol else z.real
    im = round(z.imag) if abs(z.imag - round(z.imag)) < tol else z.imag
    return complex(re, im)


def chart_transition(x, t):
    """x-chart point (x, t) with t != 0 -> y-chart point (y, s)."""
    return x * t, 1.0 / t


def apply_chart(omega, chart, eps=EPS_ZERO):
    """Replay a chart history on another form (strict transform at each step)."""
    form = omega
    pending = (0j, 0j)
    for kind, data in chart.history:
        if kind == "translate":
            pending = data
            continue
        px, py = blow_up_point(form, pending, eps=eps, check_center=False, find_points=False)
        form = (px if kind == "x" else py).strict
        pending = (0j, 0j)
    if pending != (0j, 0j):
        form = form.translate(pending)
    return form
