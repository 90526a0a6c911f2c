"""Lie-series flows, the fibration pairing and one-variable linearization.

``exp[f]X`` is the map p -> (flow of X for time f(p))(p). On functions it
acts by the adjoint series g -> sum_i f^i/i! X^i(g), which is a ring
homomorphism, so the coordinate images determine the whole map.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .blowup import OneForm
from .config import DEFAULT
from .reduction import NotCoprime, intersection_number, is_rational
from .series import (EPS_ZERO, JetDiffeo, SeriesError, TruncSeries1, TruncSeries2, compose2,
                     divide_with_remainder, invert_unit)


class FlowError(RuntimeError):
    pass


class NonTerminating(FlowError):
    """The adjoint series does not settle at jet scale."""


class ShapeError(FlowError):
    pass


class SmallDivisor(FlowError):
    def __init__(self, j, value):
        super().__init__(f"small divisor at order {j}: |mu^j - mu| = {value:.3g}")
        self.j = j
        self.value = value


class PreconditionError(FlowError):
    pass


@dataclass(frozen=True)
class VectorField:
    """P d/dx + Q d/dy."""

    P: TruncSeries2
    Q: TruncSeries2

    def __post_init__(self):
        if self.P.order != self.Q.order:
            raise SeriesError("component orders differ")
        if self.P.is_zero(0.0) and self.Q.is_zero(0.0):
            raise FlowError("the zero vector field")

    @property
    def order(self):
        return self.P.order

    @classmethod
    def hamiltonian(cls, q):
        """X_q = q_y d/dx - q_x d/dy, tangent to the level sets of q."""
        return cls(q.diff_y(), -q.diff_x())

    @classmethod
    def model(cls, lam, order, A=None):
        """x d/dx - lam y (1 + A) d/dy."""
        x, y = TruncSeries2.x(order), TruncSeries2.y(order)
        one = TruncSeries2.one(order)
        A = TruncSeries2.zero(order) if A is None else A.truncate(order)
        return cls(x, (y * (one + A)).scale(-lam))

    def truncate(self, order):
        return VectorField(self.P.truncate(order), self.Q.truncate(order))

    def __call__(self, g):
        """Derivative X(g)."""
        return self.P * g.diff_x() + self.Q * g.diff_y()

    def shift(self):
        """How much X raises valuation: min(val P, val Q) - 1."""
        v = min(self.P.valuation(0.0), self.Q.valuation(0.0))
        return v - 1


@dataclass(frozen=True)
class JetMap2:
    """Germ of a map (C^2, 0) -> (C^2, 0) as a pair of truncated series."""

    phi1: TruncSeries2
    phi2: TruncSeries2

    def __post_init__(self):
        if abs(self.phi1[0, 0]) > EPS_ZERO or abs(self.phi2[0, 0]) > EPS_ZERO:
            raise SeriesError("jet map must fix the origin")
        if abs(self.jacobian_det()) <= EPS_ZERO:
            raise SeriesError("jet map has a singular linear part")

    @classmethod
    def identity(cls, order):
        return cls(TruncSeries2.x(order), TruncSeries2.y(order))

    @property
    def order(self):
        return self.phi1.order

    def jacobian_det(self):
        return complex(self.phi1[1, 0] * self.phi2[0, 1] - self.phi1[0, 1] * self.phi2[1, 0])

    def pullback(self, g):
        """g o Phi."""
        return compose2(g.truncate(self.order), self.phi1, self.phi2)

    def compose(self, other):
        """self o other."""
        return JetMap2(other.pullback(self.phi1), other.pullback(self.phi2))

    __matmul__ = compose

    def inverse(self):
        """Order-by-order inverse: fixed point of psi = L^-1 (id - N(psi))."""
        order = self.order
        a, b = self.phi1[1, 0], self.phi1[0, 1]
        c, d = self.phi2[1, 0], self.phi2[0, 1]
        det = a * d - b * c
        inv = np.array([[d, -b], [-c, a]]) / det
        x, y = TruncSeries2.x(order), TruncSeries2.y(order)
        n1 = self.phi1 - (x.scale(a) + y.scale(b))
        n2 = self.phi2 - (x.scale(c) + y.scale(d))
        psi1, psi2 = x.scale(inv[0, 0]) + y.scale(inv[0, 1]), x.scale(inv[1, 0]) + y.scale(inv[1, 1])
        for _ in range(order):
            r1 = x - compose2(n1, psi1, psi2)
            r2 = y - compose2(n2, psi1, psi2)
            psi1 = r1.scale(inv[0, 0]) + r2.scale(inv[0, 1])
            psi2 = r1.scale(inv[1, 0]) + r2.scale(inv[1, 1])
        return JetMap2(psi1, psi2)

    def push_forward(self, form):
        """Phi_* omega = (Phi^-1)^* omega."""
        inv = self.inverse()
        return form.truncate(self.order).pullback((inv.phi1, inv.phi2))

    def truncate(self, order):
        return JetMap2(self.phi1.truncate(order), self.phi2.truncate(order))

    def deviation(self, other):
        return float(max(np.max(np.abs(self.phi1.coeffs - other.phi1.coeffs)),
                         np.max(np.abs(self.phi2.coeffs - other.phi2.coeffs))))


# adjoint series --------------------------------------------------------------------

def adjoint_series(g, f, X, order=None, max_terms=400):
    """sum_i f^i/i! X^i(g), truncated at ``order``."""
    order = order or g.order
    g, f, X = g.truncate(order), f.truncate(order), X.truncate(order)
    step = f.valuation(0.0) + X.shift()
    if f.is_zero(0.0):
        return g
    total = g
    xg = g  # X^i(g); f is a coefficient only, never differentiated
    fp = TruncSeries2.one(order)  # f^i / i!
    scale = max(1.0, g.max_abs())
    if step >= 1:
        n_terms = order // int(step) + 1
        for i in range(1, n_terms + 1):
            xg = X(xg)
            fp = (fp * f).scale(1.0 / i)
            total = total + fp * xg
        return total
    # valuation-0 time along a linear field: sum until the terms are negligible
    small = 0
    for i in range(1, max_terms + 1):
        xg = X(xg)
        fp = (fp * f).scale(1.0 / i)
        term = fp * xg
        total = total + term
        size = term.max_abs()
        if not math.isfinite(size):
            break
        if size <= 1e-17 * max(scale, total.max_abs()):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise NonTerminating("adjoint series did not settle; f X does not raise valuation")


def exp_flow(f, X, order=None):
    """(x o exp[f]X, y o exp[f]X)."""
    order = order or X.order
    if not isinstance(f, TruncSeries2):
        f = TruncSeries2.constant(f, order)
    x, y = TruncSeries2.x(order), TruncSeries2.y(order)
    return JetMap2(adjoint_series(x, f, X, order), adjoint_series(y, f, X, order))


def _g_series(alpha, X, tau, kappa, n, order):
    """G(alpha) = ((x+y) o exp[tau^{n-1} alpha]X - (x+y)) / tau^n and dG/dalpha.

    With X(x+y) = tau kappa the i-th adjoint term is
    tau^{(i-1)(n-1)-1} alpha^i/i! X^{i-1}(tau kappa), so no division is needed.
    """
    s1 = tau * kappa
    total = alpha * kappa
    deriv = kappa
    xt = s1
    a_pow = alpha  # alpha^(i-1)
    fact = 1.0
    for i in range(2, order + 2):
        xt = X(xt)
        tp = tau ** ((i - 1) * (n - 1) - 1)
        fact *= i - 1  # (i-1)!
        deriv = deriv + (tp * a_pow * xt).scale(1.0 / fact)
        a_pow_next = a_pow * alpha
        total = total + (tp * a_pow_next * xt).scale(1.0 / (fact * i))
        a_pow = a_pow_next
        if a_pow.is_zero(0.0):
            break
    return total, deriv


def solve_alpha(f_target, X, tau, n, order=None, tol=1e-12):
    """alpha with (x+y) o exp[tau^{n-1} alpha]X = f_target.

    ``f_target`` must have the shape (1 + tau^n h)(x + y) with n >= 2. The
    result is determined through order N - n; it is returned at that order.
    """
    order = order or f_target.order
    if n < 2:
        raise ShapeError("exponent n must be at least 2")
    X = X.truncate(order)
    tau = tau.truncate(order)
    f_target = f_target.truncate(order)
    s = TruncSeries2.x(order) + TruncSeries2.y(order)
    if tau.valuation() < 1:
        raise ShapeError("tau must vanish at the origin")
    tau_n = tau ** n
    rhs, v = divide_with_remainder(f_target - s, tau_n)
    if v <= order:
        raise ShapeError(f"f - (x+y) is not divisible by tau^{n} (remainder valuation {v})")
    m = order - n
    rhs = rhs.truncate(m)
    _, v = divide_with_remainder(rhs, s.truncate(m))
    if v <= m:
        raise ShapeError("(f - (x+y))/tau^n has no factor (x + y)")
    kappa, v = divide_with_remainder(X(s), tau)
    if v <= order or abs(kappa[0, 0]) <= EPS_ZERO:
        raise ShapeError("X(x+y) must be tau times a unit")
    alpha = rhs  # first-order seed (x+y) h
    X_m, tau_m, kappa = X.truncate(m), tau.truncate(m), kappa.truncate(m)
    steps = max(1, math.ceil(math.log2(max(m, 2)))) + 2
    for _ in range(steps):
        g, dg = _g_series(alpha, X_m, tau_m, kappa, n, m)
        resid = g - rhs
        if resid.max_abs() <= tol * max(1.0, rhs.max_abs()):
            break
        alpha = alpha - resid * invert_unit(dg)
    return alpha


def eq1_residual(alpha, X, tau, n, f_target):
    """Max coefficient of (x+y) o exp[tau^{n-1} alpha]X - f_target through f_target's order."""
    order = f_target.order
    a = _pad_to(alpha, order)
    f = tau.truncate(order) ** (n - 1) * a
    s = TruncSeries2.x(order) + TruncSeries2.y(order)
    img = adjoint_series(s, f, X.truncate(order), order)
    return float((img - f_target).max_abs())


def _pad(s, order):
    c = np.zeros((order + 1, order + 1), complex)
    c[: s.order + 1, : s.order + 1] = s.coeffs
    return TruncSeries2(c, order)


# pairing and divisibility by the tangency function ---------------------------------

def pairing(phi, form_l):
    """<Phi> = c(c o Phi dPhi1/dy + d o Phi dPhi2/dy) - d(c o Phi dPhi1/dx + d o Phi dPhi2/dx)."""
    order = phi.order
    c, d = form_l.a.truncate(order), form_l.b.truncate(order)
    cphi, dphi = phi.pullback(c), phi.pullback(d)
    p1, p2 = phi.phi1, phi.phi2
    return (c * (cphi * p1.diff_y() + dphi * p2.diff_y())
            - d * (cphi * p1.diff_x() + dphi * p2.diff_x()))


def tangency_function(form_f, form_l, order=None):
    """q = d a - c b."""
    order = order or max(form_f.order, form_l.order)
    a, b = form_f.a.truncate(order), form_f.b.truncate(order)
    c, d = form_l.a.truncate(order), form_l.b.truncate(order)
    return d * a - c * b


def _pad_to(s, order):
    return s.truncate(order) if s.order >= order else _pad(s, order)


@dataclass
class SolveUResult:
    u: TruncSeries2
    remainder_valuation: float
    n_min: int
    intersection: int | None
    divisible: bool


def solve_u(f, q, X_q, form_l, order=None, n_min=None, check_valuation=True):
    """u such that q divides <Phi_{f - u q}> through ``order``.

    Uses the linear update <Phi_{f-uq}> = <Phi_f> - u h (h o Phi_f) mod q,
    h = c q_y - d q_x, and solves <Phi_f> = u H + v q by least squares.
    """
    order = order or f.order
    f, q = _pad_to(f, order), _pad_to(q, order)
    X_q = VectorField(_pad_to(X_q.P, order), _pad_to(X_q.Q, order))
    c, d = _pad_to(form_l.a, order), _pad_to(form_l.b, order)
    h = c * q.diff_y() - d * q.diff_x()
    if h.is_zero():
        raise NotCoprime("h = c q_y - d q_x vanishes identically")
    inter = None
    if n_min is None:
        inter = intersection_number(_poly(q), _poly(h))
        n_min = 2 * inter
    if check_valuation and f.valuation() < n_min:
        raise PreconditionError(f"f has valuation {f.valuation()} < N_min = {n_min}")
    phi_f = exp_flow(f, X_q, order)
    target = pairing(phi_f, form_l)
    H = h * phi_f.pullback(h)
    u = _solve_mod(target, H, q, order)
    phi = exp_flow(f - u * q, X_q, order)
    _, val = divide_with_remainder(pairing(phi, form_l), q)
    return SolveUResult(u, val, n_min, inter, val > order)


def _poly(s):
    """Trim a series to an exact polynomial of its actual degree."""
    deg = s.degree(1e-300)
    return s.truncate(max(deg, 1))


def _solve_mod(target, H, q, order):
    """u with target - u H in (q) through ``order``, minimum-norm least squares."""
    mask = np.add.outer(np.arange(order + 1), np.arange(order + 1)) <= order
    mons = [(i, k - i) for k in range(order + 1) for i in range(k, -1, -1)]
    cols = [H.mul_monomial(i, j).coeffs[mask] for i, j in mons]
    cols += [q.mul_monomial(i, j).coeffs[mask] for i, j in mons]
    A = np.stack(cols, axis=1)
    sol, *_ = np.linalg.lstsq(A, target.coeffs[mask], rcond=None)
    return TruncSeries2.from_dict(dict(zip(mons, sol[: len(mons)])), order)


# one-variable linearization and centralizers --------------------------------------

def _powers(h, order):
    """h^k for k = 0..order as TruncSeries1."""
    s = TruncSeries1(h.coeffs, order)
    out = [TruncSeries1([1.0], order), s.truncate(order)]
    for _ in range(2, order + 1):
        out.append(out[-1] * out[1])
    return out


def linearize_jet(h, order=None, small=DEFAULT.small_divisor):
    """phi with phi'(0) = 1 and phi o h o phi^-1 = mu z through ``order``."""
    order = order or h.order
    mu = complex(h.multiplier)
    pw = _powers(h, order)
    phi = np.zeros(order + 1, complex)
    phi[1] = 1.0
    for j in range(2, order + 1):
        div = mu ** j - mu
        if abs(div) <= small:
            raise SmallDivisor(j, abs(div))
        rest = sum(phi[k] * pw[k].coeffs[j] for k in range(1, j))
        phi[j] = -rest / div
    return JetDiffeo(TruncSeries1(phi, order))


def lambda_of(mu):
    """lambda with mu = exp(2 pi i lambda), real part in (-1/2, 1/2]."""
    return cmath.log(complex(mu)) / (2j * math.pi)


def centralizer_forcing(h, order=None, candidate=None, small=DEFAULT.small_divisor,
                        q_max=DEFAULT.q_max, rational_tol=DEFAULT.rational_tol):
    """Solve psi o h = h o psi with psi'(0) = 1 order by order.

    At each order j the coefficient psi_j multiplies mu^j - mu; away from
    resonance it is forced, and the only solution is the identity. A
    ``candidate`` is checked against the forced values.
    """
    order = order or h.order
    mu = complex(h.multiplier)
    lam = lambda_of(mu)
    resonant = abs(lam.imag) < rational_tol and is_rational(lam.real, q_max, rational_tol)
    if candidate is not None:
        if abs(candidate[1] - 1.0) > EPS_ZERO:
            raise PreconditionError(f"candidate has psi'(0) = {complex(candidate[1])}, not 1")
    pw = _powers(h, order)
    hc = np.asarray(h.coeffs)
    psi = np.zeros(order + 1, complex)
    psi[1] = 1.0
    rows = []
    inconclusive_at = None
    for j in range(2, order + 1):
        div = mu ** j - mu
        # (psi o h)_j - (h o psi)_j without the psi_j terms
        left = sum(psi[k] * pw[k].coeffs[j] for k in range(1, j))
        ps = TruncSeries1(psi, order)
        pp = TruncSeries1([1.0], order)
        right = 0j
        for k in range(1, j + 1):
            pp = pp * ps
            if k >= 2:
                right += hc[k] * pp.coeffs[j]
        r = left - right
        row = {"order": j, "divisor": abs(div), "forced": None, "free": False}
        if abs(div) <= small:
            row["free"] = True
            inconclusive_at = inconclusive_at or j
            psi[j] = candidate[j] if candidate is not None else 0.0
            row["obstruction"] = abs(r)
        else:
            psi[j] = -r / div
            row["forced"] = complex(psi[j])
            if candidate is not None:
                row["candidate"] = complex(candidate[j])
                row["candidate_deviation"] = abs(candidate[j] - psi[j])
        rows.append(row)
    forced = [abs(r["forced"]) for r in rows if r["forced"] is not None]
    max_forced = max(forced, default=0.0)
    if resonant or inconclusive_at is not None:
        verdict = "inconclusive"
    else:
        verdict = "identity" if max_forced < 1e-10 else "nontrivial"
    return {"multiplier": mu, "lambda": lam, "resonant": resonant, "rows": rows,
            "max_forced": max_forced, "first_free_order": inconclusive_at, "verdict": verdict,
            "tolerance": 1e-10, "order": order}


def compare_linearized_generators(h1, h2, order=None, tol=1e-6, small=DEFAULT.small_divisor):
    """Heuristic comparison of two holonomy generators after formal linearization.

    Equal multipliers away from resonance mean both jets are formally
    conjugate to the same rotation; this is evidence, not a certificate.
    """
    order = order or min(h1.order, h2.order)
    gap = abs(h1.multiplier - h2.multiplier)
    out = {"multiplier_gap": gap, "tolerance": tol, "heuristic": True}
    try:
        p1, p2 = linearize_jet(h1, order, small), linearize_jet(h2, order, small)
    except SmallDivisor as exc:
        out.update(verdict="inconclusive", reason=str(exc))
        return out
    conj = p2.inverse().compose(p1)
    out.update(conjugator=conj, verdict="conjugate" if gap < tol else "distinct")
    return out
