"""Numerical leaf continuation: holonomy, Dulac maps and leaf projections as jets.

Forms are written in local coordinates ``(u, v)``. A loop "along u=0" runs in
the coordinate ``v`` on the invariant curve ``{u = 0}`` and the transversal is
the ``u``-line through the basepoint; "along v=0" swaps the roles.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .blowup import OneForm
from .config import DEFAULT, thread_cap
from .series import EPS_ZERO, JetDiffeo, TruncSeries1, TruncSeries2, compose2


class HolonomyError(RuntimeError):
    pass


class StepCollapse(HolonomyError):
    pass


class ToleranceNotMet(HolonomyError):
    pass


class JetInconsistent(HolonomyError):
    pass


class TransversalityError(HolonomyError):
    pass


# paths -------------------------------------------------------------------------

@dataclass(frozen=True)
class Path:
    """w(theta) = (alpha zeta + beta)/(gamma zeta + delta), zeta = zeta0 e^{i theta} (kind 0)
    or w(theta) = alpha + theta beta (kind 1), for theta in [theta0, theta1]."""

    kind: int
    alpha: complex
    beta: complex
    gamma: complex = 0j
    delta: complex = 1 + 0j
    zeta0: complex = 1 + 0j
    theta0: float = 0.0
    theta1: float = 2 * math.pi

    def w(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == 0:
            zeta = self.zeta0 * np.exp(1j * theta)
            return (self.alpha * zeta + self.beta) / (self.gamma * zeta + self.delta)
        return self.alpha + theta * self.beta

    def dw(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == 0:
            zeta = self.zeta0 * np.exp(1j * theta)
            den = self.gamma * zeta + self.delta
            return (self.alpha * self.delta - self.beta * self.gamma) / den**2 * 1j * zeta
        return np.full(theta.shape, self.beta, dtype=complex)

    def reversed(self):
        return Path(self.kind, self.alpha, self.beta, self.gamma, self.delta, self.zeta0,
                    self.theta1, self.theta0)

    @property
    def start(self):
        return complex(self.w(self.theta0))

    @property
    def end(self):
        return complex(self.w(self.theta1))


def segment(w0, w1):
    return Path(1, complex(w0), complex(w1) - complex(w0), theta0=0.0, theta1=1.0)


def constant_path(w0):
    return Path(1, complex(w0), 0j, theta0=0.0, theta1=1.0)


def _is_inf(z):
    return z is not None and not np.isfinite(complex(z))


@dataclass(frozen=True)
class LoopSpec:
    """Positively oriented loop around ``center`` in the divisor coordinate.

    Without ``other`` the loop is the circle of the given radius. With
    ``other`` (a second puncture, possibly ``inf``) it is the image of the
    circle ``|zeta| = radius`` under the Moebius map sending 0 to ``center``
    and infinity to ``other``.
    """

    center: complex
    radius: float
    other: complex | None = None
    turns: int = 1
    orientation: int = 1
    samples: int = DEFAULT.samples

    def path(self):
        t1, t2 = self.center, self.other
        span = 2 * math.pi * self.turns * self.orientation
        r = self.radius
        if _is_inf(t1):
            return Path(0, complex(t2), 1, 1, 0, r, 0.0, span)
        if t2 is None or _is_inf(t2):
            return Path(0, 1, complex(t1), 0, 1, r, 0.0, span)
        return Path(0, -complex(t2), complex(t1), -1, 1, r, 0.0, span)

    @property
    def basepoint(self):
        return self.path().start


@dataclass(frozen=True)
class Transversal:
    """The line ``{w = basepoint}`` parametrized by the transverse coordinate."""

    basepoint: complex
    radius: float
    along: str = "u=0"


@dataclass
class MapSamples:
    inputs: np.ndarray
    outputs: np.ndarray
    errors: np.ndarray
    radius: float


@dataclass
class HolonomyJet:
    jet: JetDiffeo
    multiplier: complex
    error_bars: np.ndarray
    loop: LoopSpec
    rho: float
    disagreement: np.ndarray
    samples: list = field(default_factory=list)
    linear_estimate: complex = 0j


# form plumbing -------------------------------------------------------------------

def leaf_arrays(form, along="u=0"):
    """(P, Q): coefficients of d(path) and d(transversal), indexed [z, w]."""
    if along == "u=0":
        P, Q = form.b.coeffs, form.a.coeffs
    elif along == "v=0":
        P, Q = form.a.coeffs.T, form.b.coeffs.T
    else:
        raise ValueError(f"unknown orientation {along!r}")
    # drop trailing zero rows and columns, the kernels loop over the full arrays
    nz = np.argwhere((P != 0) | (Q != 0))
    if nz.size:
        i, j = nz.max(axis=0) + 1
        P, Q = P[:i, :j], Q[:i, :j]
    return np.ascontiguousarray(P), np.ascontiguousarray(Q)


def transverse_truncation(form, degree, along="u=0"):
    """Drop terms of degree > ``degree`` in the transverse coordinate.

    The holonomy jet through order N only sees transverse degrees <= N, so
    this leaves the jet unchanged while making the leaf equations cheaper.
    """
    a, b = form.a.coeffs.copy(), form.b.coeffs.copy()
    if along == "u=0":
        a[degree + 1:, :] = 0
        b[degree + 1:, :] = 0
    else:
        a[:, degree + 1:] = 0
        b[:, degree + 1:] = 0
    return OneForm(TruncSeries2(a, form.order), TruncSeries2(b, form.order))


def _integrate(P, Q, path, z0, tol, tube, max_steps=200000):
    """Run the kernel over chunks of samples in a thread pool."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    workers = min(thread_cap(), max(1, z0.size // 16))
    args = (path.kind, path.alpha, path.beta, path.gamma, path.delta, path.zeta0,
            float(path.theta0), float(path.theta1))
    atol = tol * 1e-2

    def run(chunk):
        return kernels.integrate_leaves(P, Q, *args, chunk, tol, atol * max(1.0, np.max(np.abs(chunk))),
                                        tube, max_steps)

    if workers <= 1 or kernels.BACKEND != "compiled":
        return run(z0)
    parts = np.array_split(z0, workers)
    with ThreadPoolExecutor(workers) as pool:
        results = list(pool.map(run, parts))
    return tuple(np.concatenate([r[i] for r in results]) for i in range(3))


def lift_path(form, path, start, tol=DEFAULT.ode_tol, along="u=0", tube=math.inf):
    """Follow the leaves over ``path`` starting at transverse coordinate(s) ``start``.

    Returns ``(endpoints, error_estimates)``; raises StepCollapse if any leaf
    leaves the tube or meets the singular locus.
    """
    P, Q = leaf_arrays(form, along)
    z_end, err, status = _integrate(P, Q, path, start, tol, tube)
    if np.any(status == kernels.STATUS_COLLAPSE):
        raise StepCollapse("a leaf escaped the tube or met a zero of the transverse coefficient")
    if np.any(status == kernels.STATUS_MAX_STEPS):
        raise ToleranceNotMet("step budget exhausted before the end of the path")
    if np.ndim(start) == 0:
        return complex(z_end[0]), float(err[0])
    return z_end, err


def linear_multiplier(form, path, along="u=0", nodes=512):
    """Multiplier and peak growth of the linearized transport along ``path``.

    Integrates -P_z(0, w)/Q(0, w) dw with the trapezoid rule (exponentially
    accurate for closed loops).
    """
    P, Q = leaf_arrays(form, along)
    theta = np.linspace(path.theta0, path.theta1, nodes + 1)
    w = path.w(theta)
    dw = path.dw(theta)
    pz = kernels.polyval2(np.ascontiguousarray(P[1:2, :] if P.shape[0] > 1 else P[:1, :] * 0), 0 * w, w)
    q0 = kernels.polyval2(np.ascontiguousarray(Q[:1, :]), 0 * w, w)
    if np.any(np.abs(q0) < 1e-300):
        raise TransversalityError("path meets a zero of the transverse coefficient")
    f = -pz / q0 * dw
    h = (path.theta1 - path.theta0) / nodes
    cum = np.concatenate([[0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))])
    growth = np.exp(cum.real)
    return complex(np.exp(cum[-1])), float(max(growth.max(), 1.0 / growth.min())), float(growth.max())


def singular_distance(form, path, along="u=0", nodes=128):
    """Smallest nonzero |z| with Q(z, w) = 0 for w on the path (inf if none)."""
    P, Q = leaf_arrays(form, along)
    theta = np.linspace(path.theta0, path.theta1, nodes + 1)
    best = math.inf
    for w in path.w(theta):
        col = np.array([np.polyval(Q[i, ::-1], w) for i in range(Q.shape[0])])
        col[np.abs(col) < 1e-14 * max(1.0, np.max(np.abs(col)))] = 0
        nz = np.flatnonzero(col)
        if nz.size <= 1:
            continue
        r = np.roots(col[nz[0]: nz[-1] + 1][::-1])
        r = r[np.abs(r) > 1e-12]
        if r.size:
            best = min(best, float(np.min(np.abs(r))))
    return best


MAX_RADIUS = 4.0


def nonlinear_scale(form, along="u=0"):
    """|z| at which higher z-powers of P and Q rival the leading ones (inf if none)."""
    best = math.inf
    for arr in leaf_arrays(form, along):
        norms = np.linalg.norm(arr, axis=1)
        nz = np.flatnonzero(norms > 0)
        if nz.size < 2:
            continue
        k0 = nz[0]
        for k in nz[1:]:
            best = min(best, (norms[k0] / norms[k]) ** (1.0 / (k - k0)))
    return best


def transversality_angle(form, basepoint, along="u=0"):
    """Angle between the transversal and the leaf direction at (0, basepoint)."""
    P, Q = leaf_arrays(form, along)
    p = complex(kernels.polyval2(P, 0j, basepoint))
    q = complex(kernels.polyval2(Q, 0j, basepoint))
    # leaf direction in (z, w): (-P, Q); transversal direction (1, 0)
    vec = np.array([-p, q])
    norm = np.linalg.norm(vec)
    if norm == 0:
        return 0.0
    return float(np.arccos(min(1.0, abs(vec[0]) / norm)))


# jets from samples -----------------------------------------------------------------

def cauchy_coefficients(values, rho, order=None):
    """Taylor coefficients c_0..c_order from samples on the circle |z| = rho."""
    m = values.size
    n = m if order is None else min(order + 1, m)
    c = np.fft.fft(values)[:n] / m
    return c / rho ** np.arange(n)


def sample_map(fn, rho, samples):
    z = rho * np.exp(2j * np.pi * np.arange(samples) / samples)
    out, err = fn(z)
    return MapSamples(z, out, err, rho)


def two_radius_jet(fn, rho, order, samples=DEFAULT.samples, rel_tol=DEFAULT.jet_rel_tol,
                   check_order=6, retries=8, inconsistent_retries=2):
    """Jet of a sampled germ with two-radius cross-validation.

    Disagreement at degree j is |c_j(rho) - c_j(rho/2)| rho^(j-1) / |c_1|,
    the relative weight of the discrepancy at the sampling radius.
    Returns ``(coeffs, error_bars, disagreement, rho, samples)``.
    """
    last = None
    for _ in range(retries):
        try:
            s1 = sample_map(fn, rho, samples)
            s2 = sample_map(fn, rho / 2, samples)
        except StepCollapse as exc:
            last = exc
            rho /= 2
            continue
        c1 = cauchy_coefficients(s1.outputs, rho, order)
        c2 = cauchy_coefficients(s2.outputs, rho / 2, order)
        err = np.abs(c1 - c2)
        scale = abs(c1[1]) if abs(c1[1]) > 0 else 1.0
        dis = err * rho ** (np.arange(order + 1) - 1.0) / scale
        k = min(check_order, order)
        worst = float(np.max(dis[1: k + 1]))
        if worst >= rel_tol:
            last = JetInconsistent(
                f"radii {rho:.3g} and {rho / 2:.3g} disagree (max relative {worst:.3g})")
            if inconsistent_retries > 0:
                inconsistent_retries -= 1
                rho /= 2
                continue
            raise last
        return c1, err, dis, rho, [s1, s2]
    if isinstance(last, JetInconsistent):
        raise last
    raise StepCollapse(f"sampling failed after {retries} radius reductions: {last}")


def _jet_from(c, order):
    c = np.array(c[: order + 1])
    c[0] = 0.0
    return JetDiffeo(TruncSeries1(c, order))


def _radius_ladder(optimistic, conservative, factor=4.0, floor=1e-7):
    """Descending trial radii from the optimistic to the conservative estimate."""
    out = []
    r = optimistic
    stop = max(min(conservative, optimistic), floor)
    while r >= stop * (1 - 1e-12):
        out.append(r)
        r /= factor
    if not out or out[-1] > stop * factor * (1 - 1e-12):
        out.append(stop)
    return out


def _mixed_error(c, err, k):
    return float(np.max(err[1: k + 1] / np.maximum(1.0, np.abs(c[1: k + 1]))))


def search_jet(fn, radii, order, samples, rel_tol, check_order=6, keep=2):
    """Two-radius jets on a ladder of radii; the best of the first ``keep`` consistent ones.

    Large radii keep round-off small, the two-radius check rejects radii
    where truncation or leaf escape spoils the samples.
    """
    best, best_score, hits = None, math.inf, 0
    k = min(check_order, order)
    for r in radii:
        try:
            out = two_radius_jet(fn, r / 4, order, samples, rel_tol, check_order,
                                 retries=1, inconsistent_retries=0)
        except (StepCollapse, JetInconsistent, ToleranceNotMet):
            if hits:
                break
            continue
        score = _mixed_error(out[0], out[1], k)
        if score < best_score:
            best, best_score = out, score
        hits += 1
        if hits >= keep:
            break
    if best is None:
        # below the ladder: halve on collapse as a last resort
        return two_radius_jet(fn, radii[-1] / 8, order, samples, rel_tol, check_order)
    return best


def holonomy_jet(form, loop, order=DEFAULT.jet_order, along="u=0", tol=DEFAULT.ode_tol,
                 radius=None, samples=None, rel_tol=DEFAULT.jet_rel_tol,
                 theta_min=DEFAULT.theta_min):
    """Holonomy of the invariant curve along ``loop`` as a jet on the transversal.

    Without ``radius`` a ladder of sampling radii is tried, from half the
    distance to the nearest obstruction down to that bound divided by the
    peak growth of the linearized transport.
    """
    path = loop.path()
    samples = samples or loop.samples
    base = path.start
    if transversality_angle(form, base, along) < theta_min:
        raise TransversalityError(f"transversal at {base} is within {theta_min} rad of the leaf")
    form = transverse_truncation(form, order + 1, along)
    mu_lin, growth, peak = linear_multiplier(form, path, along)
    dist = singular_distance(form, path, along)
    tube = math.inf if math.isinf(dist) else 0.9 * dist

    def fn(z):
        return lift_path(form, path, z, tol, along, tube)

    if radius is None:
        scale = min(dist, nonlinear_scale(form, along))
        optimistic = min(2 * dist, 4 * scale, MAX_RADIUS)
        radii = _radius_ladder(optimistic, min(0.5 * scale, MAX_RADIUS) / growth)
        # leaves carried past the tube by the linear part alone are hopeless
        fits = [r for r in radii if r / 4 * peak < tube]
        radii = fits or radii[-1:]
        c, err, dis, rho, smp = search_jet(fn, radii, order, samples, rel_tol)
    else:
        c, err, dis, rho, smp = two_radius_jet(fn, radius / 4, order, samples, rel_tol)
    return HolonomyJet(_jet_from(c, order), complex(c[1]), err, loop, rho, dis, smp, mu_lin)


def multiplier_matches_index(h, index, tol=1e-8):
    """Compare a holonomy multiplier with exp(2 pi i index)."""
    expected = complex(np.exp(2j * np.pi * complex(index)))
    residual = abs(h.multiplier - expected)
    rel = residual / max(1.0, abs(expected))
    return {"multiplier": h.multiplier, "expected": expected, "residual": residual,
            "relative_residual": rel, "tolerance": tol, "pass": rel < tol}


# Dulac maps and projections --------------------------------------------------------

def _homogeneous_scale(s):
    """Smallest r at which some homogeneous part of ``s`` matches |s(0)| on |(u, v)| = r."""
    c0 = abs(s[0, 0])
    best = math.inf
    for k in range(1, s.order + 1):
        norm = float(np.sum(np.abs(s.homogeneous(k))))
        if norm > 0:
            best = min(best, (c0 / norm) ** (1.0 / k))
    return best


def dulac_map(form, order=DEFAULT.jet_order, tol=DEFAULT.ode_tol, radius=None,
              samples=DEFAULT.samples, rel_tol=DEFAULT.jet_rel_tol, newton_steps=30,
              return_errors=False):
    """Jet of the leaf map from ({u = 0}, v) to ({v = 0}, u) at a corner.

    ``form`` is the transverse fibration near the corner in local
    coordinates. Each leaf is followed in the coordinate ``u`` from (0, z)
    along straight segments; Newton's method on the end of the segment locates
    the crossing with ``{v = 0}``.
    """
    # leaves from (0, z) stay at scale |z|, so terms of total degree above
    # order + 1 cannot reach the jet
    form = form.truncate(min(form.order, order + 1))
    a, b = form.a, form.b
    if abs(a[0, 0]) <= EPS_ZERO or abs(b[0, 0]) <= EPS_ZERO:
        raise TransversalityError("fibration is tangent to a branch of the corner")
    P, Q = leaf_arrays(form, "v=0")  # path in u, transversal v

    def fn(z):
        z = np.asarray(z, dtype=complex)
        v = z.copy()
        u = np.zeros_like(z)
        for _ in range(newton_steps):
            with np.errstate(divide="ignore", invalid="ignore"):
                du = v * kernels.polyval2(b.coeffs, u, v) / kernels.polyval2(a.coeffs, u, v)
            if not np.all(np.isfinite(du)):
                raise StepCollapse("a leaf became tangent to the second branch")
            target = u + du
            v_new, err, status = kernels.integrate_leaves(P, Q, 1, u, du, 0j, 1 + 0j, 1 + 0j, 0.0, 1.0,
                                                          v, tol, tol * 1e-2 * np.max(np.abs(z)),
                                                          math.inf, 200000)
            if np.any(status != kernels.STATUS_OK):
                raise StepCollapse("leaf continuation toward the second branch failed")
            u, v = target, v_new
            if np.max(np.abs(v)) <= 1e-15 * np.max(np.abs(z)):
                break
        return u, np.zeros(z.size)

    if radius is None:
        # 0.5 / spread keeps the leaves where both coefficients stay close to
        # their corner values; larger radii are tried first
        spread = max(form.a.max_abs() / abs(a[0, 0]), form.b.max_abs() / abs(b[0, 0]))
        safe = 0.5 / spread
        reach = min(_homogeneous_scale(a), _homogeneous_scale(b))
        radii = _radius_ladder(min(max(reach, 16 * safe), MAX_RADIUS), safe / 4)
        c, err, dis, rho, _ = search_jet(fn, radii, order, samples, rel_tol)
    else:
        c, err, dis, rho, _ = two_radius_jet(fn, radius / 4, order, samples, rel_tol)
    jet = _jet_from(c, order)
    return (jet, err) if return_errors else jet


@dataclass(frozen=True)
class CurveGerm:
    """Parametrized curve germ s -> (x(s), y(s)) through the origin."""

    x: TruncSeries1
    y: TruncSeries1

    @classmethod
    def line(cls, dx, dy, order):
        return cls(TruncSeries1([0, dx], order), TruncSeries1([0, dy], order))

    @classmethod
    def graph_over_y(cls, phi, order):
        """{x = phi(y)} parametrized by y."""
        return cls(TruncSeries1(phi, order) if not isinstance(phi, TruncSeries1) else phi.truncate(order),
                   TruncSeries1.identity(order))

    @classmethod
    def graph_over_x(cls, phi, order):
        """{y = phi(x)} parametrized by x."""
        return cls(TruncSeries1.identity(order),
                   TruncSeries1(phi, order) if not isinstance(phi, TruncSeries1) else phi.truncate(order))


def compose_curve(s, curve):
    """s(x(t), y(t)) for a TruncSeries2 ``s`` and a curve germ."""
    order = curve.x.order
    result = TruncSeries1([0], order)
    deg = s.order
    for i in range(deg, -1, -1):
        row = TruncSeries1([0], order)
        for j in range(deg - i, -1, -1):
            row = row * curve.y + s[i, j]
        result = result * curve.x + row
    return result


def first_integral(form, order):
    """Jet H of a first integral of a regular form, normalized on an axis.

    With b(0) != 0, H(0, y) = y and H_x = (a/b) H_y; otherwise the roles of x
    and y are exchanged.
    """
    from .series import invert_unit
    a = form.a.truncate(order)
    b = form.b.truncate(order)
    if abs(b[0, 0]) > EPS_ZERO * max(1.0, form.max_abs()):
        ratio = a * invert_unit(b)
        H = TruncSeries2.y(order)
        for _ in range(order + 1):
            H = TruncSeries2.y(order) + _integrate_x(ratio * H.diff_y())
        return H
    if abs(a[0, 0]) > EPS_ZERO * max(1.0, form.max_abs()):
        ratio = b * invert_unit(a)
        H = TruncSeries2.x(order)
        for _ in range(order + 1):
            H = TruncSeries2.x(order) + _integrate_y(ratio * H.diff_x())
        return H
    raise TransversalityError("fibration is singular at the origin")


def _integrate_x(s):
    n = s.order + 1
    c = np.zeros((n, n), complex)
    c[1:, :] = s.coeffs[:-1, :] / np.arange(1, n)[:, None]
    return TruncSeries2(c, s.order)


def _integrate_y(s):
    n = s.order + 1
    c = np.zeros((n, n), complex)
    c[:, 1:] = s.coeffs[:, :-1] / np.arange(1, n)[None, :]
    return TruncSeries2(c, s.order)


def project_along_leaves(form, source, target, order=DEFAULT.jet_order, H=None):
    """Jet of the leaf projection from ``source`` to ``target`` (parameter to parameter)."""
    if H is None:
        H = first_integral(form, order)
    hs = compose_curve(H, source)
    ht = compose_curve(H, target)
    for name, h in (("source", hs), ("target", ht)):
        if abs(h[1]) <= EPS_ZERO:
            raise TransversalityError(f"{name} curve is tangent to the fibration")
    return JetDiffeo(ht - ht[0]).inverse().compose(JetDiffeo(hs - hs[0]))
