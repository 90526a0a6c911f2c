"""Seidenberg reduction of singularities, divisor graphs and Camacho-Sad indices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .blowup import (Chart, OneForm, blow_up_point, is_divisor_invariant, polynomial_roots,
                     _trim, shift_poly)
from .config import DEFAULT
from .series import EPS_ZERO, TruncSeries2


class ReductionError(ValueError):
    pass


class MaxDepthExceeded(ReductionError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NonIsolatedSingularity(ReductionError):
    pass


class NonReducedPoint(ReductionError):
    pass


class NotCoprime(ReductionError):
    pass


REGULAR = "regular"
REDUCED = "reduced-nondegenerate"
SADDLE_NODE = "saddle-node"
NON_REDUCED = "non-reduced"


def is_rational(z, q_max=DEFAULT.q_max, tol=DEFAULT.rational_tol):
    """Bounded rationality test on a complex number.

    True iff the imaginary part is below ``tol`` and the real part lies within
    ``tol`` of a fraction with denominator at most ``q_max``.
    """
    z = complex(z)
    if abs(z.imag) >= tol or not math.isfinite(z.real):
        return False
    frac = Fraction(z.real).limit_denominator(q_max)
    return abs(z.real - float(frac)) < tol


def nearest_fraction(z, q_max=DEFAULT.q_max):
    return Fraction(complex(z).real).limit_denominator(q_max)


@dataclass
class DivisorComponent:
    id: int
    self_intersection: int
    multiplicity: int
    is_dicritical: bool
    chart: Chart
    singular_points: list = field(default_factory=list)
    is_dead_branch: bool = False


@dataclass
class SingularPoint:
    """A singular point in a chart where it sits at the local origin.

    ``components[0]`` is the component ``{u = 0}`` and ``components[1]`` (if
    any) is ``{v = 0}``; either may be None.
    """

    id: int
    chart: Chart
    form: OneForm
    components: tuple
    kind: str
    eigenvalues: tuple
    jacobian: np.ndarray
    cs_index: dict
    depth: int
    directions: dict = field(default_factory=dict)

    @property
    def is_corner(self):
        return self.components[0] is not None and self.components[1] is not None

    @property
    def is_reduced(self):
        return self.kind in (REDUCED, SADDLE_NODE)


@dataclass
class BlowupNode:
    id: int
    parent: int | None
    chart: Chart
    component: int


@dataclass
class ReductionTree:
    nodes: list
    leaves: list
    depth: int

    @property
    def n_blowups(self):
        return len(self.nodes)


@dataclass
class DivisorGraph:
    components: list
    corners: list
    points: list

    def adjacency(self):
        adj = {c.id: [] for c in self.components}
        for i, j, _ in self.corners:
            adj[i].append(j)
            adj[j].append(i)
        return {k: sorted(v) for k, v in adj.items()}

    def component(self, cid):
        return self.components[cid]

    def points_on(self, cid):
        return [p for p in self.points if cid in p.components]


def _scale(form):
    return max(1.0, form.max_abs())


def is_singular_at_origin(form, eps=EPS_ZERO):
    tol = eps * _scale(form)
    return abs(form.a[0, 0]) <= tol and abs(form.b[0, 0]) <= tol


def classify(form, components=(None, None), eps=EPS_ZERO, q_max=DEFAULT.q_max,
             rtol=DEFAULT.rational_tol):
    """Type, eigenvalues, branch directions and indices of the point at the origin."""
    if not is_singular_at_origin(form, eps):
        return REGULAR, (), np.zeros((2, 2), complex), {}, {}
    J = form.linear_part()
    tol = eps * _scale(form)
    ev = np.linalg.eigvals(J)
    small = np.abs(ev) <= tol
    if small.all():
        return NON_REDUCED, tuple(ev), J, {}, {}
    # eigen-directions; invariant axes take precedence so labels are stable
    branches = _branches(J, components, ev, tol)
    if small.any():
        kind = SADDLE_NODE
    else:
        ratio = ev[0] / ev[1]
        kind = NON_REDUCED if (ratio.real > 0 and is_rational(ratio, q_max, rtol)) else REDUCED
    indices = {}
    directions = {}
    for label, (own, other, direction) in branches.items():
        directions[label] = direction
        if abs(own) > tol:
            indices[label] = complex(other / own)
    return kind, (complex(ev[0]), complex(ev[1])), J, indices, directions


def _branches(J, components, ev, tol):
    """Map branch label -> (eigenvalue along it, transverse eigenvalue, direction dv/du).

    Direction is ``None`` for the branch {u = 0}.
    """
    out = {}
    lower = abs(J[0, 1]) <= tol
    upper = abs(J[1, 0]) <= tol
    cu, cv = components
    if lower:
        # {u = 0} invariant at the linear level: tangent eigenvalue J11
        lab = f"D{cu}" if cu is not None else "sep:u=0"
        out[lab] = (J[1, 1], J[0, 0], None)
        if upper:
            lab = f"D{cv}" if cv is not None else "sep:v=0"
            out[lab] = (J[0, 0], J[1, 1], 0j)
        elif abs(J[0, 0] - J[1, 1]) > tol:
            k = complex(J[1, 0] / (J[0, 0] - J[1, 1]))
            out[f"sep:{_dir_label(k)}"] = (J[0, 0], J[1, 1], k)
        return out
    if upper:
        lab = f"D{cv}" if cv is not None else "sep:v=0"
        out[lab] = (J[0, 0], J[1, 1], 0j)
        if abs(J[0, 0] - J[1, 1]) > tol:
            # eigenvector for J11: (J01, J11 - J00)
            k = complex((J[1, 1] - J[0, 0]) / J[0, 1])
            out[f"sep:{_dir_label(k)}"] = (J[1, 1], J[0, 0], k)
        return out
    if abs(ev[0] - ev[1]) <= tol:
        return out
    for i in range(2):
        lam, other = ev[i], ev[1 - i]
        # eigenvector (J01, lam - J00)
        vec = np.array([J[0, 1], lam - J[0, 0]])
        if abs(vec[0]) <= tol:
            out["sep:u=0"] = (lam, other, None)
        else:
            k = complex(vec[1] / vec[0])
            out[f"sep:{_dir_label(k)}"] = (lam, other, k)
    return out


def _dir_label(k):
    k = complex(k)
    re = 0.0 if abs(k.real) < 1e-12 else k.real
    im = 0.0 if abs(k.imag) < 1e-12 else k.imag
    return f"dv/du={re:.9g}{im:+.9g}j"


def _trim_poly(p, rel=1e-13):
    p = np.asarray(p, complex)
    big = np.max(np.abs(p)) if p.size else 0.0
    nz = np.flatnonzero(np.abs(p) > rel * big)
    return p[: nz[-1] + 1] if nz.size else p[:0]


def _common_root_gap(p, q):
    """Smallest relative distance between roots of p and q (coefficients low to high)."""
    p, q = _trim_poly(p), _trim_poly(q)
    if p.size == 0 or q.size == 0:
        return 0.0
    if p.size == 1 or q.size == 1:
        return math.inf
    rp, rq = np.roots(p[::-1]), np.roots(q[::-1])
    gap = np.abs(rp[:, None] - rq[None, :]) / (1 + np.abs(rp[:, None]))
    return float(gap.min())


def check_isolated(form, seed=0, trials=3, tol=1e-3):
    """Heuristic test that a and b share no common factor.

    A non-constant common factor shows up as a shared root of the
    restrictions of a and b to a generic line x = x0 (or y = y0); the lines
    are drawn at random.
    """
    a, b = form.a, form.b
    if a.max_abs() == 0 or b.max_abs() == 0:
        other = b if a.max_abs() == 0 else a
        if other.degree() > 0 and abs(other[0, 0]) <= EPS_ZERO * _scale(form):
            raise NonIsolatedSingularity("one coefficient vanishes identically")
        return True
    rng = np.random.default_rng(seed)
    for transpose in (False, True):
        A = a.coeffs.T if transpose else a.coeffs
        B = b.coeffs.T if transpose else b.coeffs
        gaps = []
        for _ in range(trials):
            x0 = np.exp(2j * np.pi * rng.random()) * (0.5 + rng.random())
            pa = np.array([np.polyval(A[::-1, j], x0) for j in range(A.shape[1])])
            pb = np.array([np.polyval(B[::-1, j], x0) for j in range(B.shape[1])])
            gaps.append(_common_root_gap(pa, pb))
        if max(gaps) < tol:
            raise NonIsolatedSingularity(
                "coefficients share a common factor (shared root on random lines)")
    return True


@dataclass
class _Pending:
    form: OneForm
    chart: Chart
    components: tuple
    depth: int
    parent: int | None


def desingularize(omega, max_depth=DEFAULT.max_depth, eps=EPS_ZERO, q_max=DEFAULT.q_max,
                  rtol=DEFAULT.rational_tol, check=True):
    """Blow up non-reduced points until every singular point is reduced."""
    if check and omega.is_polynomial:
        check_isolated(omega)
    components = []
    corners = set()
    nodes = []
    points = []
    work = [_Pending(omega, Chart(), (None, None), 0, None)]
    while work:
        item = work.pop(0)
        kind, ev, J, idx, dirs = classify(item.form, item.components, eps, q_max, rtol)
        if kind == REGULAR:
            continue
        if kind != NON_REDUCED:
            sp = SingularPoint(len(points), item.chart, item.form, item.components, kind, ev, J,
                               idx, item.depth, dirs)
            points.append(sp)
            continue
        if item.depth >= max_depth:
            partial = (ReductionTree(nodes, [p.chart for p in points], item.depth),
                       _graph(components, corners, points))
            raise MaxDepthExceeded(f"non-reduced point at depth {item.depth} ({item.chart.id})",
                                   partial)
        work.extend(_blow_up(item, components, corners, nodes, eps))
    depth = max([n.chart.depth for n in nodes], default=0)
    tree = ReductionTree(nodes, [p.chart for p in points], depth)
    return tree, _graph(components, corners, points)


def _blow_up(item, components, corners, nodes, eps):
    d1, d2 = item.components
    px, py = blow_up_point(item.form, (0, 0), chart=item.chart, eps=eps)
    cid = len(components)
    mult = px.m + sum(components[c].multiplicity for c in (d1, d2) if c is not None)
    comp = DivisorComponent(cid, -1, mult, not is_divisor_invariant(px, eps), px.chart)
    components.append(comp)
    for c in (d1, d2):
        if c is not None:
            components[c].self_intersection -= 1
    if d1 is not None and d2 is not None:
        corners.discard(frozenset((d1, d2)))
    node = BlowupNode(len(nodes), item.parent, item.chart, cid)
    nodes.append(node)
    out = []
    # x-chart: the old {v = 0} passes through t = 0; y-chart: old {u = 0} is {s = 0}
    for pb, other in ((px, d2), (py, d1)):
        if other is not None:
            corners.add(frozenset((cid, other)))
        vs = [d.v for d in pb.points]
        if other is not None and not any(v == 0 for v in vs):
            vs.insert(0, 0j)
        for v in vs:
            local = pb.strict.translate((0, v)) if v != 0 else pb.strict
            chart = pb.chart.then(("translate", (0j, complex(v))))
            comps = (cid, other if v == 0 else None)
            out.append(_Pending(local, chart, comps, item.depth + 1, node.id))
    return out


def _graph(components, corners, points):
    comps = [DivisorComponent(c.id, c.self_intersection, c.multiplicity, c.is_dicritical, c.chart)
             for c in components]
    corner_list = []
    for edge in sorted(tuple(sorted(e)) for e in corners):
        pid = next((p.id for p in points if set(p.components) == set(edge)), None)
        corner_list.append((edge[0], edge[1], pid))
    for c in comps:
        c.singular_points = [p.id for p in points if c.id in p.components]
        c.is_dead_branch = (not c.is_dicritical and len(c.singular_points) == 1
                            and points[c.singular_points[0]].is_corner)
    return DivisorGraph(comps, corner_list, points)


def camacho_sad_indices(graph):
    """{(point id, branch label): index} over every reduced point."""
    out = {}
    for p in graph.points:
        if not p.is_reduced:
            raise NonReducedPoint(f"point {p.id} is {p.kind}")
        for label, val in sorted(p.cs_index.items()):
            out[(p.id, label)] = val
    return out


def verify_index_theorem(graph, tol=1e-8):
    """Per component: the index sum against the self-intersection."""
    reports = []
    for c in graph.components:
        if c.is_dicritical:
            reports.append({"component": c.id, "skipped": "dicritical"})
            continue
        total = 0j
        missing = []
        for pid in c.singular_points:
            p = graph.points[pid]
            val = p.cs_index.get(f"D{c.id}")
            if val is None:
                missing.append(pid)
            else:
                total += val
        residual = abs(total - c.self_intersection)
        reports.append({
            "component": c.id,
            "self_intersection": c.self_intersection,
            "index_sum": total,
            "residual": residual,
            "tolerance": tol,
            "pass": (not missing) and residual < tol,
            "undefined_at": missing,
        })
    return reports


def is_in_class_M(graph, q_max=DEFAULT.q_max, rtol=DEFAULT.rational_tol):
    """(verdict, reasons) for the class of non-dicritical foliations with irrational indices."""
    reasons = []
    for c in graph.components:
        if c.is_dicritical:
            reasons.append(f"component D{c.id} is dicritical")
    for p in graph.points:
        if p.kind == SADDLE_NODE:
            reasons.append(f"point {p.id} is a saddle-node")
        elif p.kind != REDUCED:
            reasons.append(f"point {p.id} is {p.kind}")
        for label, val in sorted(p.cs_index.items()):
            if is_rational(val, q_max, rtol):
                reasons.append(f"index {nearest_fraction(val, q_max)} at point {p.id} along {label} is rational")
    return not reasons, reasons


# intersection numbers ---------------------------------------------------------

def _as_poly(f):
    if isinstance(f, TruncSeries2):
        return np.array(f.coeffs)
    if isinstance(f, dict):
        deg = max([i + j for i, j in f] + [1])
        return np.array(TruncSeries2.from_dict(f, deg).coeffs)
    return np.asarray(f, dtype=complex)


def _order(c, tol):
    idx = np.argwhere(np.abs(c) > tol)
    return int(idx.sum(axis=1).min()) if idx.size else math.inf


def _strict_x(c, m):
    """f(x, x t) / x^m."""
    n = c.shape[0]
    out = np.zeros((2 * n, n), complex)
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if i + j >= m and c[i, j] != 0:
                out[i + j - m, j] += c[i, j]
    return out


def _strict_y(c, m):
    """f(s y, y) / y^m indexed [y, s]."""
    n = c.shape[0]
    out = np.zeros((2 * n, n), complex)
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if i + j >= m and c[i, j] != 0:
                out[i + j - m, i] += c[i, j]
    return out


def _trim_block(c, tol):
    """Drop trailing rows and columns below ``tol``; keeps the recursion small."""
    rows = np.flatnonzero(np.any(np.abs(c) > tol, axis=1))
    cols = np.flatnonzero(np.any(np.abs(c) > tol, axis=0))
    if not rows.size:
        return c[:1, :1] * 0
    n = max(rows[-1], cols[-1]) + 1
    return c[:n, :n]


def _local_intersection(f, g, depth, max_depth, eps):
    tf = eps * max(1.0, np.max(np.abs(f)))
    tg = eps * max(1.0, np.max(np.abs(g)))
    m, n = _order(f, tf), _order(g, tg)
    if m == 0 or n == 0:
        return 0
    if m == math.inf or n == math.inf:
        raise NotCoprime("a curve vanishes identically")
    if depth > max_depth:
        raise NotCoprime("infinitely near common points do not separate (common component)")
    total = m * n
    for strict in (_strict_x, _strict_y):
        F, G = _trim_block(strict(f, m), tf), _trim_block(strict(g, n), tg)
        fr = polynomial_roots(F[0], tf)
        gr = polynomial_roots(G[0], tg)
        y_chart = strict is _strict_y
        for rf, *_ in fr:
            if y_chart and abs(rf) > 1e-9:
                continue
            for rg, *_ in gr:
                if abs(rf - rg) < 1e-7 * max(1.0, abs(rf)):
                    v = 0.5 * (rf + rg)
                    if v != 0:
                        Fs, Gs = shift_poly(F, 0, v), shift_poly(G, 0, v)
                    else:
                        Fs, Gs = F, G
                    total += _local_intersection(Fs, Gs, depth + 1, max_depth, eps)
                    break
    return total


def intersection_number(f, g, eps=EPS_ZERO, max_depth=40):
    """Local intersection multiplicity at 0 by Noether's blow-up formula.

    Sums m_p(f) m_p(g) over the common infinitely near points. The x-chart
    covers every direction except the y-axis, which is picked up in the
    y-chart at s = 0.
    """
    f, g = _as_poly(f), _as_poly(g)
    return _local_intersection(f, g, 0, max_depth, eps)


def intersection_bound(f, g, eps=EPS_ZERO):
    value = intersection_number(f, g, eps)
    return {"intersection_number": value, "bound": f"M <= {value}"}
