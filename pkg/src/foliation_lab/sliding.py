"""Tangent curves, slidings and their comparison between foliation/fibration pairs.

At a reduced point the two local invariant branches are called S1 and S2.
S1 is the branch ``{u = 0}`` when it is invariant (a divisor component),
otherwise the first separatrix in label order. The loop generating the
holonomy on the tangent curve turns positively around the puncture that S1
leaves on the extra exceptional line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blowup import OneForm, apply_chart, blow_up_point
from .config import DEFAULT
from .holonomy import (CurveGerm, LoopSpec, TransversalityError, compose_curve, dulac_map,
                       first_integral, holonomy_jet, leaf_arrays, multiplier_matches_index,
                       project_along_leaves)
from .reduction import REDUCED, DivisorGraph
from .series import EPS_ZERO, JetDiffeo, TruncSeries1, TruncSeries2


class SlidingError(RuntimeError):
    pass


class IdenticalFoliations(SlidingError):
    pass


class ExhaustedDraws(SlidingError):
    pass


class IndexMismatch(SlidingError):
    pass


MARGIN = 4


# curve germs -----------------------------------------------------------------------

def _graph_curve(phi, over):
    """{v = phi(u)} (over='u') or {u = phi(v)} (over='v') as a parametrized germ."""
    order = phi.order
    ident = TruncSeries1.identity(order)
    return CurveGerm(ident, phi) if over == "u" else CurveGerm(phi, ident)


def _solve_graph(residual, order, lead, shift=0):
    """Solve residual(phi) = 0 order by order for phi = lead z + ...

    ``residual`` maps a TruncSeries1 to a TruncSeries1 whose coefficient
    ``n - shift`` depends affinely on phi_n and not on higher coefficients.
    """
    c = np.zeros(order + 1, complex)
    c[1] = lead
    for n in range(2, order + 1):
        c[n] = 0
        r0 = residual(TruncSeries1(c, order))[n - shift]
        c[n] = 1
        r1 = residual(TruncSeries1(c, order))[n - shift]
        slope = r1 - r0
        if abs(slope) <= 1e-13 * max(1.0, abs(r0)):
            raise SlidingError(f"degenerate coefficient equation at order {n} (resonance)")
        c[n] = -r0 / slope
    return TruncSeries1(c, order)


def invariant_branch(form, direction, order):
    """Jet of the invariant curve of ``form`` with the given tangent direction.

    ``direction`` is dv/du, or None for a branch tangent to {u = 0}.
    """
    a = form.a.truncate(order)
    b = form.b.truncate(order)
    if direction is None:
        def res(psi):
            curve = CurveGerm(psi, TruncSeries1.identity(order))
            return compose_curve(a, curve) * psi.derivative() + compose_curve(b, curve)
        return _graph_curve(_solve_graph(res, order, 0.0), "v")

    def res(phi):
        curve = CurveGerm(TruncSeries1.identity(order), phi)
        return compose_curve(a, curve) + compose_curve(b, curve) * phi.derivative()
    return _graph_curve(_solve_graph(res, order, direction), "u")


def implicit_branch(q, order, over=None):
    """Smooth branch of {q = 0} at the origin as a graph over u or v."""
    qu, qv = q[1, 0], q[0, 1]
    if max(abs(qu), abs(qv)) <= EPS_ZERO:
        raise SlidingError("curve is singular at the origin")
    if over is None:
        over = "u" if abs(qu) <= abs(qv) else "v"
    if over == "u":
        lead = -qu / qv
        fn = lambda phi: compose_curve(q, CurveGerm(TruncSeries1.identity(order), phi))
    else:
        lead = -qv / qu
        fn = lambda phi: compose_curve(q, CurveGerm(phi, TruncSeries1.identity(order)))
    phi = _solve_graph(fn, order, lead)
    return _graph_curve(phi, over), over


def branch_direction(curve):
    """dv/du of a curve germ (None when tangent to {u = 0})."""
    dx, dy = curve.x[1], curve.y[1]
    if abs(dx) <= 1e-14 * max(1.0, abs(dy)):
        return None
    return dy / dx


# tangent curves ------------------------------------------------------------------

@dataclass
class TangentBranch:
    point: int | None
    curve: CurveGerm
    over: str
    direction: complex | None
    direction_ratio: complex
    transverse: bool


@dataclass
class TangentCurve:
    q: TruncSeries2
    branches: list = field(default_factory=list)


def tangency_series(form_f, form_l, order):
    """q = d a - c b for F = a du + b dv and L = c du + d dv."""
    a, b = form_f.a.truncate(order), form_f.b.truncate(order)
    c, d = form_l.a.truncate(order), form_l.b.truncate(order)
    return d * a - c * b


def _tangent_branch(form_f, form_l, order, directions, point_id=None):
    q = tangency_series(form_f, form_l, order)
    if q.is_zero(EPS_ZERO * max(1.0, q.max_abs(), form_f.max_abs())):
        raise IdenticalFoliations("tangency series vanishes: F and L coincide")
    curve, over = implicit_branch(q, order)
    qu, qv = q[1, 0], q[0, 1]
    ratio = qv / qu if abs(qu) > 0 else complex("inf")
    k = branch_direction(curve)
    transverse = all(not _same_direction(k, s) for s in directions)
    return TangentBranch(point_id, curve, over, k, ratio, transverse), q


def _same_direction(k1, k2, tol=1e-8):
    if k1 is None or k2 is None:
        return k1 is None and k2 is None or (k1 is None and abs(1 / k2) < tol) or (
            k2 is None and abs(1 / k1) < tol)
    return abs(k1 - k2) < tol * max(1.0, abs(k1))


def tangent_curve(form_f, form_l, order=DEFAULT.jet_order, graph=None, fibration_charts=None):
    """Tangent curve q = d a - c b and its smooth branches at the reduced points.

    Without a graph the branch at the origin is returned, with transversality
    tested against the eigen-directions of F there.
    """
    K = order
    q = tangency_series(form_f, form_l, K)
    tc = TangentCurve(q)
    if graph is None or not graph.components:
        from .reduction import classify
        _, _, _, _, dirs = classify(form_f)
        br, _ = _tangent_branch(form_f, form_l, K, list(dirs.values()))
        tc.branches.append(br)
        return tc
    for p in graph.points:
        lf = apply_chart(form_l, p.chart)
        br, _ = _tangent_branch(p.form, lf, K, list(p.directions.values()), p.id)
        tc.branches.append(br)
    return tc


# slidings -----------------------------------------------------------------------

@dataclass
class PointSliding:
    point: int
    labels: tuple
    jets: dict
    holonomy_multiplier: complex
    tangent_direction: complex | None
    dulac: JetDiffeo | None = None
    dulac_errors: np.ndarray | None = None
    relation_residual: float | None = None
    relation_abs_residual: float | None = None


def _branch_labels(directions):
    labels = sorted(directions, key=lambda s: (directions[s] is not None, not s.startswith("D"), s))
    if len(labels) != 2:
        raise SlidingError("point does not have exactly two invariant branches")
    return labels[0], labels[1]


def _puncture(direction, chart_kind):
    """Coordinate on the new line of the branch with slope dv/du = direction."""
    if chart_kind == "x":
        return math.inf if direction is None else complex(direction)
    if direction is None:
        return 0j
    return math.inf if abs(direction) == 0 else 1.0 / complex(direction)


def _zeta0(t1, t2, pt):
    if _inf(t1):
        return 1.0 / (pt - t2)
    if _inf(t2):
        return pt - t1
    return (pt - t1) / (pt - t2)


def _inf(z):
    return not np.isfinite(complex(z))


def point_sliding(form_f, form_l, directions, order=DEFAULT.jet_order, tol=DEFAULT.ode_tol,
                  point_id=0, with_dulac=True, rel_tol=DEFAULT.jet_rel_tol):
    """Slidings on both local branches of a reduced nondegenerate point at the origin."""
    K = order + MARGIN
    s1, s2 = _branch_labels(directions)
    k1, k2 = directions[s1], directions[s2]
    c0, d0 = form_l.a[0, 0], form_l.b[0, 0]
    if max(abs(c0), abs(d0)) <= EPS_ZERO:
        raise TransversalityError(f"fibration singular at point {point_id}")
    k_l = None if abs(d0) <= EPS_ZERO * abs(c0) else -c0 / d0
    for lab, k in ((s1, k1), (s2, k2)):
        if _same_direction(k_l, k, 1e-6):
            raise TransversalityError(f"fibration tangent to branch {lab} at point {point_id}")
    tb, q = _tangent_branch(form_f, form_l, K, [k1, k2], point_id)
    if not tb.transverse:
        raise TransversalityError(f"tangent curve not transverse to the separatrices at point {point_id}")
    if _same_direction(k_l, tb.direction, 1e-6):
        raise TransversalityError(f"fibration tangent to the tangent curve at point {point_id}")

    # extra blow-up at the point; the tangent curve lands at p_T
    kind = "x" if tb.over == "u" else "y"
    px, py = blow_up_point(form_f, (0, 0))
    pb = px if kind == "x" else py
    phi = tb.curve.y if kind == "x" else tb.curve.x  # T: v = phi(u) or u = phi(v)
    tilde = TruncSeries1(phi.coeffs[1:], K - 1).truncate(K - 1)
    p_t = complex(tilde[0])
    t1, t2 = _puncture(k1, kind), _puncture(k2, kind)
    loop = LoopSpec(t1, _zeta0(t1, t2, p_t), t2)
    hol = holonomy_jet(pb.strict, loop, order=order, tol=tol, rel_tol=rel_tol)

    # transport between the vertical transversal and the strict transform of T
    local = pb.strict.translate((0, p_t)).truncate(K)
    G = first_integral(local, K)
    w = tilde - p_t
    rho_series = compose_curve(G, CurveGerm(TruncSeries1.identity(K - 1), w))
    rho = JetDiffeo(rho_series.truncate(order))
    h_t = rho.inverse().compose(hol.jet).compose(rho)

    # projections along the fibration onto each branch
    t_curve = CurveGerm(tb.curve.x.truncate(order), tb.curve.y.truncate(order))
    H = first_integral(form_l.truncate(K), K).truncate(order)
    jets = {}
    curves = {}
    for lab, k in ((s1, k1), (s2, k2)):
        curve = invariant_branch(form_f.truncate(K), k, order)
        curves[lab] = curve
        pi = project_along_leaves(form_l, t_curve, curve, order, H=H)
        jets[lab] = pi.compose(h_t).compose(pi.inverse())
    out = PointSliding(point_id, (s1, s2), jets, hol.multiplier, tb.direction)
    if with_dulac:
        d, err = _dulac_between(form_l, curves[s1], curves[s2], order, tol, K)
        out.dulac, out.dulac_errors = d, err
        pushed = d.compose(jets[s1]).compose(d.inverse())
        out.relation_abs_residual, out.relation_residual = jet_residual(pushed, jets[s2], 6)
    return out


def jet_residual(h1, h2, order=6):
    """Absolute and mixed residuals |dc_j| and |dc_j|/max(1, |c_j|) through ``order``."""
    c1 = h1.coeffs[:order + 1]
    c2 = h2.coeffs[:order + 1]
    diff = np.abs(c1 - c2)
    scale = np.maximum(1.0, np.maximum(np.abs(c1), np.abs(c2)))
    return float(diff.max()), float((diff / scale).max())


def _axis_sum(f, g, order):
    """f(u) + g(v) as a bivariate series."""
    c = np.zeros((order + 1, order + 1), complex)
    c[:, 0] += f.truncate(order).coeffs
    c[0, :] += g.truncate(order).coeffs
    return TruncSeries2(c, order)


def _dulac_between(form_l, c1, c2, order, tol, K):
    """Numerical Dulac map of L from branch c1 to c2.

    Works in coordinates (u', v') with Psi(u', v') = c2(u') + c1(v'), which
    sends {u' = 0} to c1 and {v' = 0} to c2 with matching parameters.
    """
    psi1 = _axis_sum(c2.x, c1.x, K)
    psi2 = _axis_sum(c2.y, c1.y, K)
    if psi1.allclose(TruncSeries2.x(K), 0) and psi2.allclose(TruncSeries2.y(K), 0):
        straight = form_l
    else:
        straight = form_l.truncate(K).pullback((psi1, psi2))
    return dulac_map(straight, order=order, tol=tol, return_errors=True)


def straighten_branch(form, direction, order):
    """Move the invariant branch with the given direction onto a coordinate axis.

    Returns ``(form, along)`` where the branch is ``{u = 0}`` or ``{v = 0}``.
    """
    curve = invariant_branch(form.truncate(order), direction, order)
    over = "v" if direction is None else "u"
    graph = curve.x if over == "v" else curve.y
    along = "u=0" if over == "v" else "v=0"
    if np.max(np.abs(graph.coeffs)) <= EPS_ZERO:
        return form, along
    x, y = TruncSeries2.x(order), TruncSeries2.y(order)
    c = np.zeros((order + 1, order + 1), complex)
    if over == "u":
        c[:, 0] = graph.coeffs
        return form.truncate(order).pullback((x, y + TruncSeries2(c, order))), along
    c[0, :] = graph.coeffs
    return form.truncate(order).pullback((x + TruncSeries2(c, order), y)), along


def _loop_radius(form, along, cap=1.0):
    """Half the distance from the origin to the nearest other zero on the branch."""
    _, Q = leaf_arrays(form, along)
    row = np.trim_zeros(Q[0, :], "b")
    nz = np.flatnonzero(np.abs(row) > EPS_ZERO * max(1.0, np.max(np.abs(row), initial=0.0)))
    if nz.size < 2:
        return cap
    roots = np.roots(row[nz[0]: nz[-1] + 1][::-1])
    roots = roots[np.abs(roots) > 1e-12]
    if roots.size == 0:
        return cap
    return min(cap, 0.5 * float(np.min(np.abs(roots))))


def separatrix_holonomy(form, direction, order=DEFAULT.jet_order, tol=DEFAULT.ode_tol,
                        index=None, rel_tol=DEFAULT.jet_rel_tol):
    """Local holonomy of an invariant branch through the origin.

    The loop turns once positively around the origin inside the branch. With
    ``index`` the multiplier is checked against exp(2 pi i index).
    """
    K = order + MARGIN
    straight, along = straighten_branch(form, direction, K)
    if straight is not form:
        straight = straight.truncate(K)
    loop = LoopSpec(0j, _loop_radius(straight, along))
    hol = holonomy_jet(straight, loop, order=order, along=along, tol=tol, rel_tol=rel_tol)
    check = None if index is None else multiplier_matches_index(hol, index)
    return hol, check


def sliding_jet(form_f, form_l, point, branch=None, order=DEFAULT.jet_order, tol=DEFAULT.ode_tol):
    """Sliding of (F, L) on one branch at a reduced point of a divisor graph.

    ``point`` is a SingularPoint (its chart locates F and L) and ``branch`` a
    label from ``point.directions`` (default: S1).
    """
    if point.kind != REDUCED:
        raise SlidingError(f"point {point.id} is {point.kind}; a nondegenerate reduced point is required")
    lf = apply_chart(form_l, point.chart)
    res = point_sliding(point.form, lf, point.directions, order, tol, point.id, with_dulac=False)
    return res.jets[branch or res.labels[0]]


@dataclass
class SlidingSet:
    entries: dict
    positions: dict
    points: list
    relations: list
    foliation: str = ""
    fibration: str = ""


def _entry_key(label, pid):
    return f"{label}@p{pid}"


def sliding_set(form_f, form_l, graph, order=DEFAULT.jet_order, tol=DEFAULT.ode_tol,
                foliation_id="F", fibration_id="L", executor=None):
    """One sliding jet per (component, point); corner entries on the second
    component are derived from the first through the Dulac map."""
    points = [p for p in graph.points]
    for p in points:
        if p.kind != REDUCED:
            raise SlidingError(f"point {p.id} is {p.kind}")

    def work(p):
        try:
            lf = apply_chart(form_l, p.chart)
            return point_sliding(p.form, lf, p.directions, order, tol, p.id)
        except Exception as exc:  # surfaced with location
            raise SlidingError(f"sliding at point {p.id} ({p.chart.id}): {exc}") from exc

    results = list(executor.map(work, points)) if executor else [work(p) for p in points]
    entries, positions, relations = {}, {}, []
    for p, res in zip(points, results):
        s1, s2 = res.labels
        if not graph.components:
            entries[_entry_key(s1, p.id)] = res.jets[s1]
            positions[_entry_key(s1, p.id)] = p.chart.id
        else:
            for lab in (s1, s2):
                if not lab.startswith("D"):
                    continue
                key = _entry_key(lab, p.id)
                if lab == s2 and s1.startswith("D"):
                    # derived through the Dulac map (corner redundancy)
                    entries[key] = res.dulac.compose(res.jets[s1]).compose(res.dulac.inverse())
                else:
                    entries[key] = res.jets[lab]
                positions[key] = p.chart.id
        relations.append({
            "point": p.id, "branches": [s1, s2],
            "holonomy_multiplier": res.holonomy_multiplier,
            "sliding_multiplier": res.jets[s1][1],
            "relation_residual": res.relation_residual,
            "relation_abs_residual": res.relation_abs_residual,
            "direct": {lab: res.jets[lab] for lab in (s1, s2)},
            "dulac": res.dulac,
        })
    return SlidingSet(entries, positions, [p.id for p in points], relations, foliation_id, fibration_id)


def compare_sliding_jets(S, S2, order=6, tol=1e-6):
    """Coefficient-wise deviation between two sliding sets up to ``order``.

    Deviations are mixed absolute/relative, |dc_j| / max(1, |c_j|).
    """
    if set(S.entries) != set(S2.entries):
        raise IndexMismatch(f"entry sets differ: {sorted(set(S.entries) ^ set(S2.entries))}")
    rows = []
    for key in sorted(S.entries):
        a, b = S.entries[key], S2.entries[key]
        n = min(order, a.order, b.order)
        absdev, dev = jet_residual(a, b, n)
        rows.append({"entry": key, "deviation": dev, "abs_deviation": absdev, "equal": dev < tol})
    worst = max((r["deviation"] for r in rows), default=0.0)
    return {"entries": rows, "max_deviation": worst, "tolerance": tol, "order": order,
            "equal": worst < tol}


# fibrations ---------------------------------------------------------------------

@dataclass
class CombinedFibration:
    form: OneForm
    coefficients: list
    certificate: list
    draws: int


def _transversality_data(form_l, point):
    lf = apply_chart(form_l, point.chart)
    return complex(lf.a[0, 0]), complex(lf.b[0, 0])


def combine_fibrations(candidates, graph, seed=DEFAULT.seed, max_draws=1000, tol=1e-8):
    """Generic integer combination of fibrations transverse at every marked point."""
    if not candidates:
        raise ValueError("no candidate fibrations")
    data = [[_transversality_data(c, p) for p in graph.points] for c in candidates]
    rng = np.random.default_rng(seed)

    def certify(coeffs):
        cert = []
        ok = True
        for j, p in enumerate(graph.points):
            a = sum(ci * data[i][j][0] for i, ci in enumerate(coeffs))
            b = sum(ci * data[i][j][1] for i, ci in enumerate(coeffs))
            k_l = None if abs(b) <= tol * max(1.0, abs(a)) else -a / b
            sep_ok = all(not _same_direction(k_l, k, 1e-6) for k in p.directions.values())
            good = abs(a) > tol and abs(b) > tol and sep_ok
            ok &= good
            cert.append({"point": p.id, "a": a, "b": b, "separatrices_transverse": sep_ok, "ok": good})
        return ok, cert

    if len(candidates) == 1:
        ok, cert = certify([1])
        return CombinedFibration(candidates[0], [1], cert, 0)
    for draw in range(1, max_draws + 1):
        coeffs = [int(c) for c in rng.integers(-9, 10, size=len(candidates))]
        if not any(coeffs):
            continue
        ok, cert = certify(coeffs)
        if ok:
            form = candidates[0].scale(coeffs[0])
            for c, cand in zip(coeffs[1:], candidates[1:]):
                if c:
                    form = form + cand.scale(c)
            return CombinedFibration(form, coeffs, cert, draw)
    raise ExhaustedDraws(f"no transverse combination in {max_draws} draws")


def _leaf_through_origin(form, order, over=None):
    H = first_integral(form.truncate(order), order)
    return implicit_branch(H, order, over)


def family_membership(form_l, form_l0, graph, order=DEFAULT.jet_order, tol=1e-6,
                      ode_tol=DEFAULT.ode_tol):
    """Same Dulac maps at the corners and tangent invariant curves at the singular points."""
    failures = []
    corners = []
    tangency = []
    for p in graph.points:
        l1 = apply_chart(form_l, p.chart)
        l0 = apply_chart(form_l0, p.chart)
        if abs(l1.a[0, 0]) <= EPS_ZERO and abs(l1.b[0, 0]) <= EPS_ZERO:
            failures.append(f"fibration is singular at point {p.id}")
            continue
        if p.is_corner:
            try:
                d1 = dulac_map(l1, order=order, tol=ode_tol)
            except TransversalityError:
                failures.append(f"fibration is tangent to a branch at corner point {p.id}")
                continue
            d0 = dulac_map(l0, order=order, tol=ode_tol)
            n = min(order, 6)
            res = float(np.max(np.abs(d1.coeffs[: n + 1] - d0.coeffs[: n + 1])))
            corners.append({"point": p.id, "components": list(p.components), "dulac_residual": res})
            if res >= tol:
                failures.append(f"Dulac maps differ at corner point {p.id} (residual {res:.3g})")
        c0, over = _leaf_through_origin(l0, order)
        try:
            c1, _ = _leaf_through_origin(l1, order, over)
            diff = (c1.y - c0.y) if over == "u" else (c1.x - c0.x)
            contact = diff.valuation(1e-9)
            contact = order + 1 if contact == math.inf else int(contact)
        except (SlidingError, ZeroDivisionError):
            contact = 1
        tangency.append({"point": p.id, "tangency_order": contact})
        if contact < 2:
            failures.append(f"invariant curves of the fibrations are not tangent at point {p.id}")
    return {"member": not failures, "corners": corners, "tangency": tangency, "failures": failures,
            "tolerance": tol}


def family_candidates_from_conjugacy(form_l0, phi):
    """Phi^* of a base fibration: a member of its family when Phi lifts to the identity on the divisor."""
    if hasattr(phi, "phi1"):
        phi = (phi.phi1, phi.phi2)
    return form_l0.pullback(phi)
