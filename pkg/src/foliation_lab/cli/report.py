"""JSON report assembly.

Complex numbers become [re, im] pairs, jets become lists of such pairs
indexed by degree. Nothing time- or host-dependent goes into a report, so
identical inputs give byte-identical output.
"""
from __future__ import annotations

import json
import math

import numpy as np

from ..reduction import NonReducedPoint, camacho_sad_indices, is_in_class_M, verify_index_theorem
from ..series import JetDiffeo, TruncSeries1
from .grammar import format_oneform

SCHEMA_VERSION = "1.0"


def cnum(z):
    z = complex(z)
    return [_real(z.real), _real(z.imag)]


def _real(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def jet(h):
    coeffs = h.coeffs if isinstance(h, (JetDiffeo, TruncSeries1)) else h
    return [cnum(c) for c in np.asarray(coeffs)]


def plain(obj):
    """Recursively convert numpy and complex values into JSON-ready ones."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (JetDiffeo, TruncSeries1)):
        return jet(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return cnum(obj)
    if isinstance(obj, (float, np.floating)):
        return _real(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report):
    return json.dumps(plain(report), sort_keys=True, indent=2) + "\n"


def new_report(command, job, config):
    return {"schema_version": SCHEMA_VERSION, "command": command, "job": job,
            "config": config.as_dict(), "results": {}, "verdicts": [], "warnings": [],
            "status": "ok"}


def verdict(name, passed, residual, tolerance, **extra):
    out = {"name": name, "pass": bool(passed), "residual": residual, "tolerance": tolerance}
    out.update(extra)
    return out


def echo_form(form):
    return format_oneform(form)


def _direction(k):
    return None if k is None else cnum(k)


def reduction_section(tree, graph, q_max, rtol):
    nodes = [{"id": n.id, "parent": n.parent, "center_chart": n.chart.id, "component": n.component,
              "depth": n.chart.depth} for n in tree.nodes]
    comps = [{"id": c.id, "self_intersection": int(c.self_intersection),
              "multiplicity": int(c.multiplicity), "dicritical": c.is_dicritical,
              "dead_branch": c.is_dead_branch, "singular_points": list(c.singular_points)}
             for c in graph.components]
    points = []
    for p in graph.points:
        points.append({
            "id": p.id, "chart": p.chart.id, "depth": p.depth, "kind": p.kind,
            "components": [c for c in p.components],
            "eigenvalues": [cnum(e) for e in p.eigenvalues],
            "camacho_sad": {k: cnum(v) for k, v in sorted(p.cs_index.items())},
            "directions": {k: _direction(v) for k, v in sorted(p.directions.items())},
        })
    in_m, reasons = is_in_class_M(graph, q_max, rtol)
    adjacency = {str(k): v for k, v in graph.adjacency().items()}
    return {
        "n_blowups": tree.n_blowups,
        "depth": tree.depth,
        "tree": nodes,
        "divisor": {"components": comps, "adjacency": adjacency,
                    "corners": [{"components": [i, j], "point": pid} for i, j, pid in graph.corners]},
        "points": points,
        "class_M": {"member": in_m, "reasons": reasons},
    }


def index_verdicts(graph, tol):
    out = []
    for r in verify_index_theorem(graph, tol):
        if "skipped" in r:
            continue
        out.append(verdict(f"index theorem on D{r['component']}", r["pass"], r["residual"], tol,
                           index_sum=r["index_sum"], self_intersection=r["self_intersection"]))
    return out


def indices_section(graph):
    try:
        table = camacho_sad_indices(graph)
    except NonReducedPoint:
        return []
    return [{"point": pid, "branch": lab, "index": cnum(v)} for (pid, lab), v in sorted(table.items())]
