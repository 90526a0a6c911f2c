"""Command-line front end.

    foliation-lab <command> --input F [--input2 F2] [--fibration L] [--fibration2 L2]
                  [--order N] [--config FILE] [--seed S] [--out FILE]

Commands: reduce, holonomy, sliding, compare, flows-check. The report is a
single JSON document. Exit status: 0 when every verdict passes, 2 when some
verdict fails, 1 on error.
"""
from __future__ import annotations

import argparse
import cmath
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..blowup import OneForm
from ..config import load_config, thread_cap
from ..flows import (VectorField, adjoint_series, centralizer_forcing, eq1_residual, exp_flow,
                     solve_alpha, solve_u, tangency_function)
from ..reduction import REDUCED, desingularize
from ..series import JetDiffeo, TruncSeries1, TruncSeries2
from ..sliding import compare_sliding_jets, separatrix_holonomy, sliding_set
from . import report as rp
from .grammar import format_oneform, parse_oneform

COMMANDS = ("reduce", "holonomy", "sliding", "compare", "flows-check")


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class JobSpec:
    command: str
    input: str | None = None
    input2: str | None = None
    fibration: str | None = None
    fibration2: str | None = None
    order: int | None = None
    config: str | None = None
    seed: int | None = None
    out: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.order is not None and self.order < 2:
            raise ValueError("--order must be at least 2")
        needs = {"reduce": ("input",), "holonomy": ("input",), "sliding": ("input", "fibration"),
                 "compare": ("input", "input2", "fibration"), "flows-check": ()}
        for name in needs[self.command]:
            if getattr(self, name) is None:
                raise ValueError(f"{self.command} needs --{name}")
        return self


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:  # surfaced with the stage label
        raise StageError(name, exc) from exc


def _read_form(path):
    with open(path, encoding="utf-8") as fh:
        return parse_oneform(fh.read())


def _reduce(form, cfg):
    return desingularize(form, max_depth=cfg.max_depth, eps=cfg.eps_zero, q_max=cfg.q_max,
                         rtol=cfg.rational_tol)


def run(job, cfg=None):
    """Execute a job and return the report dictionary."""
    job.validate()
    cfg = cfg or load_config(job.config)
    if job.seed is not None:
        cfg = cfg.replace(seed=job.seed)
    if job.order is not None:
        cfg = cfg.replace(jet_order=job.order)
    cfg.validate()
    forms = {}
    for name in ("input", "input2", "fibration", "fibration2"):
        path = getattr(job, name)
        if path is not None:
            forms[name] = _stage(f"parse {name}", _read_form, path)
    echo = {"command": job.command, "order": cfg.jet_order, "seed": cfg.seed}
    echo.update({name: format_oneform(f) for name, f in forms.items()})
    report = rp.new_report(job.command, echo, cfg)
    handler = {"reduce": _cmd_reduce, "holonomy": _cmd_holonomy, "sliding": _cmd_sliding,
               "compare": _cmd_compare, "flows-check": _cmd_flows}[job.command]
    handler(report, forms, cfg)
    if any(not v["pass"] for v in report["verdicts"]):
        report["status"] = "verdict-fail"
    return report


# commands --------------------------------------------------------------------------

def _reduction_into(report, form, cfg, key="reduction"):
    tree, graph = _stage("reduction", _reduce, form, cfg)
    report["results"][key] = rp.reduction_section(tree, graph, cfg.q_max, cfg.rational_tol)
    report["results"][key]["indices"] = rp.indices_section(graph)
    report["verdicts"].extend(rp.index_verdicts(graph, 1e-8))
    return tree, graph


def _cmd_reduce(report, forms, cfg):
    _reduction_into(report, forms["input"], cfg)


def _cmd_holonomy(report, forms, cfg):
    _, graph = _reduction_into(report, forms["input"], cfg)
    rows = []
    for p in graph.points:
        if p.kind != REDUCED:
            report["warnings"].append(f"point {p.id} is {p.kind}; holonomy skipped")
            continue
        for label, k in sorted(p.directions.items()):
            hol, check = _stage(f"holonomy p{p.id} {label}", separatrix_holonomy, p.form, k,
                                cfg.jet_order, cfg.ode_tol, p.cs_index[label], cfg.jet_rel_tol)
            rows.append({"point": p.id, "branch": label, "jet": rp.jet(hol.jet),
                         "multiplier": rp.cnum(hol.multiplier),
                         "expected_multiplier": rp.cnum(check["expected"]),
                         "error_bars": [float(e) for e in hol.error_bars],
                         "radius": hol.rho, "loop_radius": hol.loop.radius})
            report["verdicts"].append(rp.verdict(
                f"holonomy multiplier p{p.id} {label}", check["pass"], check["relative_residual"],
                check["tolerance"]))
    report["results"]["holonomy"] = rows


def _sliding_rows(S):
    return [{"entry": key, "jet": rp.jet(h), "position": S.positions.get(key)}
            for key, h in sorted(S.entries.items())]


def _compute_sliding(form, fib, graph, cfg, stage):
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        return _stage(stage, sliding_set, form, fib, graph, order=cfg.jet_order, tol=cfg.ode_tol,
                      executor=pool)


def _cmd_sliding(report, forms, cfg):
    _, graph = _reduction_into(report, forms["input"], cfg)
    S = _compute_sliding(forms["input"], forms["fibration"], graph, cfg, "sliding")
    report["results"]["sliding"] = {"entries": _sliding_rows(S),
                                    "relations": [_relation_row(r) for r in S.relations]}
    for r in S.relations:
        if r.get("relation_residual") is None:
            continue
        report["verdicts"].append(rp.verdict(
            f"Dulac relation at p{r['point']}", r["relation_residual"] < 1e-6,
            r["relation_residual"], 1e-6, order=6))


def _relation_row(r):
    keep = ("point", "branches", "holonomy_multiplier", "sliding_multiplier", "relation_residual",
            "relation_abs_residual")
    out = {k: r.get(k) for k in keep}
    if r.get("dulac") is not None:
        out["dulac"] = rp.jet(r["dulac"])
    return out


def _cmd_compare(report, forms, cfg):
    _, g1 = _reduction_into(report, forms["input"], cfg, "reduction")
    _, g2 = _reduction_into(report, forms["input2"], cfg, "reduction2")
    fib2 = forms.get("fibration2", forms["fibration"])
    S1 = _compute_sliding(forms["input"], forms["fibration"], g1, cfg, "sliding")
    S2 = _compute_sliding(forms["input2"], fib2, g2, cfg, "sliding2")
    order = min(6, cfg.jet_order)
    cmp_ = _stage("compare", compare_sliding_jets, S1, S2, order, 1e-6)
    report["results"]["sliding"] = {"entries": _sliding_rows(S1)}
    report["results"]["sliding2"] = {"entries": _sliding_rows(S2)}
    report["results"]["comparison"] = cmp_
    report["verdicts"].append(rp.verdict("sliding jets equal", cmp_["equal"], cmp_["max_deviation"],
                                         cmp_["tolerance"], order=order))


def _cmd_flows(report, forms, cfg):
    N = cfg.jet_order
    rng = np.random.default_rng(cfg.seed)
    form = forms.get("input")
    lam = 0.3 + 0.7j
    if form is not None:
        _, graph = _reduction_into(report, form, cfg)
        origin = [p for p in graph.points if p.depth == 0 and p.kind == REDUCED]
        if not origin:
            raise StageError("flows", ValueError("flows-check needs a reduced singularity at the origin"))
        p = origin[0]
        lam = -complex(next(v for k, v in sorted(p.cs_index.items())))
    x, y = TruncSeries2.x(N), TruncSeries2.y(N)
    A = (x * y).scale(0.25) + x.scale(0.5)
    X = VectorField.model(lam, N, A)
    rows = {}

    # constant-time flow: x -> e^b x and y -> e^{-lam b} y + (order >= 2)
    b0 = 0.4 - 0.3j
    phi0 = _stage("flows", exp_flow, b0, X, N)
    r5 = float((phi0.phi1 - x.scale(cmath.exp(b0))).max_abs())
    c = phi0.phi2 - y.scale(cmath.exp(-lam * b0))
    r6 = float(max(abs(c[1, 0]), abs(c[0, 1])))
    bbar = _random_series(rng, N, 1, 0.2)
    lhs = exp_flow(bbar + TruncSeries2.constant(b0, N), X, N)
    rhs = exp_flow(b0, X, N).compose(exp_flow(bbar, X, N))
    r7 = lhs.deviation(rhs)
    rows["flow_identities"] = {"x_scaling": r5, "y_scaling_linear": r6, "composition": r7}
    report["verdicts"].append(rp.verdict("x o exp[b0]X = e^b0 x", r5 < 1e-10, r5, 1e-10))
    report["verdicts"].append(rp.verdict("y o exp[b0]X = e^(-lam b0) y + O(2)", r6 < 1e-10, r6, 1e-10))
    report["verdicts"].append(rp.verdict("exp[b0 + b]X = exp[b0]X o exp[b]X", r7 < 1e-10, r7, 1e-10))

    # alpha round trips
    tau = X(x + y)
    worst = 0.0
    for k in range(20):
        n = 2 + k % 2
        alpha = _random_series(rng, N, 0, 0.3) * (x + y)
        target = adjoint_series(x + y, tau ** (n - 1) * alpha, X, N)
        got = _stage("flows", solve_alpha, target, X, tau, n, N)
        err = float(np.max(np.abs(got.coeffs - alpha.truncate(N - n).coeffs)))
        worst = max(worst, err, eq1_residual(got, X, tau, n, target))
    rows["solve_alpha_worst_residual"] = worst
    report["verdicts"].append(rp.verdict("solve_alpha round trip", worst < 1e-9, worst, 1e-9, trials=20))

    # divisibility on the linear model pair
    F = OneForm(y.scale(lam), x)
    L = forms.get("fibration") or OneForm(TruncSeries2.one(N), TruncSeries2.one(N))
    q = tangency_function(F, L, N)
    f = (x * x * y).scale(0.5) + (y ** 3).scale(0.25)
    res = _stage("flows", solve_u, f, q, VectorField.hamiltonian(q), L, N)
    rows["solve_u"] = {"remainder_valuation": res.remainder_valuation, "n_min": res.n_min,
                       "intersection": res.intersection}
    report["verdicts"].append(rp.verdict("q divides <Phi_(f-uq)>", res.divisible,
                                         res.remainder_valuation, N, kind="valuation > order"))

    # centralizer forcing on random jets with the irrational multiplier
    mu = cmath.exp(2j * math.pi * lam)
    forced = 0.0
    verdicts = []
    for _ in range(10):
        coeffs = np.r_[0.0, mu, rng.normal(size=N - 1) + 1j * rng.normal(size=N - 1)]
        out = centralizer_forcing(JetDiffeo(TruncSeries1(coeffs, N)), N, q_max=cfg.q_max,
                                  rational_tol=cfg.rational_tol)
        forced = max(forced, out["max_forced"])
        verdicts.append(out["verdict"])
    rows["centralizer"] = {"max_forced": forced, "verdicts": verdicts}
    report["verdicts"].append(rp.verdict("centralizer forced to identity",
                                         all(v == "identity" for v in verdicts), forced, 1e-10))
    report["results"]["flows"] = rows


def _random_series(rng, order, min_val, scale):
    c = (rng.normal(size=(order + 1, order + 1)) + 1j * rng.normal(size=(order + 1, order + 1))) * scale
    s = TruncSeries2(c, order)
    mask = np.add.outer(np.arange(order + 1), np.arange(order + 1)) < min_val
    c = np.array(s.coeffs)
    c[mask] = 0
    return TruncSeries2(c, order)


# entry point -----------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="foliation-lab", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input")
    ap.add_argument("--input2")
    ap.add_argument("--fibration")
    ap.add_argument("--fibration2")
    ap.add_argument("--order", type=int)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    job = JobSpec(**vars(args))
    try:
        report = run(job)
        code = 2 if report["status"] == "verdict-fail" else 0
    except (StageError, ValueError, OSError) as exc:
        stage = exc.stage if isinstance(exc, StageError) else "setup"
        print(f"foliation-lab: error {exc}" if isinstance(exc, StageError)
              else f"foliation-lab: error [{stage}] {exc}", file=sys.stderr)
        report = {"schema_version": rp.SCHEMA_VERSION, "command": job.command, "status": "error",
                  "error": {"stage": stage, "message": str(exc)}}
        code = 1
    text = rp.dumps(report)
    if job.out:
        with open(job.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for v in report.get("verdicts", []):
        if not v["pass"]:
            print(f"foliation-lab: verdict failed: {v['name']} (residual {v['residual']}, "
                  f"tolerance {v['tolerance']})", file=sys.stderr)
    return code
