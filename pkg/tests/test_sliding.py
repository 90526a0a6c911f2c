import math

import numpy as np
import pytest

from foliation_lab.blowup import OneForm
from foliation_lab.flows import JetMap2
from foliation_lab.reduction import desingularize
from foliation_lab.series import TruncSeries2
from foliation_lab.sliding import (ExhaustedDraws, IndexMismatch, SlidingError, SlidingSet,
                                   combine_fibrations, compare_sliding_jets,
                                   family_candidates_from_conjugacy, family_membership, jet_residual,
                                   point_sliding, sliding_set, tangent_curve)


def xy(order):
    return TruncSeries2.x(order), TruncSeries2.y(order)


@pytest.mark.parametrize("lam", [math.sqrt(2), 0.3 + 0.7j, -1j])
@pytest.mark.parametrize("c", [1, -2, 1j, 0.5 - 0.25j])
def test_direction_law(lam, c):
    N = 6
    x, y = xy(N)
    F = OneForm(y.scale(lam), x)
    L = OneForm(TruncSeries2.one(N), TruncSeries2.constant(-c, N))
    br = tangent_curve(F, L, N).branches[0]
    assert br.transverse
    assert abs(br.direction * c * lam + 1) < 1e-10


def test_point_sliding_linear_model():
    lam = 0.3 + 0.7j
    N = 8
    x, y = xy(N)
    F = OneForm(y, x.scale(lam))
    L = OneForm.exact(x - y + (x * x).scale(0.5))
    _, graph = desingularize(F)
    p = graph.points[0]
    res = point_sliding(p.form, L, p.directions, order=6)
    s1, s2 = res.labels
    assert res.relation_residual < 1e-6
    # the sliding comes from the loop around the corner of the extra blow-up,
    # where the new divisor has index 1/(s - 1) for a separatrix index s
    idx = p.cs_index[s1]
    assert abs(res.holonomy_multiplier - np.exp(2j * math.pi / (idx - 1))) < 1e-8
    for lab in (s1, s2):
        assert abs(res.jets[lab][1] - res.holonomy_multiplier) < 1e-8


def test_jet_residual_is_mixed():
    from foliation_lab.series import JetDiffeo, TruncSeries1
    a = JetDiffeo(TruncSeries1([0, 1, 1e6], 3))
    b = JetDiffeo(TruncSeries1([0, 1, 1e6 + 1], 3))
    absdev, mixed = jet_residual(a, b, 3)
    assert absdev == 1.0 and mixed < 1.1e-6


@pytest.fixture(scope="module")
def homog_slidings():
    from conftest import corpus_form
    F, L = corpus_form("homogeneous1"), corpus_form("fib_homog")
    _, graph = desingularize(F)
    return F, L, graph, sliding_set(F, L, graph, order=6)


def test_sliding_set_entries(homog_slidings):
    _, _, graph, S = homog_slidings
    assert len(S.entries) == len(graph.points)
    assert all(r["relation_residual"] < 1e-6 for r in S.relations)
    assert all(key.startswith("D") for key in S.entries)


def test_compare_self_is_zero(homog_slidings):
    S = homog_slidings[3]
    out = compare_sliding_jets(S, S)
    assert out["max_deviation"] == 0.0 and out["equal"]


def test_compare_index_mismatch(homog_slidings):
    S = homog_slidings[3]
    key = sorted(S.entries)[0]
    partial = SlidingSet({k: v for k, v in S.entries.items() if k != key}, {}, [], [])
    with pytest.raises(IndexMismatch):
        compare_sliding_jets(S, partial)


def test_family_membership(homog_slidings):
    _, L0, graph, _ = homog_slidings
    N = 8
    x, y = xy(N)
    assert family_membership(L0, L0, graph, order=6)["member"]
    # identity through order 2 lifts to a map fixing the divisor to second order
    phi = JetMap2(x + (x * x * y).scale(0.3), y - (y * y * x).scale(0.2) + (x ** 3).scale(0.4))
    assert family_membership(family_candidates_from_conjugacy(L0, phi), L0, graph, order=6)["member"]
    phi2 = JetMap2(x + (x * x).scale(0.3), y + (x * y).scale(0.25))
    out = family_membership(family_candidates_from_conjugacy(L0, phi2), L0, graph, order=6)
    assert not out["member"] and out["failures"]


def test_combine_fibrations(homog_slidings):
    _, L0, graph, _ = homog_slidings
    N = 8
    x, y = xy(N)
    L1 = family_candidates_from_conjugacy(L0, JetMap2(x + (x * x).scale(0.3), y + (x * y).scale(0.25)))
    cf = combine_fibrations([L0, L1], graph, seed=3)
    assert all(e["ok"] for e in cf.certificate)
    again = combine_fibrations([L0, L1], graph, seed=3)
    assert again.coefficients == cf.coefficients


def test_regular_fibrations_cannot_be_transverse(homog_slidings):
    # the pull-back of dx or dy has no dv part on the divisor
    graph = homog_slidings[2]
    x, y = xy(1)
    with pytest.raises(ExhaustedDraws):
        combine_fibrations([OneForm.exact(x), OneForm.exact(y)], graph, max_draws=50)


def test_saddle_node_rejected():
    x, y = xy(2)
    F = OneForm(-y, x * x)
    _, graph = desingularize(F)
    with pytest.raises(SlidingError):
        sliding_set(F, OneForm.exact(x + y), graph, order=4)
