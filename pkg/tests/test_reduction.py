import math

import pytest

from foliation_lab.blowup import OneForm
from foliation_lab.reduction import (NON_REDUCED, REDUCED, SADDLE_NODE, MaxDepthExceeded, NotCoprime,
                                     NonIsolatedSingularity, camacho_sad_indices, check_isolated,
                                     classify, desingularize, intersection_number, is_in_class_M,
                                     is_rational, verify_index_theorem)
from foliation_lab.series import TruncSeries2


def xy(order=3):
    return TruncSeries2.x(order), TruncSeries2.y(order)


@pytest.mark.parametrize("z,expected", [
    (0.5, True), (1 / 3, True), (-7 / 11, True), (1e-13, True),
    (math.sqrt(2), False), (0.5 + 1e-3j, False), (math.pi, False),
])
def test_is_rational(z, expected):
    assert is_rational(z) is expected


def test_is_rational_denominator_bound():
    assert is_rational(1 / 997)
    assert not is_rational(1 / 1009, tol=1e-12)


def test_classify_kinds():
    x, y = xy(2)
    assert classify(OneForm(y, x.scale(math.sqrt(2))))[0] == REDUCED
    assert classify(OneForm(y, -x))[0] == NON_REDUCED  # radial, ratio 1
    assert classify(OneForm(-y, x * x))[0] == SADDLE_NODE
    assert classify(OneForm(x * x, y * y))[0] == NON_REDUCED


def test_linear_saddle_indices():
    lam = 0.3 + 0.7j
    x, y = xy(1)
    _, graph = desingularize(OneForm(y, x.scale(lam)))
    (p,) = graph.points
    # eigenvalues lam and -1, so the indices are -lam and -1/lam
    idx = sorted(p.cs_index.values(), key=abs)
    assert abs(idx[0] + lam) < 1e-14
    assert abs(idx[1] + 1 / lam) < 1e-14


def test_cusp_reduction(corpus):
    tree, graph = desingularize(corpus("cusp"))
    assert tree.n_blowups == 3
    assert sorted(c.self_intersection for c in graph.components) == [-3, -2, -1]
    assert all(p.is_reduced for p in graph.points)
    assert len(graph.corners) == 2
    assert all(r["pass"] for r in verify_index_theorem(graph))
    ok, reasons = is_in_class_M(graph)
    assert not ok and reasons  # rational indices


def test_index_theorem_with_irrational_indices(corpus):
    _, graph = desingularize(corpus("homogeneous1"))
    reports = verify_index_theorem(graph)
    assert reports and all(r["pass"] for r in reports)
    assert len(camacho_sad_indices(graph)) >= 3


def test_dicritical_components_are_skipped(corpus):
    _, graph = desingularize(corpus("radial"))
    assert graph.components[0].is_dicritical
    assert verify_index_theorem(graph)[0]["skipped"] == "dicritical"


def test_max_depth(corpus):
    with pytest.raises(MaxDepthExceeded):
        desingularize(corpus("cusp"), max_depth=1)


@pytest.mark.parametrize("a,b", [
    ({(1, 1): 1}, {(2, 0): 1}),                              # x (y dx + x dy)
    ({(0, 1): 1, (2, 0): -1}, {(0, 2): 1, (2, 1): -1}),      # (y - x^2) (dx + y dy)
    ({(2, 0): 1, (1, 1): 2, (0, 2): 1}, {(2, 0): 2, (1, 1): 4, (0, 2): 2, (3, 0): 1, (2, 1): 1}),
])
def test_non_isolated(a, b):
    form = OneForm.from_dicts(a, b)
    with pytest.raises(NonIsolatedSingularity):
        check_isolated(form)
    with pytest.raises(NonIsolatedSingularity):
        desingularize(form)


def test_isolated_forms_pass(corpus):
    for name in ("cusp", "homogeneous2", "logform_pushed", "fib_log"):
        assert check_isolated(corpus(name))


def test_intersection_basics():
    cusp = {(0, 2): 1, (3, 0): -1}
    assert intersection_number(cusp, {(0, 1): 1}) == 3
    assert intersection_number(cusp, {(1, 0): 1}) == 2
    assert intersection_number(cusp, {(0, 2): 1, (3, 0): -2}) == 6
    # curves not through the origin
    assert intersection_number(cusp, {(0, 0): 1, (1, 0): 1}) == 0
    # tangent smooth curves y = x^2 and y = -x^2 meet with multiplicity 2
    assert intersection_number({(0, 1): 1, (2, 0): -1}, {(0, 1): 1, (2, 0): 1}) == 2


def test_intersection_common_component():
    with pytest.raises(NotCoprime):
        intersection_number({(1, 1): 1}, {(1, 0): 1, (2, 0): 1})
