import math

import numpy as np
import pytest

from foliation_lab.blowup import OneForm
from foliation_lab.holonomy import (CurveGerm, LoopSpec, StepCollapse, dulac_map, first_integral,
                                    holonomy_jet, lift_path, multiplier_matches_index,
                                    project_along_leaves, segment)
from foliation_lab.reduction import desingularize
from foliation_lab.series import TruncSeries2


def xy(order):
    return TruncSeries2.x(order), TruncSeries2.y(order)


def test_lift_linear_model():
    # y dx + lam x dy: x y^lam is constant on leaves
    lam = 0.3 + 0.7j
    x, y = xy(1)
    form = OneForm(y, x.scale(lam))
    loop = LoopSpec(0j, 1.0)
    z0 = np.array([0.01, 0.02j])
    z1, err = lift_path(form, loop.path(), z0)
    assert np.max(np.abs(z1 - z0 * np.exp(-2j * math.pi * lam))) < 1e-10
    # a segment from y = 1 to y = 2
    z2, _ = lift_path(form, segment(1, 2), 0.01)
    assert abs(z2 - 0.01 * 2 ** (-lam)) < 1e-12


def test_nonlinear_holonomy_closed_form():
    # y dx + lam x (1 + x) dy: x/(1+x) gets multiplied by mu along the loop,
    # so h(x) = mu x / (1 + (1 - mu) x)
    N = 8
    lam = math.sqrt(2) - 1
    mu = np.exp(-2j * math.pi * lam)
    x, y = xy(N)
    h = holonomy_jet(OneForm(y, (x + x * x).scale(lam)), LoopSpec(0j, 1.0), order=N)
    exact = np.array([0] + [mu * (mu - 1) ** (k - 1) for k in range(1, N + 1)])
    assert np.max(np.abs(h.jet.coeffs - exact) / np.maximum(1, np.abs(exact))) < 1e-9
    assert np.all(h.error_bars < 1e-6)


def test_orientation_inverts_multiplier():
    lam = 1j
    x, y = xy(3)
    form = OneForm(y, x.scale(lam))
    hp = holonomy_jet(form, LoopSpec(0j, 1.0, orientation=1), order=4)
    hm = holonomy_jet(form, LoopSpec(0j, 1.0, orientation=-1), order=4)
    assert abs(hp.multiplier * hm.multiplier - 1) < 1e-10


def test_multiplier_matches_camacho_sad_index():
    lam = 0.3 + 0.7j
    x, y = xy(3)
    form = OneForm(y, x.scale(lam))
    _, graph = desingularize(form)
    index = graph.points[0].cs_index["sep:u=0"]
    h = holonomy_jet(form, LoopSpec(0j, 1.0), order=4)
    assert multiplier_matches_index(h, index)["pass"]


def test_cusp_separatrix_holonomy_is_finite_order(corpus):
    # the cusp has a first integral, so every holonomy is periodic
    _, graph = desingularize(corpus("cusp"))
    p = next(p for p in graph.points if not p.is_corner)
    h = holonomy_jet(p.form, LoopSpec(0j, 0.5), order=6, along="v=0")
    mu = h.multiplier
    q = next(q for q in range(1, 13) if abs(mu ** q - 1) < 1e-8)
    assert np.max(np.abs(h.jet.iterate(q).coeffs[2:])) < 1e-6


def test_step_collapse_in_thin_tube():
    x, y = xy(1)
    form = OneForm(y, x.scale(0.5 + 0.5j))
    with pytest.raises(StepCollapse):
        lift_path(form, LoopSpec(0j, 1.0).path(), 0.1, tube=0.05)


def test_dulac_map_closed_form():
    # leaves of x + y + y^2 = c go from (0, z) to (z + z^2, 0)
    x, y = xy(3)
    d = dulac_map(OneForm.exact(x + y + y * y), order=6)
    expected = [0, 1, 1, 0, 0, 0, 0]
    assert np.max(np.abs(d.coeffs - expected)) < 1e-10


def test_first_integral_is_constant_on_leaves():
    N = 8
    x, y = xy(N)
    form = OneForm(TruncSeries2.one(N) + (x * y).scale(0.3), TruncSeries2.one(N).scale(2) + x * x)
    H = first_integral(form, N)
    # a H_y - b H_x vanishes through order N - 1
    wedge = form.a * H.diff_y() - form.b * H.diff_x()
    assert wedge.truncate(N - 1).max_abs() < 1e-12


def test_projection_along_leaves():
    # L = d(y - x^2): from the diagonal (s, s) to the y-axis, s -> s - s^2
    N = 6
    x, y = xy(N)
    L = OneForm.exact(y - x * x)
    p = project_along_leaves(L, CurveGerm.line(1, 1, N), CurveGerm.line(0, 1, N), N)
    assert np.max(np.abs(p.coeffs - [0, 1, -1, 0, 0, 0, 0])) < 1e-12
