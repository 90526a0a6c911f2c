import numpy as np
import pytest

from foliation_lab.blowup import (BlowupError, OneForm, blow_up_point, is_divisor_invariant,
                                  polynomial_roots)
from foliation_lab.series import TruncSeries2


def test_cusp_total_transform_is_exact():
    # f = y^2 - x^3; in the x-chart y = x t and f o pi = x^2 t^2 - x^3
    cusp = OneForm.exact(TruncSeries2.from_dict({(0, 2): 1, (3, 0): -1}, 3))
    px, py = blow_up_point(cusp)
    A, B = px.total.a, px.total.b
    assert A.to_dict(1e-14) == {(1, 2): 2, (2, 0): -3}
    assert B.to_dict(1e-14) == {(2, 1): 2}
    assert px.m == py.m == 1
    assert is_divisor_invariant(px)


def test_saddle_points_on_divisor():
    lam = 0.3 + 0.7j
    x, y = TruncSeries2.x(1), TruncSeries2.y(1)
    px, py = blow_up_point(OneForm(y, x.scale(lam)))
    found = [(p.v, p.multiplicity) for p in px.points] + [(p.v, p.multiplicity) for p in py.points]
    assert len(found) == 2
    assert all(abs(v) < 1e-14 and m == 1 for v, m in found)


def test_radial_is_dicritical():
    x, y = TruncSeries2.x(1), TruncSeries2.y(1)
    px, py = blow_up_point(OneForm(y, -x))
    assert not is_divisor_invariant(px)
    assert not is_divisor_invariant(py)
    assert px.points == [] and py.points == []


def test_translated_center():
    # singular point of (y - 1) dx + x dy sits at (0, 1)
    x, y = TruncSeries2.x(1), TruncSeries2.y(1)
    form = OneForm(y - 1.0, x)
    with pytest.raises(BlowupError):
        blow_up_point(form)
    px, _ = blow_up_point(form, center=(0, 1))
    assert px.m == 1


def test_polynomial_roots_multiplicity():
    # (v - 1)^2 (v + 2) v
    c = np.polynomial.polynomial.polyfromroots([1, 1, -2, 0])
    roots = sorted(((r.real, m) for r, m, *_ in polynomial_roots(c)))
    assert [m for _, m in roots] == [1, 1, 2]
    assert np.allclose([r for r, _ in roots], [-2, 0, 1], atol=1e-9)
