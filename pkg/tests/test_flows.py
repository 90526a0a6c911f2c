import cmath
import math

import numpy as np
import pytest

from foliation_lab.blowup import OneForm
from foliation_lab.flows import (JetMap2, NonTerminating, PreconditionError, ShapeError, SmallDivisor,
                                 VectorField, adjoint_series, centralizer_forcing,
                                 compare_linearized_generators, exp_flow, linearize_jet, solve_alpha,
                                 solve_u, tangency_function)
from foliation_lab.series import JetDiffeo, TruncSeries1, TruncSeries2


def xy(order):
    return TruncSeries2.x(order), TruncSeries2.y(order)


def test_exp_flow_of_linear_field():
    N = 6
    x, y = xy(N)
    X = VectorField.model(0.5, N)
    phi = exp_flow(0.7, X, N)
    assert phi.phi1.allclose(x.scale(math.exp(0.7)), 1e-13)
    assert phi.phi2.allclose(y.scale(math.exp(-0.35)), 1e-13)


def test_jet_map_inverse_and_push_forward():
    N = 7
    x, y = xy(N)
    phi = JetMap2(x + (x * y).scale(0.4) + (y * y).scale(0.1), y - (x * x).scale(0.3))
    assert phi.compose(phi.inverse()).deviation(JetMap2.identity(N)) < 1e-12
    # pushing forward and pulling back returns the form
    form = OneForm(y + (x * x).scale(0.2), x.scale(0.5))
    pushed = phi.push_forward(form)
    back = pushed.pullback((phi.phi1, phi.phi2))
    assert (back.a - form.a.truncate(N)).truncate(N - 1).max_abs() < 1e-10


def test_adjoint_series_needs_raising_valuation():
    N = 4
    x, y = xy(N)
    X = VectorField(x, y)  # valuation-0 time: terms 50^i / i! still large after 30
    with pytest.raises(NonTerminating):
        adjoint_series(x + y, TruncSeries2.constant(50.0, N), X, N, max_terms=30)


def test_solve_alpha_shape_errors():
    N = 6
    x, y = xy(N)
    X = VectorField.model(0.3 + 0.7j, N)
    tau = X(x + y)
    with pytest.raises(ShapeError):
        solve_alpha(x + y, X, tau, 1, N)
    with pytest.raises(ShapeError):
        solve_alpha(x + y + x * x, X, tau, 3, N)


def test_solve_u_valuation_precondition():
    N = 6
    x, y = xy(N)
    F = OneForm(y.scale(0.3 + 0.7j), x)
    L = OneForm(TruncSeries2.one(N), TruncSeries2.one(N))
    q = tangency_function(F, L, N)
    with pytest.raises(PreconditionError):
        solve_u(x, q, VectorField.hamiltonian(q), L, N, n_min=3)


def _jet(lam, seed, order=10):
    rng = np.random.default_rng(seed)
    mu = cmath.exp(2j * math.pi * lam)
    c = np.r_[0.0, mu, 0.4 * (rng.normal(size=order - 1) + 1j * rng.normal(size=order - 1))]
    return JetDiffeo(TruncSeries1(c, order))


def test_linearize_jet():
    h = _jet((math.sqrt(5) - 1) / 2, 1)
    phi = linearize_jet(h)
    lin = phi.compose(h).compose(phi.inverse())
    assert np.max(np.abs(lin.coeffs[2:])) < 1e-8
    assert abs(lin.multiplier - h.multiplier) < 1e-14


def test_linearize_resonant():
    with pytest.raises(SmallDivisor):
        linearize_jet(_jet(0.5, 2))


def test_centralizer_candidate_deviation():
    h = _jet(math.sqrt(2) - 1, 3)
    cand = TruncSeries1([0, 1, 0.2, 0.1], 10)
    out = centralizer_forcing(h, candidate=cand)
    assert out["verdict"] == "identity"
    assert any(r.get("candidate_deviation", 0) > 0.1 for r in out["rows"])
    with pytest.raises(PreconditionError):
        centralizer_forcing(h, candidate=TruncSeries1([0, 2], 10))


def test_centralizer_resonant_obstruction():
    out = centralizer_forcing(_jet(1 / 3, 4, order=8))
    assert out["verdict"] == "inconclusive"
    assert out["first_free_order"] == 4


def test_compare_linearized_generators():
    lam = math.sqrt(3) - 1
    h1 = _jet(lam, 5)
    phi = JetDiffeo(TruncSeries1([0, 1, 0.3, -0.2], 10))
    h2 = h1.conjugate_by(phi)
    out = compare_linearized_generators(h1, h2)
    assert out["heuristic"] and out["multiplier_gap"] < 1e-14
    out3 = compare_linearized_generators(h1, _jet(lam + 0.01, 5))
    assert out3["multiplier_gap"] > 1e-3
