from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ezheston.errors import ComplexA4, ParameterError
from ezheston.finite_solver import (
    RiccatiCoeffs,
    TimeGrid,
    integral_form_A0,
    integrate_riccati,
    riccati_closed_form,
    riccati_closed_form_derivative,
    solve_finite,
    solve_general_eis_finite,
    solve_unit_eis_finite,
    strategy_finite,
    unit_riccati_coeffs,
    value_function_finite,
)
from ezheston.infinite_solver import solve_unit_eis
from ezheston.model import CaseTag, reference_params


@pytest.fixture
def fin_unit():
    return reference_params(phi=1.0)


def test_boundary_values(ref, fin_unit):
    path = solve_unit_eis_finite(*fin_unit)
    assert path.A1[0] == 0.0 and path.A0[0] == 0.0
    m, p = ref
    g = solve_general_eis_finite(m, p)
    assert g.A1[0] == 0.0 and g.A0[0] == 0.0
    assert g.zeta4[0] == pytest.approx(p.beta**p.phi, rel=1e-15)
    assert g.zeta3[0] == pytest.approx(p.beta**p.phi * (1 - p.phi * math.log(p.beta)), rel=1e-15)


def test_epsilon_boundary(ref):
    m, p = ref
    assert solve_general_eis_finite(m, replace(p, epsilon=2.0)).A0[0] == pytest.approx((p.phi - 1) * math.log(2.0))
    assert solve_unit_eis_finite(m, replace(p, phi=1.0, epsilon=2.0)).A0[0] == pytest.approx(math.log(2.0))


def test_closed_form_matches_rk4(fin_unit):
    closed = solve_unit_eis_finite(*fin_unit)
    rk4 = integrate_riccati(*fin_unit)
    assert np.max(np.abs(closed.A1 - rk4.A1)) <= 1e-8


def test_closed_form_derivative(fin_unit):
    rc = unit_riccati_coeffs(*fin_unit)
    tau = np.linspace(0, 10, 101)
    assert riccati_closed_form_derivative(rc, 0.0) == pytest.approx(rc.a3 / 2)
    np.testing.assert_allclose(riccati_closed_form_derivative(rc, tau), rc.rhs(riccati_closed_form(rc, tau)),
                               rtol=1e-12, atol=1e-15)


def test_stationary_limit(fin_unit):
    m, p = fin_unit
    rc = unit_riccati_coeffs(m, p)
    A_inf = solve_unit_eis(m, replace(p, horizon=math.inf)).A1
    assert abs(riccati_closed_form(rc, 200.0) - A_inf) <= 1e-6
    a = riccati_closed_form(rc, np.linspace(0, 50, 500))
    assert np.all(np.diff(a) >= 0)
    assert riccati_closed_form(rc, 1e6) == pytest.approx(A_inf, rel=1e-14)


def test_xi_zero(fin_unit):
    m, p = fin_unit
    path = solve_unit_eis_finite(replace(m, xi=0.0), p)
    assert np.all(path.A1 == 0.0)


def test_complex_a4():
    with pytest.raises(ComplexA4):
        RiccatiCoeffs(1.0, 0.1, 1.0).a4


def test_unit_strategy(fin_unit):
    m, p = fin_unit
    path = solve_unit_eis_finite(m, p)
    for t in (0.0, 3.3, 10.0):
        assert strategy_finite(path, t, m, p, m.theta).c_over_x == 0.08
    assert strategy_finite(path, 10.0, m, p, m.theta).pi == pytest.approx(m.xi / p.gamma, rel=1e-15)
    pis = np.array([strategy_finite(path, t, m, p, m.theta).pi for t in np.linspace(0, 10, 201)])
    assert np.sum(np.abs(np.diff(pis))) < 0.02
    assert np.all(np.diff(pis) <= 0)
    with pytest.raises(ParameterError):
        strategy_finite(path, 11.0, m, p, m.theta)


def test_general_sign_and_strategy(ref):
    m, p = ref
    path = solve_general_eis_finite(m, p)
    assert path.case is CaseTag.FIN_GENERAL
    assert np.all(path.A1[1:] < 0)
    assert np.all(path.zeta4 > 0)
    cs = [strategy_finite(path, 0.0, m, p, nu).c_over_x for nu in np.linspace(0.001, 0.1, 20)]
    assert all(a < b for a, b in zip(cs, cs[1:]))
    assert strategy_finite(path, 10.0, m, p, m.theta).pi == m.xi / p.gamma


def test_integral_form_consistency(ref):
    m, p = ref
    path = solve_general_eis_finite(m, p)
    assert np.max(np.abs(integral_form_A0(path, m, p) - path.A0)) <= 1e-6


def test_rk4_refinement_order(ref):
    m, p = ref
    paths = [solve_general_eis_finite(m, p, TimeGrid(10.0, n)) for n in (50, 100, 200)]
    e1 = abs(paths[0].A0[-1] - paths[1].A0[-1])
    e2 = abs(paths[1].A0[-1] - paths[2].A0[-1])
    assert math.log2(e1 / e2) >= 3.5


def test_phi_continuity(ref):
    m, p = ref
    g = solve_general_eis_finite(m, replace(p, phi=0.999))
    u = solve_unit_eis_finite(m, replace(p, phi=1.0))
    assert np.max(np.abs(g.A1 - u.A1)) <= 5e-2
    np.testing.assert_allclose(-g.A1 / (1 - 0.999), u.A1, rtol=2e-2, atol=1e-6)


def test_terminal_value(ref, fin_unit):
    for m, p in (ref, fin_unit):
        path = solve_finite(m, p)
        v = value_function_finite(path, 10.0, m, p, 1.7, m.theta)
        assert v == pytest.approx(1.7 ** (1 - p.gamma) / (1 - p.gamma), rel=1e-14)
        v0 = value_function_finite(path, 0.0, m, p, 1.0, m.theta)
        assert value_function_finite(path, 0.0, m, p, 2.0, m.theta) == pytest.approx(2 ** (1 - p.gamma) * v0)


def test_time_grid_validation():
    with pytest.raises(ParameterError):
        TimeGrid(math.inf)
    with pytest.raises(ParameterError):
        TimeGrid(10.0, 1)
    g = TimeGrid(10.0, 4)
    assert g.h == 2.5 and g.tau.tolist() == [0, 2.5, 5, 7.5, 10]


def test_solve_finite_rejects_infinite():
    with pytest.raises(ParameterError):
        solve_finite(*reference_params(horizon=math.inf))


def test_path_csv(ref, fin_unit, tmp_path):
    g = solve_general_eis_finite(*ref)
    text = g.to_csv(tmp_path / "g.csv")
    lines = text.splitlines()
    assert lines[0] == "tau,A0,A1,zeta3,zeta4" and len(lines) == 1002
    u = solve_unit_eis_finite(*fin_unit).to_csv()
    assert u.splitlines()[1].endswith(",,")


@settings(max_examples=25, deadline=None)
@given(gamma=st.floats(1.1, 6.0), rho=st.floats(-1.0, 0.0), T=st.floats(0.5, 30.0))
def test_unit_path_sign_property(gamma, rho, T):
    m, p = reference_params(gamma=gamma, rho=rho, phi=1.0, horizon=T)
    path = solve_unit_eis_finite(m, p, TimeGrid(T, 200))
    assert np.all(path.A1[1:] > 0)
