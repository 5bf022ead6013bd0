from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from ezheston import solve
from ezheston.errors import GridMismatch, ParameterError
from ezheston.finite_solver import TimeGrid, solve_general_eis_finite
from ezheston.montecarlo import (
    GENERATOR,
    NOT_AVAILABLE,
    SimConfig,
    cir_mean,
    simulate_heston,
    simulate_wealth,
    summarize,
)
from ezheston.model import reference_params


def test_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(n_paths=0)
    with pytest.raises(ParameterError):
        SimConfig(n_paths=10, dt=0.003, T_sim=1.0)
    with pytest.raises(ParameterError):
        SimConfig(n_paths=3, antithetic=True)
    with pytest.raises(ParameterError):
        SimConfig(n_paths=2, seed=-1)
    cfg = SimConfig(n_paths=4, dt=0.01, T_sim=1.0, save_every=30)
    assert cfg.n_steps == 100
    assert cfg.save_steps.tolist() == [0, 30, 60, 90, 100]
    assert SimConfig(n_paths=1).stride == 10


def test_determinism():
    m, _ = reference_params(nu0=0.04)
    cfg = SimConfig(n_paths=500, dt=0.01, T_sim=2.0, seed=42)
    a, b = simulate_heston(m, cfg), simulate_heston(m, cfg)
    assert np.array_equal(a.nu, b.nu)
    c = simulate_heston(m, replace(cfg, seed=43))
    assert not np.array_equal(a.nu, c.nu)
    assert a.generator == GENERATOR


def test_variance_nonnegative_under_feller_violation():
    m, _ = reference_params(sigma=0.8)
    ens = simulate_heston(m, SimConfig(n_paths=2000, dt=0.01, T_sim=2.0))
    assert np.all(ens.nu >= 0)


def test_sigma_zero_relaxation():
    m, _ = reference_params(sigma=0.0, nu0=0.05)
    cfg = SimConfig(n_paths=3, dt=0.001, T_sim=1.0, save_every=100)
    ens = simulate_heston(m, cfg)
    exact = cir_mean(m, ens.t)
    assert np.all(ens.nu == ens.nu[:, :1])
    assert np.max(np.abs(ens.nu[:, 0] - exact)) <= 5 * m.kappa * cfg.dt * abs(m.nu0 - m.theta)


def test_antithetic_pairs():
    m, _ = reference_params(sigma=1e-8)
    cfg = SimConfig(n_paths=10, dt=0.01, T_sim=0.05, antithetic=True, save_every=1)
    ens = simulate_heston(m, cfg)
    drift = cir_mean(m, ens.t)[:, None]
    dev = ens.nu - drift
    np.testing.assert_allclose(dev[:, :5], -dev[:, 5:], atol=1e-15)


def test_antithetic_reduces_log_wealth_variance():
    m, p = reference_params(phi=1.0, horizon=math.inf, sigma=0.01, nu0=0.0225)
    sol, _ = solve(m, p)
    base = SimConfig(n_paths=2000, dt=0.01, T_sim=1.0, seed=5)
    plain = summarize(simulate_wealth(m, p, sol, simulate_heston(m, base)), m)
    anti_cfg = replace(base, antithetic=True)
    anti = summarize(simulate_wealth(m, p, sol, simulate_heston(m, anti_cfg)), m)
    assert anti.terminal_log_wealth_se < plain.terminal_log_wealth_se


def test_deterministic_wealth():
    m, p = reference_params(phi=1.0, horizon=math.inf, xi=0.0, x0=2.0)
    sol, _ = solve(m, p)
    cfg = SimConfig(n_paths=50, dt=0.01, T_sim=3.0)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, cfg))
    np.testing.assert_allclose(ens.log_wealth[-1], math.log(2.0) + (m.r - p.beta) * 3.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("overrides", [dict(phi=1.0, horizon=math.inf), dict(phi=1.0)])
def test_unit_eis_consumption_ratio_is_beta(overrides):
    m, p = reference_params(nu0=0.04, **overrides)
    sol, _ = solve(m, p)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, SimConfig(n_paths=200, dt=0.01, T_sim=10.0)))
    assert np.all(ens.c_over_x == p.beta)
    s = summarize(ens, m)
    assert s.c_over_x_min == s.c_over_x_max == p.beta and s.wealth_positive


def test_general_consumption_ratio_monotone_in_nu():
    m, p = reference_params(nu0=0.04)
    sol = solve_general_eis_finite(m, p)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, SimConfig(n_paths=300, dt=0.01, T_sim=10.0)))
    assert np.ptp(ens.c_over_x[5]) > 0
    for i in (5, 50, 150):
        order = np.argsort(ens.nu[i])
        assert np.all(np.diff(ens.c_over_x[i][order]) >= 0)


def test_grid_mismatch():
    m, p = reference_params()
    sol = solve_general_eis_finite(m, p, TimeGrid(5.0, 500))
    ens = simulate_heston(m, SimConfig(n_paths=10, dt=0.01, T_sim=10.0))
    with pytest.raises(GridMismatch):
        simulate_wealth(m, p, sol, ens)
    sol10 = solve_general_eis_finite(m, p)
    with pytest.raises(GridMismatch):
        simulate_wealth(m, replace(p), sol10, replace(ens, cfg=replace(ens.cfg, seed=1)))


def test_single_path_summary():
    m, p = reference_params(phi=1.0, horizon=math.inf)
    sol, _ = solve(m, p)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, SimConfig(n_paths=1, dt=0.01, T_sim=1.0)))
    s = summarize(ens, m).to_dict()
    assert s["terminal_wealth_std"] == NOT_AVAILABLE
    assert s["terminal_log_wealth_se"] == NOT_AVAILABLE
    assert s["nu_se"][0] == NOT_AVAILABLE


def test_paths_csv(tmp_path):
    m, p = reference_params(phi=1.0, horizon=math.inf)
    sol, _ = solve(m, p)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, SimConfig(n_paths=4, dt=0.01, T_sim=1.0, save_every=50)))
    lines = ens.to_csv(tmp_path / "p.csv", max_paths=2).splitlines()
    assert lines[0] == "path,t,nu,X,c_over_x"
    assert len(lines) == 1 + 2 * 3
    with pytest.raises(ParameterError):
        simulate_heston(m, SimConfig(n_paths=2)).wealth
