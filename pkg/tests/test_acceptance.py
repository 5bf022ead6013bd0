"""Acceptance criteria, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py``; the terminal summary lists one
pass/fail line per criterion.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.optimize import bisect

from ezheston import solve
from ezheston.ansatz import DEGREE_PRESETS, AnsatzCase, AnsatzSpec, Verdict, judge_solvability, witness_infeasible
from ezheston.cli import main
from ezheston.finite_solver import TimeGrid, integrate_riccati, riccati_closed_form, solve_unit_eis_finite, unit_riccati_coeffs
from ezheston.infinite_solver import solve_unit_eis, unit_eis_coeffs
from ezheston.model import eis_region, reference_params
from ezheston.montecarlo import SimConfig, cir_mean, simulate_heston, simulate_wealth, summarize
from ezheston.sweep import DEFAULT_GAMMAS, PRESETS, preset_spec, run_sweep
from ezheston.verify import (
    OracleMesh,
    foc_gradient_check,
    linearization_gap,
    pde_oracle_finite_general,
    pde_oracle_finite_unit,
    reduced_pde_residual,
)

INF_UNIT = dict(phi=1.0, horizon=math.inf)
INF_GENERAL = dict(horizon=math.inf)
FIN_UNIT = dict(phi=1.0)
FIN_GENERAL: dict = {}
LOG_UTILITY = dict(gamma=1.0, phi=1.0, horizon=math.inf)


def test_criterion_01_unit_eis_consumption_ratio(criterion, ref_config, capsys):
    got = {}
    for case in ("inf-unit", "fin-unit"):
        code = main(["solve", str(ref_config), "--case", case])
        out = capsys.readouterr().out
        got[case] = (code, json.loads(out)["strategy"]["c_over_x"] if code == 0 else None)
    ok = all(code == 0 and c == 0.08 for code, c in got.values())
    assert criterion(1, ok, f"c_over_x inf-unit={got['inf-unit'][1]!r} fin-unit={got['fin-unit'][1]!r} (== 0.08 bitwise)")


def test_criterion_02_quadratic_and_riccati(criterion):
    m, p = reference_params(**INF_UNIT)
    q = unit_eis_coeffs(m, p)
    oracle = bisect(q, 0.0, 10.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    root_err = abs(solve_unit_eis(m, p).A1 - oracle)
    m, p = reference_params(**FIN_UNIT)
    grid = TimeGrid(10.0, 1000)
    closed = solve_unit_eis_finite(m, p, grid).A1
    rk4 = integrate_riccati(m, p, grid).A1
    ric_err = float(np.max(np.abs(closed - rk4)))
    ok = root_err <= 1e-12 and ric_err <= 1e-8
    assert criterion(2, ok, f"|root - bisection| = {root_err:.2e} (<= 1e-12); max|closed - RK4| = {ric_err:.2e} (<= 1e-8)")


def test_criterion_03_stationary_limit(criterion):
    m, p = reference_params(**FIN_UNIT)
    a_fin = float(riccati_closed_form(unit_riccati_coeffs(m, p), 200.0))
    a_inf = solve_unit_eis(m, replace(p, horizon=math.inf)).A1
    err = abs(a_fin - a_inf)
    assert criterion(3, err <= 1e-6, f"|A1(200) - A1_inf| = {err:.2e} (<= 1e-6)")


def test_criterion_04_gamma_one_continuity(criterion):
    m, p = reference_params(**INF_UNIT)
    target = m.xi**2 / (2 * (p.beta + m.kappa))
    errs = [abs(solve_unit_eis(m, replace(p, gamma=1 + d)).A1 - target) for d in (1e-4, -1e-4)]
    assert criterion(4, max(errs) <= 1e-3, f"max |A1(1 +- 1e-4) - xi^2/(2(beta+kappa))| = {max(errs):.2e} (<= 1e-3)")


def test_criterion_05_hjb_residuals(criterion):
    nu = np.linspace(0.001, 0.1, 21)
    details, ok = [], True

    for name, kw, tol in (("inf-unit", INF_UNIT, 1e-10), ("inf-general", INF_GENERAL, 1e-10),
                          ("log-utility", LOG_UTILITY, 1e-10), ("fin-unit", FIN_UNIT, 1e-6),
                          ("fin-general", FIN_GENERAL, 1e-6)):
        m, p = reference_params(**kw)
        sol, lin = solve(m, p)
        r = reduced_pde_residual(sol, m, p, nu, linearization=lin, tau_stride=1).max_rel
        ok &= r <= tol
        details.append(f"{name} {r:.1e}")

    rng = np.random.default_rng(20240601)
    worst = 0.0
    for kw in (INF_UNIT, INF_GENERAL, LOG_UTILITY, FIN_UNIT, FIN_GENERAL):
        m, p = reference_params(**kw)
        sol, _ = solve(m, p)
        for _ in range(20):
            x, v = rng.uniform(0.1, 10.0), rng.uniform(0.001, 0.1)
            t = rng.uniform(0.0, 9.5) if p.finite else 0.0
            rep = foc_gradient_check(sol, m, p, x, v, t=t)
            worst = max(worst, rep.dH_dc_rel, rep.dH_dpsi_rel)
            ok &= rep.ok
    details.append(f"FOC worst {worst:.1e} (<= 1e-5)")

    m, p = reference_params(**INF_GENERAL)
    sol, lin = solve(m, p)
    ex_inf = reduced_pde_residual(sol, m, p, [m.theta], lin, exact=True).max_rel
    m, p = reference_params(**FIN_GENERAL)
    path, _ = solve(m, p)
    ex_fin = linearization_gap(path, m, p, [m.theta], tau_stride=1).max_rel
    ok &= ex_inf <= 1e-10 and ex_fin <= 1e-10
    details.append(f"exact at theta inf {ex_inf:.1e} fin {ex_fin:.1e} (<= 1e-10)")
    assert criterion(5, ok, "residuals " + ", ".join(details))


def test_criterion_06_pde_oracle(criterion):
    details, ok = [], True
    for name, kw, run in (("fin-unit", FIN_UNIT, pde_oracle_finite_unit),
                          ("fin-general", FIN_GENERAL, pde_oracle_finite_general)):
        m, p = reference_params(**kw)
        base = run(m, p, OracleMesh())
        fine = run(m, p, OracleMesh().doubled())
        ok &= base.max_rel_diff <= 1e-3
        details.append(f"{name} default {base.max_rel_diff:.1e} (doubled {fine.max_rel_diff:.1e})")
    # At the ref parameters both errors sit at roundoff, so the refinement
    # ratio is measured where truncation error dominates: a wide variance
    # domain with a rougher market (Feller condition still satisfied).
    stress = dict(xi=2.0, kappa=2.0, sigma=0.6, theta=0.1, nu0=0.1)
    mesh = OracleMesh(0.001, 2.0, 41, 1000)
    for name, kw, run in (("fin-unit", FIN_UNIT, pde_oracle_finite_unit),
                          ("fin-general", FIN_GENERAL, pde_oracle_finite_general)):
        m, p = reference_params(**stress, **kw)
        ratio = run(m, p, mesh).max_rel_diff / run(m, p, mesh.doubled()).max_rel_diff
        ok &= ratio >= 3.0
        details.append(f"{name} doubling ratio {ratio:.2f} (>= 3, stressed)")
    assert criterion(6, ok, "; ".join(details))


def _draws(n: int, seed: int = 7):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        g, ph = F(rng.randint(1, 400), 50), F(rng.randint(1, 400), 50)
        if g == 1 or ph == 1 or eis_region(g, ph) is None:
            continue
        out.append((g, F(rng.randint(-100, 100), 100), ph))
    return out


def test_criterion_07_solvability_suite(criterion):
    low = {0: "constant-premium", 1: "linear", 2: "constant-diffusion"}
    bad = []
    for g, r, ph in _draws(100):
        for case in AnsatzCase:
            for n in range(9):
                spec = DEGREE_PRESETS[low.get(n, "constant-diffusion")]
                rep = judge_solvability(spec, AnsatzSpec(n, case), g, r, ph)
                want = Verdict.SOLVABLE if n <= 2 else Verdict.UNSOLVABLE
                good = rep.verdict is want
                if n >= 3:
                    good &= "infeasible" in rep.witness_text and witness_infeasible(g)
                if not good:
                    bad.append((g, r, ph, case.value, n, rep.verdict.value))
    ok = not bad
    detail = "100 draws x 4 cases x n=0..8: " + ("all verdicts as expected" if ok else f"{len(bad)} mismatches, e.g. {bad[0]}")
    assert criterion(7, ok, detail)


def test_criterion_08_sweep_properties(criterion):
    m, p = reference_params()
    t = {name: run_sweep(preset_spec(name, p), m, p) for name in PRESETS}
    unit_t, general = "fin-unit-t", ("inf-general-nu", "fin-general-nu")
    checks = {}
    checks["pi constant in nu"] = all(
        np.all(t[f].column("pi", g) == t[f].column("pi", g)[0]) for f in general for g in DEFAULT_GAMMAS
    )
    pi_first = {f: [t[f].column("pi", g)[0] for g in DEFAULT_GAMMAS] for f in (*general, unit_t)}
    pi_first["inf-unit-gamma"] = list(t["inf-unit-gamma"].column("pi"))
    checks["pi decreasing in gamma"] = all(all(a > b for a, b in zip(v, v[1:])) for v in pi_first.values())
    checks["c/x increasing in nu"] = all(
        np.all(np.diff(t[f].column("c_over_x", g)) > 0) for f in general for g in DEFAULT_GAMMAS
    )
    checks["c/x decreasing in gamma"] = all(
        np.all(t[f].column("c_over_x", a) > t[f].column("c_over_x", b))
        for f in general for a, b in zip(DEFAULT_GAMMAS, DEFAULT_GAMMAS[1:])
    )
    tv = max(float(np.sum(np.abs(np.diff(t[unit_t].column("pi", g))))) for g in DEFAULT_GAMMAS)
    checks["fin-unit pi TV < 0.02"] = tv < 0.02
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    assert criterion(8, ok, f"{len(checks)} sweep properties hold, max TV {tv:.1e}" if ok else f"failed: {failed}")


@pytest.mark.slow
def test_criterion_09_monte_carlo(criterion):
    m, p = reference_params(nu0=0.04, **INF_UNIT)
    sol, _ = solve(m, p)
    cfg = SimConfig(n_paths=100_000, dt=0.005, T_sim=10.0, seed=2024, save_every=200)
    ens = simulate_wealth(m, p, sol, simulate_heston(m, cfg))
    s = summarize(ens, m)
    zs = []
    for t in (1.0, 5.0, 10.0):
        i = int(np.argmin(np.abs(ens.t - t)))
        zs.append(abs(s.nu_mean[i] - float(cir_mean(m, t))) / s.nu_se[i])
    cw_ok = bool(np.all(ens.c_over_x == p.beta))
    ok = max(zs) <= 3.0 and s.wealth_positive and cw_ok
    detail = (f"|mean - CIR|/SE at t=1,5,10: {', '.join(f'{z:.2f}' for z in zs)} (<= 3); "
              f"wealth positive {s.wealth_positive}; c/x == beta on all paths {cw_ok}")
    assert criterion(9, ok, detail)


def test_criterion_10_external_baseline():
    pytest.skip("comparison with an external baseline formula not contained in the source; covered by criteria 5-6")
