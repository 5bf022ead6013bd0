"""Command-line interface: ``ezheston solve|verify|ansatz|simulate|oracle|sweep``.

Exit codes: 0 success, 2 invalid parameters, 3 solver failure,
4 verification failure.  Reports are JSON, grids and paths are CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import solve, strategy
from .ansatz import DEGREE_PRESETS, AnsatzCase, AnsatzSpec, judge_solvability, parse_degree_file
from .errors import DomainError, EzHestonError, ParameterError, SolverError, VerificationFailed
from .finite_solver import CoefficientPath, TimeGrid
from .model import (
    CONFIG_KEYS,
    CaseTag,
    MarketParams,
    PreferenceParams,
    adapt_to_case,
    classify_case,
    load_config,
    parse_config,
    validate_market,
    validate_preferences,
)
from .montecarlo import SimConfig, simulate_heston, simulate_wealth, summarize
from .sweep import PRESETS, SweepSpec, preset_spec, run_sweep
from .verify import (
    OracleMesh,
    admissibility_check,
    foc_gradient_check,
    linearization_gap,
    pde_oracle_finite_general,
    pde_oracle_finite_unit,
    reduced_pde_residual,
)

EXIT_OK, EXIT_PARAM, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
CASES = ["auto"] + [c.value for c in CaseTag]

# default tolerances of ``verify``
RESIDUAL_TOL_INFINITE = 1e-10
RESIDUAL_TOL_FINITE = 1e-6
FOC_TOL = 1e-5


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _load(args) -> tuple[MarketParams, PreferenceParams, CaseTag, list[str]]:
    m, p = load_config(args.config)
    validate_market(m).merge(validate_preferences(p)).raise_if_rejected()
    overrides: list[str] = []
    if getattr(args, "case", "auto") != "auto":
        p, overrides = adapt_to_case(p, CaseTag(args.case))
    case = classify_case(m, p)
    if getattr(args, "case", "auto") not in ("auto", case.value):
        raise ParameterError(f"configuration resolves to {case.value}, not {args.case}")
    return m, p, case, overrides


def _grid(p: PreferenceParams, args) -> TimeGrid | None:
    return TimeGrid(p.T, args.steps) if p.finite else None


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite_or_str(x: float):
    return x if math.isfinite(x) else str(x)


def _params(m: MarketParams, p: PreferenceParams) -> dict:
    d = {k: getattr(m, k) for k in m.__dataclass_fields__}
    d.update({k: _finite_or_str(getattr(p, k)) for k in p.__dataclass_fields__})
    return d


def _strategy_dict(sol, m, p, nu, t=0.0) -> dict:
    s = strategy(sol, m, p, nu, t)
    return {"t": t, "nu": nu, "c_over_x": s.c_over_x, "pi": s.pi, "psi": s.psi}


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    m, p, case, overrides = _load(args)
    sol, lin = solve(m, p, _grid(p, args))
    rep = validate_market(m).merge(validate_preferences(p))
    out: dict = {"case": case.value, "overrides": overrides, "parameters": _params(m, p)}
    if isinstance(sol, CoefficientPath):
        csv_path = args.path_csv
        if csv_path is None and args.out:
            csv_path = str(Path(args.out).with_suffix(".path.csv"))
        if csv_path:
            sol.to_csv(csv_path)
        out["coefficient_path"] = {
            "csv": csv_path,
            "steps": sol.grid.n_steps,
            "A0_at_T": sol.A0[-1],
            "A1_at_T": sol.A1[-1],
            "A1_min": float(sol.A1.min()),
            "A1_max": float(sol.A1.max()),
        }
        if sol.zeta3 is not None:
            out["zeta"] = {"zeta3_at_T": sol.zeta3[-1], "zeta4_at_T": sol.zeta4[-1]}
    else:
        out["A0"], out["A1"] = sol.A0, sol.A1
        if lin is not None:
            out["zeta"] = {
                "zeta1": lin.zeta1,
                "zeta2": lin.zeta2,
                "iterations": lin.iterations,
                "final_residual": lin.final_residual,
                "eval_nu": lin.eval_nu,
            }
    out["strategy"] = _strategy_dict(sol, m, p, m.theta)
    out["diagnostics"] = {
        "notes": list(getattr(sol, "notes", ())),
        "warnings": rep.warnings,
        "feller_ratio": m.feller_ratio,
        "admissibility": admissibility_check(sol, m, p).to_dict(),
    }
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _tamper(sol, args):
    if args.override_A1 is None and args.scale_A1 is None:
        return sol
    if isinstance(sol, CoefficientPath):
        A1 = sol.A1 if args.override_A1 is None else np.full_like(sol.A1, args.override_A1)
        if args.scale_A1 is not None:
            A1 = A1 * args.scale_A1
        return replace(sol, A1=A1)
    A1 = sol.A1 if args.override_A1 is None else args.override_A1
    if args.scale_A1 is not None:
        A1 = A1 * args.scale_A1
    return replace(sol, A1=A1)


def cmd_verify(args) -> int:
    m, p, case, overrides = _load(args)
    sol, lin = solve(m, p, _grid(p, args))
    sol = _tamper(sol, args)
    nu_grid = np.linspace(0.2 * m.theta, 4.0 * m.theta, 41)
    res_tol = args.tol if args.tol is not None else (RESIDUAL_TOL_FINITE if case.finite else RESIDUAL_TOL_INFINITE)
    foc_tol = args.tol if args.tol is not None else FOC_TOL

    res = reduced_pde_residual(sol, m, p, nu_grid, linearization=lin)
    checks = {"reduced_pde": {"pde_id": res.pde_id, "max_rel": res.max_rel, "tol": res_tol, "ok": res.max_rel <= res_tol}}
    if case.general_eis:
        gap = linearization_gap(sol, m, p, np.array([m.theta]), lin)
        checks["linearization_gap_at_theta"] = {
            "max_rel": gap.max_rel, "tol": RESIDUAL_TOL_INFINITE, "ok": gap.max_rel <= RESIDUAL_TOL_INFINITE,
        }
    focs = []
    for x in (0.5, 1.0, 2.0):
        for nu in (0.5 * m.theta, m.theta, 2.0 * m.theta):
            r = foc_gradient_check(sol, m, p, x, nu, tol=foc_tol)
            focs.append({"x": x, "nu": nu, "dH_dc_rel": r.dH_dc_rel, "dH_dpsi_rel": r.dH_dpsi_rel,
                         "concave": r.d2H_dpsi2 < 0, "ok": r.ok})
    checks["foc"] = {"tol": foc_tol, "states": focs, "ok": all(f["ok"] for f in focs)}
    adm = admissibility_check(sol, m, p)
    checks["admissibility"] = {**adm.to_dict(), "ok": adm.weight_form_ok}

    ok = all(c["ok"] for c in checks.values())
    _emit({"case": case.value, "overrides": overrides, "ok": ok, "checks": checks}, args.out)
    if not ok:
        failed = ", ".join(k for k, c in checks.items() if not c["ok"])
        raise VerificationFailed(f"checks failed: {failed}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ansatz
# ---------------------------------------------------------------------------


def _exact(text: str):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"cannot parse number {text!r}") from None


def cmd_ansatz(args) -> int:
    if args.degrees in DEGREE_PRESETS:
        d = DEGREE_PRESETS[args.degrees]
    else:
        try:
            d = parse_degree_file(Path(args.degrees).read_text())
        except OSError as exc:
            raise ParameterError(f"cannot read degree spec {args.degrees}: {exc}") from None
    gamma, rho, phi = Fraction(2), Fraction(-1, 2), Fraction(1, 8)
    if args.config:
        vals = parse_config(Path(args.config).read_text())
        gamma, rho, phi = vals["gamma"], vals["rho"], vals["phi"]
    gamma = _exact(args.gamma) if args.gamma else gamma
    rho = _exact(args.rho) if args.rho else rho
    phi = _exact(args.phi) if args.phi else phi
    if not (gamma > 0 and -1 <= rho <= 1 and phi > 0):
        raise ParameterError("need gamma > 0, rho in [-1,1] and phi > 0")
    acase = AnsatzCase(args.case)
    if acase.general and phi == 1:
        raise ParameterError("general-EIS ansatz needs phi != 1")
    rep = judge_solvability(d, AnsatzSpec(args.order, acase), gamma, rho, phi)
    _emit({"order": args.order, "case": acase.value, "gamma": gamma, "rho": rho, "phi": phi,
           **rep.to_dict()}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    m, p, case, overrides = _load(args)
    T_sim = args.T_sim if args.T_sim is not None else (p.T if p.finite else 10.0)
    cfg = SimConfig(n_paths=args.n_paths, dt=args.dt, T_sim=T_sim, seed=args.seed,
                    antithetic=args.antithetic, save_every=args.save_every)
    sol, _lin = solve(m, p, _grid(p, args))
    ens = simulate_wealth(m, p, sol, simulate_heston(m, cfg))
    if args.paths_csv:
        ens.to_csv(args.paths_csv, max_paths=args.max_csv_paths)
    summary = summarize(ens, m).to_dict()
    _emit({"case": case.value, "overrides": overrides, "dt": cfg.dt, "T_sim": cfg.T_sim,
           "scheme": ens.scheme, **summary}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    m, p, case, overrides = _load(args)
    if not case.finite:
        raise ParameterError(f"the PDE oracle covers finite horizons only (case {case.value})")
    mesh = OracleMesh(args.nu_min, args.nu_max, args.n_nu, args.n_tau)
    run = pde_oracle_finite_unit if case is CaseTag.FIN_UNIT else pde_oracle_finite_general
    cmp_ = run(m, p, mesh)
    out = {"case": case.value, "overrides": overrides,
           "mesh": {"nu_min": mesh.nu_min, "nu_max": mesh.nu_max, "n_nu": mesh.n_nu, "n_tau": mesh.n_tau},
           "substeps": cmp_.substeps, "max_rel_diff": cmp_.max_rel_diff, "tol": args.tol}
    if args.doubled:
        fine = run(m, p, mesh.doubled())
        out["doubled_max_rel_diff"] = fine.max_rel_diff
        out["improvement_ratio"] = cmp_.max_rel_diff / fine.max_rel_diff if fine.max_rel_diff > 0 else math.inf
    if args.csv:
        cmp_.to_csv(args.csv, tau_stride=args.csv_tau_stride)
    ok = cmp_.max_rel_diff <= args.tol
    out["ok"] = ok
    _emit(out, args.out)
    if not ok:
        raise VerificationFailed(f"oracle max_rel_diff {cmp_.max_rel_diff:.3e} exceeds {args.tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    m, p = load_config(args.config)
    validate_market(m).merge(validate_preferences(p)).raise_if_rejected()
    gammas = tuple(args.gammas) if args.gammas else None
    if args.preset is not None:
        spec = preset_spec(args.preset, p, **({"gammas": gammas} if gammas else {}))
        upd = {k: v for k, v in (("lo", args.lo), ("hi", args.hi), ("count", args.count)) if v is not None}
        spec = replace(spec, **upd)
    else:
        if args.axis is None or args.sweep_case is None:
            raise ParameterError("give --preset, or --axis and --sweep-case")
        lo, hi, count = args.lo, args.hi, args.count
        if None in (lo, hi, count):
            raise ParameterError("a custom sweep needs --lo, --hi and --count")
        spec = SweepSpec(axis=args.axis, lo=lo, hi=hi, count=count, case=CaseTag(args.sweep_case),
                         **({"gammas": gammas} if gammas else {}))
    upd = {k: v for k, v in (("t_eval", args.t_eval), ("nu_eval", args.nu_eval)) if v is not None}
    spec = replace(spec, n_steps=args.steps, **upd)
    text = run_sweep(spec, m, p).to_csv(args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _config_epilog() -> str:
    width = max(len(k) for k in CONFIG_KEYS)
    lines = ["configuration file: one 'key = value' per line, '#' starts a comment; keys:"]
    lines += [f"  {k:<{width}}  {v}" for k, v in CONFIG_KEYS.items()]
    lines.append("unknown or duplicate keys are errors; nu0, x0 and epsilon are optional.")
    lines.append("exit codes: 0 success, 2 invalid parameters, 3 solver failure, 4 verification failure")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    ap = argparse.ArgumentParser(
        prog="ezheston",
        description="Consumption-investment under Heston volatility with Epstein-Zin preferences.",
        epilog=_config_epilog(),
        formatter_class=fmt,
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, help_, case=True, steps=True):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=_config_epilog(), formatter_class=fmt)
        sp.add_argument("config", help="path to a key = value configuration file")
        if case:
            sp.add_argument("--case", choices=CASES, default="auto",
                            help="force a case (sets phi = 1 or drops the horizon as needed); default: from config")
        if steps:
            sp.add_argument("--steps", type=int, default=1000, help="time steps of the finite-horizon solver")
        sp.add_argument("--out", help="output file (default: stdout)")
        return sp

    sp = command("solve", "solve for the value-function coefficients and the strategy at (t=0, nu=theta)")
    sp.add_argument("--path-csv", help="CSV for the finite-horizon coefficient path (default: next to --out)")
    sp.set_defaults(func=cmd_solve)

    sp = command("verify", "PDE residuals, first-order conditions and admissibility of the solution")
    sp.add_argument("--tol", type=float, help="one tolerance for every check (default: per check)")
    sp.add_argument("--override-A1", type=float, help="replace A1 before checking (tamper test)")
    sp.add_argument("--scale-A1", type=float, help="multiply A1 before checking (tamper test)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("ansatz", help="judge solvability of the exponential-polynomial ansatz",
                        description="judge solvability of the exponential-polynomial ansatz of order n")
    sp.add_argument("--degrees", default="heston",
                    help=f"preset ({', '.join(DEGREE_PRESETS)}) or a file of 'key = c0, c1, ...' lines "
                         "for eta_sq, m1, eta_m2, m2_sq")
    sp.add_argument("--order", type=int, required=True, help="polynomial order n")
    sp.add_argument("--case", choices=[c.value for c in AnsatzCase], default="inf-unit")
    sp.add_argument("--config", help="take gamma, rho and phi from a configuration file")
    sp.add_argument("--gamma", help="risk aversion (exact fraction, default 2)")
    sp.add_argument("--rho", help="correlation (exact fraction, default -1/2)")
    sp.add_argument("--phi", help="EIS (exact fraction, default 1/8)")
    sp.add_argument("--out", help="output file (default: stdout)")
    sp.set_defaults(func=cmd_ansatz)

    sp = command("simulate", "Monte Carlo paths of variance and wealth under the solved strategy")
    sp.add_argument("--n-paths", type=int, default=10000)
    sp.add_argument("--dt", type=float, default=0.005)
    sp.add_argument("--T-sim", type=float, help="simulation horizon (default: the configured horizon, else 10)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--save-every", type=int, help="store every k-th step (default: at most 200 intervals)")
    sp.add_argument("--paths-csv", help="write per-path series (path, t, nu, X, c_over_x) to this CSV")
    sp.add_argument("--max-csv-paths", type=int, default=100, help="paths written to --paths-csv")
    sp.set_defaults(func=cmd_simulate)

    sp = command("oracle", "method-of-lines PDE solve compared with the exponential-affine solution")
    d = OracleMesh()
    sp.add_argument("--nu-min", type=float, default=d.nu_min)
    sp.add_argument("--nu-max", type=float, default=d.nu_max)
    sp.add_argument("--n-nu", type=int, default=d.n_nu)
    sp.add_argument("--n-tau", type=int, default=d.n_tau)
    sp.add_argument("--doubled", action="store_true", help="also run the doubled mesh and report the ratio")
    sp.add_argument("--tol", type=float, default=1e-3, help="bound on the interior max relative difference")
    sp.add_argument("--csv", help="write the (tau, nu) comparison grid to this CSV")
    sp.add_argument("--csv-tau-stride", type=int, default=100)
    sp.set_defaults(func=cmd_oracle)

    sp = command("sweep", "strategy versus nu, t or gamma as CSV", case=False)
    sp.add_argument("--preset", choices=list(PRESETS),
                    help="case and axis preset with default ranges (<case>-<axis>)")
    sp.add_argument("--axis", choices=["nu", "t", "gamma"])
    sp.add_argument("--sweep-case", choices=[c.value for c in CaseTag if c is not CaseTag.LOG_UTILITY])
    sp.add_argument("--lo", type=float)
    sp.add_argument("--hi", type=float)
    sp.add_argument("--count", type=int)
    sp.add_argument("--gammas", type=float, nargs="+", help="gamma set of the curves (default 1.5 2 2.5 3)")
    sp.add_argument("--t-eval", type=float, help="t for nu and gamma sweeps (default 0)")
    sp.add_argument("--nu-eval", type=float, help="nu for t and gamma sweeps (default theta)")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, DomainError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except VerificationFailed as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except EzHestonError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
