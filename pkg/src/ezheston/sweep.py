"""Strategy sweeps along nu, t or gamma, written as CSV tables.

Each gamma is solved once and the solution reused across the axis nodes.
The presets are:

    inf-unit-gamma   inf-unit,    axis gamma
    inf-general-nu   inf-general, axis nu at t = 0
    fin-unit-t       fin-unit,    axis t at nu = theta
    fin-general-nu   fin-general, axis nu at t = 0
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import EzHestonError, ParameterError
from .finite_solver import TimeGrid, solve_finite, strategy_finite
from .infinite_solver import FixedPointOptions, solve_infinite, strategy_infinite
from .model import CaseTag, MarketParams, PreferenceParams, adapt_to_case

DEFAULT_GAMMAS = (1.5, 2.0, 2.5, 3.0)
AXES = ("nu", "t", "gamma")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    lo: float
    hi: float
    count: int
    case: CaseTag
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    t_eval: float = 0.0
    nu_eval: float | None = None  # default theta
    n_steps: int = 1000

    def __post_init__(self):
        if self.axis not in AXES:
            raise ParameterError(f"axis must be one of {AXES} (got {self.axis!r})")
        if self.count < 1 or (self.count > 1 and not self.lo < self.hi):
            raise ParameterError("sweep grid must be nonempty and strictly increasing")
        if not self.gammas or any(not g > 0 for g in self.gammas):
            raise ParameterError("gamma set must be nonempty and positive")
        object.__setattr__(self, "case", CaseTag(self.case))
        object.__setattr__(self, "gammas", tuple(sorted(float(g) for g in self.gammas)))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepTable:
    spec: SweepSpec
    rows: list[tuple[float, float, float, float]]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str, gamma: float | None = None) -> np.ndarray:
        i = ("axis_value", "gamma", "c_over_x", "pi").index(name)
        return np.array([r[i] for r in self.rows if gamma is None or r[1] == gamma])

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_value", "gamma", "c_over_x", "pi"])
        for row in self.rows:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _solve(m, p, spec: SweepSpec):
    if spec.case.finite:
        return solve_finite(m, p, TimeGrid(p.T, spec.n_steps))
    sol, _lin = solve_infinite(m, p, FixedPointOptions())
    return sol


def _strategy(sol, m, p, spec: SweepSpec, t: float, nu: float):
    if spec.case.finite:
        return strategy_finite(sol, t, m, p, nu)
    return strategy_infinite(sol, m, p, nu)


def run_sweep(spec: SweepSpec, m: MarketParams, p: PreferenceParams) -> SweepTable:
    p, overrides = adapt_to_case(p, spec.case)
    nu_eval = m.theta if spec.nu_eval is None else spec.nu_eval
    if spec.axis == "t" and spec.case.finite and (spec.lo < 0 or spec.hi > p.T):
        raise ParameterError(f"t grid must lie in [0, {p.T}]")
    gammas = spec.grid if spec.axis == "gamma" else spec.gammas
    rows = []
    for g in gammas:
        pg = replace(p, gamma=float(g))
        try:
            sol = _solve(m, pg, spec)
        except EzHestonError as exc:
            raise type(exc)(f"gamma={g!r}: {exc}") from exc
        if spec.axis == "gamma":
            s = _strategy(sol, m, pg, spec, spec.t_eval, nu_eval)
            rows.append((float(g), float(g), s.c_over_x, s.pi))
            continue
        for x in spec.grid:
            t, nu = (spec.t_eval, x) if spec.axis == "nu" else (x, nu_eval)
            s = _strategy(sol, m, pg, spec, float(t), float(nu))
            rows.append((float(x), float(g), s.c_over_x, s.pi))

    meta = {"case": spec.case.value, "axis": spec.axis, "grid": f"[{spec.lo!r}, {spec.hi!r}] x {spec.count}"}
    if spec.axis != "gamma":
        meta["gammas"] = ", ".join(repr(g) for g in spec.gammas)
    if spec.axis != "t":
        meta["t_eval"] = repr(spec.t_eval)
    if spec.axis != "nu":
        meta["nu_eval"] = repr(nu_eval)
    meta.update({f.name: repr(getattr(m, f.name)) for f in fields(MarketParams)})
    meta.update({k: repr(getattr(p, k)) for k in ("beta", "phi", "epsilon", "horizon")})
    if spec.case.finite:
        meta["time_steps"] = spec.n_steps
    elif spec.case.general_eis:
        o = FixedPointOptions()
        meta["fixed_point"] = f"damping={o.damping} tol={o.tol} max_iter={o.max_iter}"
    if overrides:
        meta["overrides"] = "; ".join(overrides)
    return SweepTable(spec=spec, rows=rows, metadata=meta)


PRESETS = {
    "inf-unit-gamma": (CaseTag.INF_UNIT, "gamma"),
    "inf-general-nu": (CaseTag.INF_GENERAL, "nu"),
    "fin-unit-t": (CaseTag.FIN_UNIT, "t"),
    "fin-general-nu": (CaseTag.FIN_GENERAL, "nu"),
}

DEFAULT_RANGES = {
    "nu": (0.0025, 0.09, 50),
    "gamma": (1.5, 3.0, 50),
}


def preset_spec(name: str, p: PreferenceParams, gammas=DEFAULT_GAMMAS) -> SweepSpec:
    if name not in PRESETS:
        raise ParameterError(f"preset must be one of {list(PRESETS)} (got {name!r})")
    case, axis = PRESETS[name]
    if axis == "t":
        T = p.T if p.finite else 10.0
        lo, hi, count = 0.0, T, 101
    else:
        lo, hi, count = DEFAULT_RANGES[axis]
    return SweepSpec(axis=axis, lo=lo, hi=hi, count=count, case=case, gammas=tuple(gammas))
