"""Finite-horizon Heston solutions in time-to-maturity ``tau = T - t``.

Unit EIS: A1 solves a scalar Riccati equation with a closed form; A0 follows
from a linear ODE whose solution is a discounted integral of A1.

General EIS: the consumption-wealth ratio is log-linearized around its value
at nu = theta for each tau, so the linearization constants zeta3(tau),
zeta4(tau) depend on the unknown path.  The coupled (A0, A1) system is stepped
with RK4, recomputing the zetas from the current state at every stage.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import lfilter

from .errors import ComplexA4, NoAdmissibleRoot, ParameterError, StepRejected
from .infinite_solver import Strategy, consumption_ratio, portfolio_weight
from .model import CaseTag, MarketParams, PreferenceParams, classify_case

BLOWUP = 1e6


@dataclass(frozen=True)
class RiccatiCoeffs:
    """``A1' = (a1/2) A1^2 - a2 A1 + a3/2``."""

    a1: float
    a2: float
    a3: float

    @property
    def a4(self) -> float:
        d = self.a2**2 - self.a1 * self.a3
        if d < 0:
            raise ComplexA4(f"a2^2 - a1*a3 = {d:.6g} < 0")
        return math.sqrt(d)

    def rhs(self, A1):
        return 0.5 * self.a1 * A1 * A1 - self.a2 * A1 + 0.5 * self.a3


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int = 1000

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ParameterError(f"horizon must be finite and > 0 (got {self.T})")
        if self.n_steps < 2:
            raise ParameterError("n_steps must be >= 2")

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def h(self) -> float:
        return self.T / self.n_steps


@dataclass(frozen=True)
class CoefficientPath:
    grid: TimeGrid
    A0: np.ndarray
    A1: np.ndarray
    case: CaseTag
    zeta3: np.ndarray | None = None
    zeta4: np.ndarray | None = None
    riccati: RiccatiCoeffs | None = None

    @property
    def tau(self) -> np.ndarray:
        return self.grid.tau

    def at(self, tau):
        """Linear interpolation of (A0, A1) at time-to-maturity ``tau``."""
        t = self.tau
        return np.interp(tau, t, self.A0), np.interp(tau, t, self.A1)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "A0", "A1", "zeta3", "zeta4"])
        general = self.zeta3 is not None
        for i, tau in enumerate(self.tau):
            row = [repr(float(tau)), repr(float(self.A0[i])), repr(float(self.A1[i]))]
            if general:
                row += [repr(float(self.zeta3[i])), repr(float(self.zeta4[i]))]
            else:
                row += ["", ""]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _bracket(m: MarketParams, p: PreferenceParams) -> float:
    g = p.gamma
    return 1.0 - g + m.rho**2 * (1.0 - g) ** 2 / g


def unit_riccati_coeffs(m: MarketParams, p: PreferenceParams) -> RiccatiCoeffs:
    g = p.gamma
    return RiccatiCoeffs(
        a1=m.sigma**2 * _bracket(m, p),
        a2=p.beta + m.kappa - m.xi * m.rho * m.sigma * (1.0 - g) / g,
        a3=m.xi**2 / g,
    )


def riccati_closed_form(rc: RiccatiCoeffs, tau):
    """Closed-form A1(tau) with A1(0) = 0.

    Written with ``E = 1 - exp(-a4 tau)`` so that large tau does not overflow.
    """
    a4 = rc.a4
    tau = np.asarray(tau, dtype=float)
    E = -np.expm1(-a4 * tau)
    out = rc.a3 * E / (2.0 * a4 * np.exp(-a4 * tau) + (rc.a2 + a4) * E)
    return out[()] if out.ndim == 0 else out


def riccati_closed_form_derivative(rc: RiccatiCoeffs, tau):
    """Analytic tau-derivative of :func:`riccati_closed_form`."""
    a4 = rc.a4
    tau = np.asarray(tau, dtype=float)
    e = np.exp(-a4 * tau)
    E = -np.expm1(-a4 * tau)
    D = 2.0 * a4 * e + (rc.a2 + a4) * E
    out = 2.0 * a4 * a4 * rc.a3 * e / (D * D)
    return out[()] if out.ndim == 0 else out


def _rk4(f, y0: np.ndarray, tau: np.ndarray) -> np.ndarray:
    out = np.empty((tau.size, y0.size))
    y = y0.astype(float)
    out[0] = y
    for i in range(tau.size - 1):
        t, h = tau[i], tau[i + 1] - tau[i]
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
            raise StepRejected(f"solution blew up at tau = {tau[i + 1]:.6g}")
        out[i + 1] = y
    return out


def _check_unit(p: PreferenceParams):
    if not p.unit_eis:
        raise ParameterError("unit-EIS finite solver requires phi = 1")
    if not p.finite:
        raise ParameterError("finite-horizon solver requires a finite horizon")
    if not p.epsilon > 0:
        raise ParameterError("epsilon must be > 0")


def solve_unit_eis_finite(
    m: MarketParams, p: PreferenceParams, grid: TimeGrid | None = None
) -> CoefficientPath:
    _check_unit(p)
    grid = grid or TimeGrid(p.T)
    rc = unit_riccati_coeffs(m, p)
    tau = grid.tau
    A1 = riccati_closed_form(rc, tau)
    A1[0] = 0.0
    if np.any(A1 < 0):
        raise NoAdmissibleRoot("hedging coefficient A1(tau) turned negative")
    b = p.beta
    integral = _discounted_integral(rc, b, tau, A1)
    decay = np.exp(-b * tau)
    A0 = (
        math.log(p.epsilon) * decay
        + (m.r / b - 1.0 + math.log(b)) * (-np.expm1(-b * tau))
        + m.kappa * m.theta * integral
    )
    A0[0] = math.log(p.epsilon)
    return CoefficientPath(grid=grid, A0=A0, A1=A1, case=CaseTag.FIN_UNIT, riccati=rc)


def _discounted_integral(rc: RiccatiCoeffs, b: float, tau: np.ndarray, A1: np.ndarray) -> np.ndarray:
    """``int_0^tau A1(s) exp(-b (tau - s)) ds`` at every node.

    Composite Simpson per interval, using the closed form at the midpoint, and
    the recurrence ``I[i+1] = exp(-b h) I[i] + segment`` to avoid exp(b tau).
    """
    h = np.diff(tau)
    mid = riccati_closed_form(rc, tau[:-1] + 0.5 * h)
    seg = h / 6.0 * (A1[:-1] * np.exp(-b * h) + 4.0 * mid * np.exp(-0.5 * b * h) + A1[1:])
    decay = float(np.exp(-b * h[0]))
    return np.concatenate(([0.0], lfilter([1.0], [1.0, -decay], seg)))


def integrate_riccati(
    m: MarketParams, p: PreferenceParams, grid: TimeGrid | None = None
) -> CoefficientPath:
    """Independent RK4 integration of the unit-EIS Riccati equation (A0 omitted: zeros)."""
    _check_unit(p)
    grid = grid or TimeGrid(p.T)
    rc = unit_riccati_coeffs(m, p)
    sol = _rk4(lambda t, y: np.array([rc.rhs(y[0])]), np.zeros(1), grid.tau)
    return CoefficientPath(
        grid=grid, A0=np.zeros(grid.n_steps + 1), A1=sol[:, 0], case=CaseTag.FIN_UNIT, riccati=rc
    )


def general_linearization(A0, A1, m: MarketParams, p: PreferenceParams):
    """zeta3, zeta4 from the log consumption-wealth ratio at nu = theta."""
    lcw = p.phi * math.log(p.beta) - A0 - A1 * m.theta
    zeta4 = np.exp(lcw)
    return zeta4 * (1.0 - lcw), zeta4


def general_rhs(m: MarketParams, p: PreferenceParams):
    g, phi = p.gamma, p.phi
    lnb = math.log(p.beta)
    a1 = m.sigma**2 / (phi - 1.0) * _bracket(m, p)
    a3 = m.xi**2 * (phi - 1.0) / g
    drift_adj = m.kappa - m.xi * m.rho * m.sigma * (1.0 - g) / g

    def f(_tau, y):
        A0, A1 = y
        z3, z4 = general_linearization(A0, A1, m, p)
        dA0 = m.r * (phi - 1.0) + z3 + z4 * phi * lnb - p.beta * phi + m.kappa * m.theta * A1 - z4 * A0
        dA1 = 0.5 * a1 * A1 * A1 - (z4 + drift_adj) * A1 + 0.5 * a3
        return np.array([dA0, dA1])

    return f


def solve_general_eis_finite(
    m: MarketParams, p: PreferenceParams, grid: TimeGrid | None = None
) -> CoefficientPath:
    if p.unit_eis or p.unit_gamma:
        raise ParameterError("general-EIS finite solver requires phi != 1 and gamma != 1")
    if not p.finite:
        raise ParameterError("finite-horizon solver requires a finite horizon")
    if not p.epsilon > 0:
        raise ParameterError("epsilon must be > 0")
    grid = grid or TimeGrid(p.T)
    y0 = np.array([(p.phi - 1.0) * math.log(p.epsilon), 0.0])
    sol = _rk4(general_rhs(m, p), y0, grid.tau)
    A0, A1 = sol[:, 0].copy(), sol[:, 1].copy()
    if np.any(-A1 / (1.0 - p.phi) < 0):
        raise NoAdmissibleRoot("sign condition -A1(tau)/(1-phi) >= 0 violated")
    z3, z4 = general_linearization(A0, A1, m, p)
    return CoefficientPath(grid=grid, A0=A0, A1=A1, case=CaseTag.FIN_GENERAL, zeta3=z3, zeta4=z4)


def _cumtrapz(f: np.ndarray, tau: np.ndarray, corrected: bool) -> np.ndarray:
    out = cumulative_trapezoid(f, tau, initial=0.0)
    if corrected:
        # Euler-Maclaurin end correction on the uniform grid: O(h^2) -> O(h^4).
        h = tau[1] - tau[0]
        df = np.gradient(f, h, edge_order=2)
        out = out - h * h / 12.0 * (df - df[0])
    return out


def integral_form_A0(
    path: CoefficientPath, m: MarketParams, p: PreferenceParams, corrected: bool = True
) -> np.ndarray:
    """Re-evaluate A0(tau) from its variation-of-constants integral by trapezoid
    quadrature, using the path's zeta3, zeta4 and A1.

    ``corrected`` adds the Euler-Maclaurin end correction so the check is not
    dominated by the O(h^2) trapezoid error at the default grid.
    """
    tau = path.tau
    phi = p.phi
    Z = _cumtrapz(path.zeta4, tau, corrected)
    source = (
        m.r * (phi - 1.0)
        + path.zeta3
        + path.zeta4 * phi * math.log(p.beta)
        - p.beta * phi
        + m.kappa * m.theta * path.A1
    )
    inner = _cumtrapz(source * np.exp(Z), tau, corrected)
    return math.log(p.epsilon) * np.exp(-Z) + np.exp(-Z) * inner


def solve_finite(m: MarketParams, p: PreferenceParams, grid: TimeGrid | None = None) -> CoefficientPath:
    case = classify_case(m, p)
    if case is CaseTag.FIN_UNIT:
        return solve_unit_eis_finite(m, p, grid)
    if case is CaseTag.FIN_GENERAL:
        return solve_general_eis_finite(m, p, grid)
    raise ParameterError(f"{case.value} is not a finite-horizon case")


def _tau_of(path: CoefficientPath, t):
    t = np.asarray(t, dtype=float)
    T = path.grid.T
    if np.any(t < 0) or np.any(t > T * (1 + 1e-12)):
        raise ParameterError(f"t must lie in [0, {T}]")
    return np.clip(T - t, 0.0, T)


def strategy_finite(path: CoefficientPath, t: float, m: MarketParams, p: PreferenceParams, nu: float) -> Strategy:
    A0, A1 = path.at(_tau_of(path, t))
    return Strategy(
        c_over_x=float(consumption_ratio(path.case, A0, A1, nu, p)),
        pi=float(portfolio_weight(path.case, A1, m, p)),
        nu=float(nu),
    )


def value_function_finite(path: CoefficientPath, t, m: MarketParams, p: PreferenceParams, x, nu):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterError("wealth must be > 0")
    A0, A1 = path.at(_tau_of(path, t))
    L = A0 + A1 * np.asarray(nu, dtype=float)
    g = p.gamma
    if path.case is CaseTag.FIN_UNIT:
        out = x ** (1.0 - g) / (1.0 - g) * np.exp((1.0 - g) * L)
    else:
        out = x ** (1.0 - g) / (1.0 - g) * np.exp(-(1.0 - g) / (1.0 - p.phi) * L)
    return out[()] if np.ndim(out) == 0 else out
