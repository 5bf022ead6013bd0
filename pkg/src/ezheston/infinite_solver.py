"""Infinite-horizon Heston solutions.

Unit EIS (and log utility): the exponential-affine ansatz
``h(nu) = exp(A0 + A1 nu)`` reduces the HJB equation to a quadratic in A1
and a linear equation for A0.

General EIS: the consumption-wealth ratio ``beta^phi / h`` is log-linearized
around its mean, ``exp(c-x) ~ zeta1 + zeta2 (c-x)``.  The linearization
constants depend on the solution, so (zeta1, zeta2) and (A0, A1) are found
jointly by a damped fixed-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoAdmissibleRoot, NonConvergence, NoRealRoot, ParameterError
from .model import CaseTag, MarketParams, PreferenceParams, classify_case


@dataclass(frozen=True)
class QuadraticCoeffs:
    """Coefficients of ``a1 x^2 + a2 x + a3 = 0``."""

    a1: float
    a2: float
    a3: float

    @property
    def discriminant(self) -> float:
        return self.a2 * self.a2 - 4.0 * self.a1 * self.a3

    def __call__(self, x):
        return (self.a1 * x + self.a2) * x + self.a3


@dataclass(frozen=True)
class AffineSolution:
    A0: float
    A1: float
    case: CaseTag
    coeffs: QuadraticCoeffs
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class LogLinearization:
    zeta1: float
    zeta2: float
    mean_log_cw: float
    iterations: int
    final_residual: float
    eval_nu: float


@dataclass(frozen=True)
class Strategy:
    c_over_x: float
    pi: float
    nu: float

    @property
    def psi(self) -> float:
        """Exposure to the stock's Brownian driver, ``pi * G(nu)``."""
        return self.pi * math.sqrt(self.nu)


@dataclass(frozen=True)
class FixedPointOptions:
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 500
    eval_nu: float | None = None  # defaults to theta, the stationary mean


def stable_quadratic_roots(q: QuadraticCoeffs) -> tuple[float, float | None]:
    """Real roots of a quadratic without cancellation.

    Returns ``(near, far)`` where ``near = a3 / s`` is the root that stays
    finite as ``a1 -> 0`` and ``far = s / a1`` is the other one (``None`` when
    ``a1 == 0``), with ``s = -(a2 + sign(a2) sqrt(disc)) / 2``.
    """
    a, b, c = q.a1, q.a2, q.a3
    if a == 0.0:
        if b == 0.0:
            raise NoRealRoot("degenerate quadratic: a1 = a2 = 0")
        return -c / b, None
    disc = q.discriminant
    if disc < 0.0:
        raise NoRealRoot(f"negative discriminant {disc:.6g}")
    s = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if s == 0.0:
        return 0.0, 0.0
    return c / s, s / a


def select_root(q: QuadraticCoeffs) -> tuple[float, tuple[str, ...]]:
    """Nonnegative root of ``q``: the positive one when the roots have opposite
    signs, otherwise the branch that stays finite as ``a1 -> 0``."""
    near, far = stable_quadratic_roots(q)
    notes: tuple[str, ...] = ()
    if q.a3 == 0.0:
        return 0.0, ("zero constant term: root 0 selected (zero hedging demand)",)
    if far is not None and q.a1 * q.a3 < 0.0:
        root = near if near > 0.0 else far
    else:
        root = near
    if not root >= 0.0:
        raise NoAdmissibleRoot(f"no nonnegative root (roots {near!r}, {far!r})")
    return root, notes


def _bracket(m: MarketParams, p: PreferenceParams) -> float:
    g = p.gamma
    return 1.0 - g + m.rho**2 * (1.0 - g) ** 2 / g


def unit_eis_coeffs(m: MarketParams, p: PreferenceParams) -> QuadraticCoeffs:
    g = p.gamma
    return QuadraticCoeffs(
        a1=0.5 * m.sigma**2 * _bracket(m, p),
        a2=m.xi * m.rho * m.sigma * (1.0 - g) / g - p.beta - m.kappa,
        a3=m.xi**2 / (2.0 * g),
    )


def solve_unit_eis(m: MarketParams, p: PreferenceParams) -> AffineSolution:
    if not p.unit_eis:
        raise ParameterError("solve_unit_eis requires phi = 1")
    if p.gamma <= 0:
        raise ParameterError("gamma must be > 0")
    q = unit_eis_coeffs(m, p)
    if p.unit_gamma:
        # a1 vanishes identically; single root xi^2 / (2 (beta + kappa)).
        A1 = m.xi**2 / (2.0 * (p.beta + m.kappa))
        notes: tuple[str, ...] = ("log utility: linear equation, single root",)
        case = CaseTag.LOG_UTILITY
    else:
        A1, notes = select_root(q)
        case = CaseTag.INF_UNIT
    A0 = math.log(p.beta) - 1.0 + (m.r + m.kappa * m.theta * A1) / p.beta
    return AffineSolution(A0=A0, A1=A1, case=case, coeffs=q, notes=notes)


def general_eis_coeffs(m: MarketParams, p: PreferenceParams, zeta2: float) -> QuadraticCoeffs:
    """Quadratic for A1 in the log-linearized general-EIS equation."""
    g, phi = p.gamma, p.phi
    return QuadraticCoeffs(
        a1=m.sigma**2 / (2.0 * (1.0 - phi) ** 2) * _bracket(m, p),
        a2=(zeta2 + m.kappa - m.xi * m.rho * m.sigma * (1.0 - g) / g) / (1.0 - phi),
        a3=m.xi**2 / (2.0 * g),
    )


def _general_coefficients(m, p, zeta1, zeta2):
    """(A0, A1, quadratic, notes) for fixed linearization constants."""
    g, phi = p.gamma, p.phi
    # Solve for B = -A1/(1-phi), which obeys the unit-EIS-shaped quadratic
    # with beta replaced by zeta2; B is continuous through phi = 1.
    reduced = QuadraticCoeffs(
        a1=0.5 * m.sigma**2 * _bracket(m, p),
        a2=m.xi * m.rho * m.sigma * (1.0 - g) / g - zeta2 - m.kappa,
        a3=m.xi**2 / (2.0 * g),
    )
    B, notes = select_root(reduced)
    A1 = -(1.0 - phi) * B
    A0 = phi * math.log(p.beta) + (
        m.r * (phi - 1.0) + zeta1 - p.beta * phi + m.kappa * m.theta * A1
    ) / zeta2
    return A0, A1, general_eis_coeffs(m, p, zeta2), notes


def solve_general_eis(
    m: MarketParams,
    p: PreferenceParams,
    opts: FixedPointOptions | None = None,
) -> tuple[AffineSolution, LogLinearization]:
    """Log-linearized general-EIS solution.

    The mean log consumption-wealth ratio is closed at ``eval_nu`` (default:
    the stationary variance mean theta), i.e. ``m = phi ln beta - A0 - A1 nu*``,
    with ``zeta2 = exp(m)`` and ``zeta1 = zeta2 (1 - m)``.
    """
    opts = opts or FixedPointOptions()
    if p.unit_eis or p.unit_gamma:
        raise ParameterError("solve_general_eis requires phi != 1 and gamma != 1")
    nu_star = m.theta if opts.eval_nu is None else opts.eval_nu
    lnb = math.log(p.beta)

    zeta2 = p.beta
    resid = math.inf
    for it in range(1, opts.max_iter + 1):
        zeta1 = zeta2 * (1.0 - math.log(zeta2))
        A0, A1, q, notes = _general_coefficients(m, p, zeta1, zeta2)
        target = math.exp(p.phi * lnb - A0 - A1 * nu_star)
        resid = abs(target - zeta2)
        if resid <= opts.tol:
            break
        zeta2 = (1.0 - opts.damping) * zeta2 + opts.damping * target
        if not (zeta2 > 0.0 and math.isfinite(zeta2)):
            raise NonConvergence(f"linearization constant left (0, inf) at iteration {it}")
    else:
        raise NonConvergence(
            f"fixed point not reached after {opts.max_iter} iterations (residual {resid:.3g})"
        )
    mean_log_cw = p.phi * lnb - A0 - A1 * nu_star
    lin = LogLinearization(
        zeta1=zeta1,
        zeta2=zeta2,
        mean_log_cw=mean_log_cw,
        iterations=it,
        final_residual=resid,
        eval_nu=nu_star,
    )
    return AffineSolution(A0=A0, A1=A1, case=CaseTag.INF_GENERAL, coeffs=q, notes=notes), lin


def solve_infinite(m: MarketParams, p: PreferenceParams, opts: FixedPointOptions | None = None):
    """Dispatch on the case; returns ``(solution, linearization or None)``."""
    case = classify_case(m, p)
    if case.finite:
        raise ParameterError(f"{case.value} is a finite-horizon case")
    if case is CaseTag.INF_GENERAL:
        return solve_general_eis(m, p, opts)
    return solve_unit_eis(m, p), None


def portfolio_weight(s_case: CaseTag, A1, m: MarketParams, p: PreferenceParams):
    g = p.gamma
    if s_case.general_eis:
        return m.xi / g - m.rho * m.sigma * (1.0 - g) * (A1 / (1.0 - p.phi)) / g
    return m.xi / g + m.rho * m.sigma * (1.0 - g) * A1 / g


def consumption_ratio(s_case: CaseTag, A0, A1, nu, p: PreferenceParams):
    if s_case.general_eis:
        return p.beta**p.phi * np.exp(-A0 - A1 * nu)
    if np.ndim(nu):
        return np.full(np.shape(nu), p.beta)
    return p.beta


def strategy_infinite(s: AffineSolution, m: MarketParams, p: PreferenceParams, nu: float) -> Strategy:
    c = consumption_ratio(s.case, s.A0, s.A1, nu, p)
    return Strategy(c_over_x=float(c), pi=float(portfolio_weight(s.case, s.A1, m, p)), nu=float(nu))


def value_function_infinite(s: AffineSolution, m: MarketParams, p: PreferenceParams, x, nu):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterError("wealth must be > 0")
    L = s.A0 + s.A1 * np.asarray(nu, dtype=float)
    g = p.gamma
    if s.case is CaseTag.LOG_UTILITY:
        out = np.log(x) + L
    elif s.case is CaseTag.INF_UNIT:
        out = x ** (1.0 - g) / (1.0 - g) * np.exp((1.0 - g) * L)
    else:
        out = x ** (1.0 - g) / (1.0 - g) * np.exp(-(1.0 - g) / (1.0 - p.phi) * L)
    return out[()] if out.ndim == 0 else out
