"""Independent checks of solver output.

* Reduced-PDE residuals: the HJB equation divided through by the power form
  of the value function leaves a PDE in ``L = ln h``.  Each term is evaluated
  separately so the residual can be reported relative to the largest term.
* First-order conditions: the Hamiltonian inside the HJB supremum is
  differentiated numerically in (c, psi) at the candidate optimum.
* Method-of-lines oracles: the finite-horizon PDEs are solved directly for
  h(tau, nu) on a nu-grid, independent of the affine reduction.
* Admissibility: the moment bound on the portfolio weight, in both of the
  forms in which it can be written.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InstabilityDetected, ParameterError
from .finite_solver import (
    CoefficientPath,
    TimeGrid,
    riccati_closed_form_derivative,
    solve_general_eis_finite,
    solve_unit_eis_finite,
)
from .infinite_solver import AffineSolution, LogLinearization, consumption_ratio, portfolio_weight
from .model import CaseTag, MarketParams, PreferenceParams

# ---------------------------------------------------------------------------
# Aggregator
# ---------------------------------------------------------------------------


def aggregator_eval(c: float, J: float, p: PreferenceParams) -> float:
    """Epstein-Zin aggregator f(c, J); log utility when gamma = phi = 1."""
    if not c > 0:
        raise DomainError(f"consumption must be > 0 (got {c})")
    g, phi, b = p.gamma, p.phi, p.beta
    if p.unit_gamma:
        if not p.unit_eis:
            raise DomainError("gamma = 1 requires phi = 1")
        return b * (math.log(c) - J)
    u = (1.0 - g) * J
    if not u > 0:
        raise DomainError(f"(1-gamma)*J must be > 0 (got {u})")
    if p.unit_eis:
        return b * u * (math.log(c) - math.log(u) / (1.0 - g))
    rho_ = 1.0 - 1.0 / phi
    try:
        return b / rho_ * u * ((c / u ** (1.0 / (1.0 - g))) ** rho_ - 1.0)
    except OverflowError:
        raise DomainError(f"aggregator overflows float range at c={c!r}, J={J!r}") from None


# ---------------------------------------------------------------------------
# Reduced-PDE residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    pde_id: str
    grid: np.ndarray
    residuals: np.ndarray
    scale: np.ndarray
    tau: np.ndarray | None = None

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def max_rel(self) -> float:
        return float(np.max(np.abs(self.residuals) / self.scale))

    def to_dict(self) -> dict:
        return {"pde_id": self.pde_id, "max_abs": self.max_abs, "max_rel": self.max_rel, "nodes": int(self.residuals.size)}


def _fd4(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid (one-sided at the ends)."""
    n = y.size
    if n < 5:
        raise ParameterError("need at least 5 nodes for the fourth-order difference")
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    fwd = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    fwd1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[0] = fwd @ y[:5]
    d[1] = fwd1 @ y[:5]
    d[-1] = -(fwd @ y[-1:-6:-1])
    d[-2] = -(fwd1 @ y[-1:-6:-1])
    return d


def _pde_terms(case: CaseTag, m: MarketParams, p: PreferenceParams, nu, L, g, gp, Ltau, lin):
    gam, rho, phi, b = p.gamma, m.rho, p.phi, p.beta
    eta2 = m.xi**2 * nu
    drift = m.m1(nu) + m.xi * rho * m.sigma * nu * (1.0 - gam) / gam
    m2sq = m.sigma**2 * nu
    ones = np.ones_like(L)
    if not case.general_eis:
        terms = [
            (m.r - b) * ones,
            eta2 / (2.0 * gam),
            b * (math.log(b) - L),
            drift * g,
            0.5 * m2sq * (rho**2 * (1.0 - gam) ** 2 / gam - gam) * g * g,
            0.5 * m2sq * (gp + g * g),
        ]
        if case.finite:
            terms.append(-Ltau)
        return terms
    if lin is None:
        cw = np.exp(phi * math.log(b) - L)
    else:
        z_lo, z_hi = lin
        cw = z_lo + z_hi * (phi * math.log(b) - L)
    terms = [
        m.r * ones,
        -cw,
        eta2 / (2.0 * gam),
        b * phi / (phi - 1.0) * (cw / b - 1.0),
        -drift * g / (1.0 - phi),
        m2sq * (2.0 - phi - gam + rho**2 * (1.0 - gam) ** 2 / gam) / (2.0 * (1.0 - phi) ** 2) * g * g,
        -m2sq * (gp + g * g) / (2.0 * (1.0 - phi)),
    ]
    if case.finite:
        terms.append(Ltau / (1.0 - phi))
    return terms


_PDE_IDS = {
    (CaseTag.INF_UNIT, False): "reduced-inf-unit",
    (CaseTag.LOG_UTILITY, False): "reduced-inf-unit(gamma=1)",
    (CaseTag.INF_GENERAL, False): "reduced-inf-general-linearized",
    (CaseTag.INF_GENERAL, True): "reduced-inf-general-exact",
    (CaseTag.FIN_UNIT, False): "reduced-fin-unit",
    (CaseTag.FIN_GENERAL, False): "reduced-fin-general-linearized",
    (CaseTag.FIN_GENERAL, True): "reduced-fin-general-exact",
}


def _report(pde_id, nu, terms, tau=None) -> ResidualReport:
    stack = np.array(terms)
    res = stack.sum(axis=0)
    scale = np.max(np.abs(stack), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return ResidualReport(pde_id=pde_id, grid=np.asarray(nu), residuals=res, scale=scale, tau=tau)


def _path_derivatives(path: CoefficientPath):
    """tau-derivatives of A0 and A1 along the path."""
    h = path.grid.h
    dA0 = _fd4(path.A0, h)
    if path.riccati is not None:
        dA1 = riccati_closed_form_derivative(path.riccati, path.tau)
    else:
        dA1 = _fd4(path.A1, h)
    return dA0, dA1


def reduced_pde_residual(
    solution,
    m: MarketParams,
    p: PreferenceParams,
    nu_grid,
    linearization: LogLinearization | None = None,
    exact: bool = False,
    tau_stride: int = 10,
) -> ResidualReport:
    """Residual of the reduced PDE at an affine solution.

    ``solution`` is an :class:`AffineSolution` (infinite horizon, with
    ``linearization`` for general EIS) or a :class:`CoefficientPath`.  General
    EIS is checked against the linearized equation unless ``exact`` is set.
    Finite horizons are evaluated on every ``tau_stride``-th tau node.
    """
    nu = np.asarray(nu_grid, dtype=float)
    if np.any(nu <= 0):
        raise ParameterError("nu grid must be positive")
    case = solution.case
    key = (case, bool(exact) and case.general_eis)
    pde_id = _PDE_IDS[key]

    if isinstance(solution, AffineSolution):
        L = solution.A0 + solution.A1 * nu
        g = np.full_like(nu, solution.A1)
        lin = None
        if case.general_eis and not exact:
            if linearization is None:
                raise ParameterError("general-EIS residual needs the linearization constants")
            lin = (linearization.zeta1, linearization.zeta2)
        # log utility uses the unit template evaluated at gamma = 1
        terms = _pde_terms(case, m, p, nu, L, g, np.zeros_like(nu), 0.0, lin)
        return _report(pde_id, nu, terms)

    path: CoefficientPath = solution
    idx = np.arange(0, path.tau.size, max(1, tau_stride))
    dA0, dA1 = _path_derivatives(path)
    T_, N_ = np.meshgrid(path.tau[idx], nu, indexing="ij")
    A0 = path.A0[idx][:, None]
    A1 = path.A1[idx][:, None]
    L = A0 + A1 * N_
    g = np.broadcast_to(A1, N_.shape)
    Ltau = dA0[idx][:, None] + dA1[idx][:, None] * N_
    lin = None
    if case.general_eis and not exact:
        lin = (path.zeta3[idx][:, None], path.zeta4[idx][:, None])
    terms = _pde_terms(case, m, p, N_, L, g, np.zeros_like(N_), Ltau, lin)
    return _report(pde_id, N_, terms, tau=T_)


def linearization_gap(solution, m, p, nu_grid, linearization=None, tau_stride: int = 10) -> ResidualReport:
    """Exact minus linearized residual of a general-EIS solution.

    Both residuals share every derivative term, so the difference isolates the
    log-linearization error; it vanishes at the expansion point nu = theta.
    """
    ex = reduced_pde_residual(solution, m, p, nu_grid, linearization, exact=True, tau_stride=tau_stride)
    li = reduced_pde_residual(solution, m, p, nu_grid, linearization, exact=False, tau_stride=tau_stride)
    return ResidualReport(
        pde_id="linearization-gap",
        grid=ex.grid,
        residuals=ex.residuals - li.residuals,
        scale=np.maximum(ex.scale, li.scale),
        tau=ex.tau,
    )


# ---------------------------------------------------------------------------
# First-order conditions of the HJB supremum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FocReport:
    x: float
    nu: float
    c_star: float
    psi_star: float
    dH_dc_rel: float
    dH_dpsi_rel: float
    d2H_dpsi2: float
    perturbed_drop: float
    hjb_value: float
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.dH_dc_rel <= self.tol
            and self.dH_dpsi_rel <= self.tol
            and self.d2H_dpsi2 < 0
            and self.perturbed_drop > 0
        )


def _omega_parts(case: CaseTag, L, g, Ltau, p: PreferenceParams, x: float):
    """omega and its partials for the power / log forms of the value function."""
    gam, phi = p.gamma, p.phi
    if case is CaseTag.LOG_UTILITY:
        w = math.log(x) + L
        return dict(w=w, wx=1.0 / x, wxx=-1.0 / x**2, wn=g, wnn=0.0, wxn=0.0, wt=0.0)
    k = 1.0 if case.unit_eis else -1.0 / (1.0 - phi)
    e = math.exp((1.0 - gam) * k * L)
    w = x ** (1.0 - gam) / (1.0 - gam) * e
    a = (1.0 - gam) * k
    return dict(
        w=w,
        wx=x ** (-gam) * e,
        wxx=-gam * x ** (-gam - 1.0) * e,
        wn=w * a * g,
        wnn=w * (a * a * g * g),
        wxn=x ** (-gam) * e * a * g,
        wt=-w * a * Ltau,
    )


def _hamiltonian_terms(c, psi, x, nu, om, m: MarketParams, p: PreferenceParams):
    eta = m.xi * math.sqrt(nu)
    m2 = m.sigma * math.sqrt(nu)
    return [
        om["wt"],
        (m.r + psi * eta) * x * om["wx"],
        -c * om["wx"],
        0.5 * psi * psi * x * x * om["wxx"],
        m.m1(nu) * om["wn"],
        0.5 * m2 * m2 * om["wnn"],
        x * psi * m.rho * m2 * om["wxn"],
        aggregator_eval(c, om["w"], p),
    ]


def foc_gradient_check(
    solution,
    m: MarketParams,
    p: PreferenceParams,
    x: float,
    nu: float,
    t: float = 0.0,
    rel_step: float = 1e-6,
    tol: float = 1e-5,
) -> FocReport:
    """Central-difference partials of the Hamiltonian at the candidate optimum.

    Each partial is reported relative to the magnitude of the terms it is
    built from, e.g. ``|dH/dc| / (|omega_x| + |f_c|)``.
    """
    if not (x > 0 and nu > 0):
        raise DomainError("x and nu must be > 0")
    case = solution.case
    if isinstance(solution, CoefficientPath):
        tau = solution.grid.T - t
        A0, A1 = solution.at(tau)
        dA0, dA1 = _path_derivatives(solution)
        Ltau = float(np.interp(tau, solution.tau, dA0) + np.interp(tau, solution.tau, dA1) * nu)
    else:
        A0, A1, Ltau = solution.A0, solution.A1, 0.0
    A0, A1 = float(A0), float(A1)
    L = A0 + A1 * nu
    om = _omega_parts(case, L, A1, Ltau, p, x)
    c_star = float(consumption_ratio(case, A0, A1, nu, p)) * x
    psi_star = float(portfolio_weight(case, A1, m, p)) * math.sqrt(nu)

    def H(c, psi):
        return math.fsum(_hamiltonian_terms(c, psi, x, nu, om, m, p))

    hc = rel_step * abs(c_star)
    if c_star - hc <= 0:
        raise DomainError("perturbed consumption leaves (0, inf)")
    hp = rel_step * max(abs(psi_star), 1.0)
    dHc = (H(c_star + hc, psi_star) - H(c_star - hc, psi_star)) / (2 * hc)
    dHp = (H(c_star, psi_star + hp) - H(c_star, psi_star - hp)) / (2 * hp)
    H0 = H(c_star, psi_star)
    d2Hp = (H(c_star, psi_star + 1e-3) - 2 * H0 + H(c_star, psi_star - 1e-3)) / 1e-6

    # scales of the pieces each partial is made of
    fc = (aggregator_eval(c_star + hc, om["w"], p) - aggregator_eval(c_star - hc, om["w"], p)) / (2 * hc)
    scale_c = abs(om["wx"]) + abs(fc)
    eta = m.xi * math.sqrt(nu)
    scale_p = abs(eta * x * om["wx"]) + abs(psi_star * x * x * om["wxx"]) + abs(x * m.rho * m.sigma * math.sqrt(nu) * om["wxn"])
    return FocReport(
        x=x,
        nu=nu,
        c_star=c_star,
        psi_star=psi_star,
        dH_dc_rel=abs(dHc) / scale_c,
        dH_dpsi_rel=abs(dHp) / scale_p,
        d2H_dpsi2=d2Hp,
        perturbed_drop=H0 - H(c_star, psi_star + 0.1),
        hjb_value=H0,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# Method-of-lines oracles for the finite-horizon PDEs in h(tau, nu)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleMesh:
    nu_min: float = 0.005
    nu_max: float = 0.09
    n_nu: int = 61
    n_tau: int = 4000

    def doubled(self) -> "OracleMesh":
        return OracleMesh(self.nu_min, self.nu_max, 2 * self.n_nu - 1, 2 * self.n_tau)


@dataclass(frozen=True)
class OracleComparison:
    tau: np.ndarray
    nu: np.ndarray
    closed_form: np.ndarray
    oracle: np.ndarray
    substeps: int
    interior: slice = field(default=slice(None))

    @property
    def rel_diff(self) -> np.ndarray:
        return np.abs(self.oracle - self.closed_form) / np.abs(self.closed_form)

    @property
    def max_rel_diff(self) -> float:
        return float(np.max(self.rel_diff[:, self.interior]))

    def to_csv(self, path: str | Path | None = None, tau_stride: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "nu", "closed_form", "oracle", "rel_diff"])
        rd = self.rel_diff
        for i in range(0, self.tau.size, tau_stride):
            for j, nu in enumerate(self.nu):
                w.writerow([repr(float(self.tau[i])), repr(float(nu)), repr(float(self.closed_form[i, j])),
                            repr(float(self.oracle[i, j])), repr(float(rd[i, j]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _d_nu(h: np.ndarray, dx: float):
    """Second-order first and second nu-derivatives, one-sided at the ends."""
    d1 = np.empty_like(h)
    d2 = np.empty_like(h)
    d1[1:-1] = (h[2:] - h[:-2]) / (2 * dx)
    d2[1:-1] = (h[2:] - 2 * h[1:-1] + h[:-2]) / (dx * dx)
    d1[0] = (-3 * h[0] + 4 * h[1] - h[2]) / (2 * dx)
    d1[-1] = (3 * h[-1] - 4 * h[-2] + h[-3]) / (2 * dx)
    d2[0] = (2 * h[0] - 5 * h[1] + 4 * h[2] - h[3]) / (dx * dx)
    d2[-1] = (2 * h[-1] - 5 * h[-2] + 4 * h[-3] - h[-4]) / (dx * dx)
    return d1, d2


def _mol_rk4(rhs, h0: np.ndarray, T: float, n_tau: int, substeps: int, coef=None) -> np.ndarray:
    """Classical RK4 in tau; ``rhs(c, h)`` receives ``coef`` evaluated at the stage time."""
    out = np.empty((n_tau + 1, h0.size))
    out[0] = h0
    h = h0.copy()
    n = n_tau * substeps
    dt = T / n
    # stage times are multiples of dt/2, so tabulate the coefficients once
    cvals = coef(np.linspace(0.0, T, 2 * n + 1)) if coef is not None else [None] * (2 * n + 1)
    k = 0
    for i in range(n_tau):
        for _ in range(substeps):
            c0, ch, c1 = cvals[2 * k], cvals[2 * k + 1], cvals[2 * k + 2]
            k1 = rhs(c0, h)
            k2 = rhs(ch, h + 0.5 * dt * k1)
            k3 = rhs(ch, h + 0.5 * dt * k2)
            k4 = rhs(c1, h + dt * k3)
            h = h + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            k += 1
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise InstabilityDetected(f"h left (0, inf) at tau = {(i + 1) * T / n_tau:.6g}")
        out[i + 1] = h
    return out


def _substeps(nu: np.ndarray, m: MarketParams, T: float, n_tau: int, react: float) -> int:
    """RK4 substeps per output step from a spectral-radius bound of the operator."""
    dx = nu[1] - nu[0]
    diff = 0.5 * m.sigma**2 * nu.max()
    adv = np.max(np.abs(m.m1(nu))) + abs(m.xi * m.rho * m.sigma) * nu.max()
    radius = 6.0 * diff / dx**2 + 2.0 * adv / dx + abs(react) + 1.0
    dt = T / n_tau
    return max(1, math.ceil(dt * radius / 2.0))


def _nu_grid(mesh: OracleMesh) -> np.ndarray:
    if not (0 < mesh.nu_min < mesh.nu_max) or mesh.n_nu < 7:
        raise ParameterError("oracle mesh needs 0 < nu_min < nu_max and n_nu >= 7")
    return np.linspace(mesh.nu_min, mesh.nu_max, mesh.n_nu)


def _interior_third(n: int) -> slice:
    return slice(n // 3, n - n // 3)


def pde_oracle_finite_unit(
    m: MarketParams, p: PreferenceParams, mesh: OracleMesh | None = None, path: CoefficientPath | None = None
) -> OracleComparison:
    if not p.unit_eis or p.unit_gamma or not p.finite:
        raise ParameterError("unit-EIS oracle needs phi = 1, gamma != 1 and a finite horizon")
    mesh = mesh or OracleMesh()
    nu = _nu_grid(mesh)
    dx = nu[1] - nu[0]
    gam, b = p.gamma, p.beta
    base = m.r - b + m.xi**2 * nu / (2 * gam) + b * math.log(b)
    drift = m.m1(nu) + m.xi * m.rho * m.sigma * nu * (1 - gam) / gam
    quad = 0.5 * m.sigma**2 * nu * (m.rho**2 * (1 - gam) ** 2 / gam - gam)
    diff = 0.5 * m.sigma**2 * nu

    def rhs(_c, h):
        d1, d2 = _d_nu(h, dx)
        return (base - b * np.log(h)) * h + drift * d1 + quad * d1 * d1 / h + diff * d2

    sub = _substeps(nu, m, p.T, mesh.n_tau, b)
    H = _mol_rk4(rhs, np.full(nu.size, p.epsilon), p.T, mesh.n_tau, sub)
    path = path or solve_unit_eis_finite(m, p, TimeGrid(p.T, mesh.n_tau))
    return _compare(path, nu, H, sub, mesh)


def pde_oracle_finite_general(
    m: MarketParams, p: PreferenceParams, mesh: OracleMesh | None = None, path: CoefficientPath | None = None
) -> OracleComparison:
    if p.unit_eis or p.unit_gamma or not p.finite:
        raise ParameterError("general-EIS oracle needs phi != 1, gamma != 1 and a finite horizon")
    mesh = mesh or OracleMesh()
    nu = _nu_grid(mesh)
    dx = nu[1] - nu[0]
    gam, b, phi = p.gamma, p.beta, p.phi
    path = path or solve_general_eis_finite(m, p, TimeGrid(p.T, mesh.n_tau))
    zetas = CubicSpline(path.tau, np.column_stack([path.zeta3, path.zeta4]))
    lnb = math.log(b)
    base = m.r + m.xi**2 * nu / (2 * gam) - b * phi / (phi - 1)
    drift = m.m1(nu) + m.xi * m.rho * m.sigma * nu * (1 - gam) / gam
    quad = m.sigma**2 * nu * (2 - phi - gam + m.rho**2 * (1 - gam) ** 2 / gam) / (2 * (1 - phi) ** 2)
    diff = m.sigma**2 * nu / (2 * (1 - phi))
    cw_coef = phi / (phi - 1) - 1.0

    def rhs(z, h):
        d1, d2 = _d_nu(h, dx)
        cw = z[0] + z[1] * (phi * lnb - np.log(h))
        rest = base + cw_coef * cw - drift * d1 / (h * (1 - phi)) + quad * (d1 / h) ** 2 - diff * d2 / h
        return -(1 - phi) * h * rest

    sub = _substeps(nu, m, p.T, mesh.n_tau, float(np.max(path.zeta4)))
    H = _mol_rk4(rhs, np.full(nu.size, p.epsilon ** (phi - 1)), p.T, mesh.n_tau, sub, coef=zetas)
    return _compare(path, nu, H, sub, mesh)


def _compare(path: CoefficientPath, nu, H, sub, mesh: OracleMesh) -> OracleComparison:
    tau = np.linspace(0.0, path.grid.T, mesh.n_tau + 1)
    A0 = np.interp(tau, path.tau, path.A0)
    A1 = np.interp(tau, path.tau, path.A1)
    closed = np.exp(A0[:, None] + A1[:, None] * nu[None, :])
    return OracleComparison(tau=tau, nu=nu, closed_form=closed, oracle=H, substeps=sub, interior=_interior_third(nu.size))


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    weight_form_lhs: float
    weight_form_rhs: float
    weight_form_ok: bool
    coefficient_form_lhs: float
    coefficient_form_rhs: float
    coefficient_form_ok: bool
    note: str

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _pi_form(pi, m, p):
    g = p.gamma
    return 2 * (1 - g) * m.xi * pi - (1 - g) * pi**2 + 2 * (1 - g) ** 2 * pi**2


def _a1_form(B, m, p):
    g = p.gamma
    lhs = (1 - 2 * g) * m.rho**2 * m.sigma**2 * (1 - g) ** 2 * B**2 + 2 * m.xi * m.rho * m.sigma * (1 - g) ** 2 * B + m.xi**2
    rhs = math.inf if g == 1 else m.kappa**2 * g**2 / (2 * (1 - g) * m.sigma**2)
    return lhs, rhs


def admissibility_check(solution, m: MarketParams, p: PreferenceParams) -> AdmissibilityReport:
    """Moment bound on the optimal weight.

    The weight form ``2(1-g)xi pi - (1-g)pi^2 + 2(1-g)^2 pi^2 <= kappa^2/(2 sigma^2)``
    is operative.  The equivalent-looking form in the hedging coefficient
    ``(1-2g)rho^2 sigma^2 (1-g)^2 B^2 + 2 xi rho sigma (1-g)^2 B + xi^2 <=
    kappa^2 g^2 / (2 (1-g) sigma^2)`` is evaluated as written and reported
    alongside; ``B`` is A1 for unit EIS and -A1/(1-phi) for general EIS.
    Finite horizons are checked at every tau node and the worst node reported.
    """
    case = solution.case
    A1 = np.atleast_1d(np.asarray(solution.A1, dtype=float))
    pi = np.asarray(portfolio_weight(case, A1, m, p), dtype=float)
    B = -A1 / (1 - p.phi) if case.general_eis else A1
    w_rhs = m.kappa**2 / (2 * m.sigma**2)
    w_lhs = _pi_form(pi, m, p)
    a_lhs, a_rhs = _a1_form(B, m, p)
    ig = int(np.argmax(w_lhs - w_rhs))
    ia = int(np.argmax(a_lhs - a_rhs))
    w_ok = bool(np.all(w_lhs <= w_rhs))
    a_ok = bool(np.all(a_lhs <= a_rhs))
    note = ""
    if w_ok != a_ok:
        note = (
            "the two forms disagree; for gamma > 1 the hedging-coefficient form has a negative "
            "right-hand side kappa^2 gamma^2/(2(1-gamma)sigma^2), so the weight form is used"
        )
    return AdmissibilityReport(
        weight_form_lhs=float(w_lhs[ig]),
        weight_form_rhs=float(w_rhs),
        weight_form_ok=w_ok,
        coefficient_form_lhs=float(a_lhs[ia]),
        coefficient_form_rhs=float(a_rhs),
        coefficient_form_ok=a_ok,
        note=note,
    )
