"""Parameter containers, validation and case classification.

Market: Heston stochastic volatility,

    dS/S = (r + xi*nu) dt + sqrt(nu) (rho dW^nu + sqrt(1-rho^2) dW^perp)
    dnu  = kappa (theta - nu) dt + sigma sqrt(nu) dW^nu

so that the general coefficient functions are eta(nu) = xi sqrt(nu),
G(nu) = sqrt(nu), m1(nu) = kappa (theta - nu), m2(nu) = sigma sqrt(nu).

Preferences: Epstein-Zin stochastic differential utility with discount rate
beta, relative risk aversion gamma, EIS phi and (finite horizon) bequest
weight epsilon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .errors import ParameterError


class CaseTag(str, enum.Enum):
    INF_UNIT = "inf-unit"
    INF_GENERAL = "inf-general"
    FIN_UNIT = "fin-unit"
    FIN_GENERAL = "fin-general"
    LOG_UTILITY = "log-utility"

    @property
    def finite(self) -> bool:
        return self in (CaseTag.FIN_UNIT, CaseTag.FIN_GENERAL)

    @property
    def general_eis(self) -> bool:
        return self in (CaseTag.INF_GENERAL, CaseTag.FIN_GENERAL)

    @property
    def unit_eis(self) -> bool:
        return not self.general_eis


@dataclass(frozen=True)
class MarketParams:
    r: float
    xi: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    nu0: float
    x0: float = 1.0

    @property
    def feller_ratio(self) -> float:
        return 2.0 * self.kappa * self.theta / self.sigma**2

    # Heston instantiation of the general coefficient functions.
    def eta(self, nu):
        return self.xi * _sqrt(nu)

    def m1(self, nu):
        return self.kappa * (self.theta - nu)

    def m2(self, nu):
        return self.sigma * _sqrt(nu)


@dataclass(frozen=True)
class PreferenceParams:
    beta: float
    gamma: float
    phi: float
    epsilon: float = 1.0
    horizon: float = math.inf

    @property
    def finite(self) -> bool:
        return math.isfinite(self.horizon)

    @property
    def T(self) -> float:
        return self.horizon

    @property
    def unit_eis(self) -> bool:
        return self.phi == 1.0

    @property
    def unit_gamma(self) -> bool:
        return self.gamma == 1.0


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return not self.errors

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(
            self.errors + other.errors,
            self.warnings + other.warnings,
            {**self.notes, **other.notes},
        )

    def raise_if_rejected(self) -> None:
        if self.errors:
            raise ParameterError("; ".join(self.errors))


def _sqrt(nu):
    try:
        return math.sqrt(nu)
    except TypeError:
        import numpy as np

        return np.sqrt(nu)


def validate_market(m: MarketParams) -> ValidationReport:
    rep = ValidationReport()
    for name in ("r", "kappa", "theta", "sigma", "nu0", "x0"):
        v = getattr(m, name)
        if not (math.isfinite(v) and v > 0):
            rep.errors.append(f"{name} must be > 0 (got {v})")
    if not (math.isfinite(m.xi) and m.xi >= 0):
        rep.errors.append(f"xi must be >= 0 (got {m.xi})")
    if not (-1.0 <= m.rho <= 1.0):
        rep.errors.append(f"rho out of [-1,1] (got {m.rho})")
    if not rep.errors:
        ratio = m.feller_ratio
        rep.notes["feller_ratio"] = ratio
        if ratio < 1.0:
            rep.warnings.append(
                f"Feller condition violated: 2*kappa*theta/sigma^2 = {ratio:.6g} < 1"
            )
    return rep


def eis_region(gamma: float, phi: float) -> str | None:
    """Return which of the four admissible (gamma, phi) regions holds, if any."""
    if gamma > 1 and phi > 1:
        return "i"
    if gamma > 1 and phi < 1 and gamma * phi <= 1:
        return "ii"
    if gamma < 1 and phi < 1:
        return "iii"
    if gamma < 1 and phi > 1 and gamma * phi >= 1:
        return "iv"
    return None


def validate_preferences(p: PreferenceParams) -> ValidationReport:
    rep = ValidationReport()
    for name in ("beta", "gamma", "phi", "epsilon"):
        v = getattr(p, name)
        if not (math.isfinite(v) and v > 0):
            rep.errors.append(f"{name} must be > 0 (got {v})")
    if not (p.horizon > 0):
        rep.errors.append(f"horizon must be 'inf' or a positive number (got {p.horizon})")
    if rep.errors:
        return rep

    if p.unit_gamma and p.unit_eis:
        rep.notes["tag"] = "log-utility"
        if p.finite:
            rep.errors.append("log utility (gamma=1, phi=1) is supported for horizon=inf only")
    elif p.unit_gamma:
        rep.errors.append("gamma=1 requires phi=1 (the Epstein-Zin aggregator needs gamma != 1)")
    elif not p.unit_eis:
        region = eis_region(p.gamma, p.phi)
        if region is None:
            rep.errors.append(
                f"(gamma, phi) = ({p.gamma}, {p.phi}) lies in none of the four admissible regions: "
                "gamma>1,phi>1 | gamma>1,phi<1,gamma*phi<=1 | gamma<1,phi<1 | gamma<1,phi>1,gamma*phi>=1"
            )
        else:
            rep.notes["eis_region"] = region

    if not (p.gamma > 1 and p.phi <= 1):
        rep.warnings.append("outside the phi<=1, gamma>1 region of the reference parameters")
    # Unit EIS: optimal consumption c* = beta*x is strictly positive for x > 0;
    # no upper or lower consumption bound is enforced.
    if p.unit_eis:
        rep.notes["unit_eis_consumption_positive"] = p.beta > 0
    return rep


def classify_case(m: MarketParams, p: PreferenceParams) -> CaseTag:
    validate_market(m).merge(validate_preferences(p)).raise_if_rejected()
    if p.unit_eis and p.unit_gamma:
        return CaseTag.LOG_UTILITY
    if p.finite:
        return CaseTag.FIN_UNIT if p.unit_eis else CaseTag.FIN_GENERAL
    return CaseTag.INF_UNIT if p.unit_eis else CaseTag.INF_GENERAL


def adapt_to_case(p: PreferenceParams, case: CaseTag, T_default: float = 10.0) -> tuple[PreferenceParams, list[str]]:
    """Force the EIS and horizon of ``p`` to those of ``case``.

    Unit-EIS cases set phi = 1, infinite cases drop the horizon, finite cases
    fall back to ``T_default`` when none is configured.  A general-EIS case
    cannot be forced from phi = 1, and log utility is never forced.  Returns
    the adapted preferences and a description of each override.
    """
    case = CaseTag(case)
    if case is CaseTag.LOG_UTILITY:
        if not (p.unit_gamma and p.unit_eis and not p.finite):
            raise ParameterError("log-utility needs gamma = 1, phi = 1 and horizon = inf in the configuration")
        return p, []
    notes: list[str] = []
    if case.unit_eis and p.phi != 1.0:
        notes.append(f"phi {p.phi!r} -> 1")
        p = replace(p, phi=1.0)
    if case.general_eis and p.phi == 1.0:
        raise ParameterError(f"case {case.value} needs phi != 1 in the configuration")
    if case.finite and not p.finite:
        notes.append(f"horizon inf -> {T_default!r}")
        p = replace(p, horizon=T_default)
    if not case.finite and p.finite:
        notes.append(f"horizon {p.horizon!r} -> inf")
        p = replace(p, horizon=math.inf)
    return p, notes


# ---------------------------------------------------------------------------
# Flat key=value configuration files
# ---------------------------------------------------------------------------

CONFIG_KEYS = {
    "r": "risk-free rate r (1/year, > 0)",
    "xi": "volatility risk premium xi, excess drift xi*nu (accepts fractions such as 7/15)",
    "kappa": "mean-reversion speed kappa of the variance (1/year, > 0)",
    "theta": "long-run variance theta (> 0)",
    "sigma": "volatility of variance sigma (> 0)",
    "rho": "correlation rho between stock and variance shocks, in [-1, 1]",
    "nu0": "initial variance nu_0 (> 0; default theta)",
    "x0": "initial wealth X_0 (> 0; default 1)",
    "beta": "time-preference (discount) rate beta (> 0)",
    "gamma": "relative risk aversion gamma (> 0)",
    "phi": "elasticity of intertemporal substitution phi (> 0; exactly 1 selects unit EIS)",
    "epsilon": "bequest weight epsilon (> 0; finite horizon only; default 1)",
    "horizon": "'inf' for the infinite horizon or a positive horizon T in years",
}

_OPTIONAL = {"nu0", "x0", "epsilon"}

REFERENCE_CONFIG = """\
# Reference Heston market and Epstein-Zin preferences
r = 0.05
xi = 7/15
kappa = 5
theta = 0.0225
sigma = 0.25
rho = -0.5
nu0 = 0.0225
x0 = 1
beta = 0.08
gamma = 2
phi = 0.125
epsilon = 1
horizon = 10
"""


def _parse_number(key: str, text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"config key {key!r}: cannot parse number {text!r}") from None


def parse_config(text: str) -> dict[str, Fraction | float]:
    """Parse the flat ``key = value`` format into exact values.

    Blank lines and ``#`` comments are ignored.  Unknown or duplicate keys are
    errors.  ``horizon`` maps to ``math.inf`` for ``inf``.
    """
    values: dict[str, Fraction | float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"config line {lineno}: duplicate key {key!r}")
        if key == "horizon" and val.lower() in ("inf", "infinite", "infinity"):
            values[key] = math.inf
        else:
            values[key] = _parse_number(key, val)
    missing = [k for k in CONFIG_KEYS if k not in values and k not in _OPTIONAL]
    if missing:
        raise ParameterError(f"config is missing required keys: {', '.join(missing)}")
    return values


def params_from_values(values: dict) -> tuple[MarketParams, PreferenceParams]:
    v = {k: float(x) for k, x in values.items()}
    market = MarketParams(
        r=v["r"],
        xi=v["xi"],
        kappa=v["kappa"],
        theta=v["theta"],
        sigma=v["sigma"],
        rho=v["rho"],
        nu0=v.get("nu0", v["theta"]),
        x0=v.get("x0", 1.0),
    )
    prefs = PreferenceParams(
        beta=v["beta"],
        gamma=v["gamma"],
        phi=v["phi"],
        epsilon=v.get("epsilon", 1.0),
        horizon=v["horizon"],
    )
    return market, prefs


def load_config(path: str | Path) -> tuple[MarketParams, PreferenceParams]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    return params_from_values(parse_config(text))


def reference_params(**overrides) -> tuple[MarketParams, PreferenceParams]:
    """Reference Heston parameters (horizon T=10); keyword overrides are
    applied to whichever container owns the field."""
    m, p = params_from_values(parse_config(REFERENCE_CONFIG))
    mkeys = {f.name for f in fields(MarketParams)}
    m = replace(m, **{k: v for k, v in overrides.items() if k in mkeys})
    p = replace(p, **{k: v for k, v in overrides.items() if k not in mkeys})
    return m, p


def dump_config(m: MarketParams, p: PreferenceParams) -> str:
    lines = [f"{f.name} = {getattr(m, f.name)!r}" for f in fields(MarketParams)]
    for name in ("beta", "gamma", "phi", "epsilon"):
        lines.append(f"{name} = {getattr(p, name)!r}")
    lines.append(f"horizon = {'inf' if not p.finite else repr(p.horizon)}")
    return "\n".join(lines) + "\n"
