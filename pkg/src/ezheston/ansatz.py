"""Coefficient matching for exponential-polynomial ansatzes.

The reduced HJB equations are expanded under

    h(nu) = exp(A0 + A1 nu + A2 nu^2 / 2 + ... + An nu^n / n)

with general polynomial coefficient functions eta^2, m1, eta*m2 and m2^2.
Each power of nu gives one equation in the unknowns A_k (and, for finite
horizons, their tau-derivatives dA_k).  The ansatz closes when no power above
n survives; otherwise a surviving top power of the form c * An^2 forces
An = 0, which contradicts the order of the ansatz unless c vanishes.  For
these templates c vanishing is equivalent to rho^2 = gamma / (gamma - 1),
which no admissible correlation satisfies.

Polynomials are sparse dictionaries with exact ``Fraction`` coefficients when
every input is rational, so "identically zero" is decided exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

from .errors import ParameterError

FLOAT_ZERO_TOL = 1e-12

Monomial = tuple  # sorted tuple of (symbol, exponent)


class Poly:
    """Sparse multivariate polynomial with numeric coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): c})

    @classmethod
    def sym(cls, name: str, c=1) -> "Poly":
        return cls({((name, 1),): c})

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = _mono_mul(k1, k2)
                out[k] = out.get(k, 0) + v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def symbols(self) -> set[str]:
        return {s for mono in self.terms for s, _ in mono}

    def pruned(self, tol: float) -> "Poly":
        return Poly({k: v for k, v in self.terms.items() if not (isinstance(v, float) and abs(v) <= tol)})

    def max_abs(self) -> float:
        return max((abs(float(v)) for v in self.terms.values()), default=0.0)

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono, c in sorted(self.terms.items(), key=lambda kv: (-sum(e for _, e in kv[0]), kv[0])):
            m = "*".join(s if e == 1 else f"{s}^{e}" for s, e in mono)
            parts.append(f"({c})" + (f"*{m}" if m else ""))
        return " + ".join(parts)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    d = dict(a)
    for s, e in b:
        d[s] = d.get(s, 0) + e
    return tuple(sorted(d.items()))


def _as_poly(x) -> Poly:
    return x if isinstance(x, Poly) else Poly.const(x)


# A polynomial in nu whose coefficients are Polys: list indexed by power.
NuPoly = list


def _nu_add(*ps: NuPoly) -> NuPoly:
    n = max(len(p) for p in ps)
    return [sum((p[i] for p in ps if i < len(p)), Poly()) for i in range(n)]


def _nu_mul(a: NuPoly, b: NuPoly) -> NuPoly:
    if not a or not b:
        return []
    out = [Poly() for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def _nu_scale(c, a: NuPoly) -> NuPoly:
    return [_as_poly(c) * x for x in a]


def _nu_from_numbers(cs: Iterable) -> NuPoly:
    return [Poly.const(c) for c in cs]


# ---------------------------------------------------------------------------
# Degree specifications and ansatz cases
# ---------------------------------------------------------------------------


def _degree(cs: tuple) -> int:
    for i in range(len(cs) - 1, -1, -1):
        if cs[i] != 0:
            return i
    return -1


@dataclass(frozen=True)
class DegreeSpec:
    """Coefficient lists (lowest degree first) of eta^2, m1, eta*m2 and m2^2."""

    eta_sq: tuple
    m1: tuple
    eta_m2: tuple
    m2_sq: tuple

    def degrees(self) -> dict[str, int]:
        return {k: _degree(getattr(self, k)) for k in ("eta_sq", "m1", "eta_m2", "m2_sq")}

    @property
    def constant_diffusion(self) -> bool:
        d = self.degrees()
        return d["eta_sq"] <= 2 and d["m1"] <= 1 and d["eta_m2"] <= 1 and d["m2_sq"] == 0

    @property
    def constant_premium(self) -> bool:
        return self.degrees()["eta_sq"] <= 0

    @property
    def all_linear(self) -> bool:
        return all(v <= 1 for v in self.degrees().values())

    def within_hypotheses(self, order: int) -> bool:
        if order == 0:
            return self.constant_premium or self.constant_diffusion or self.all_linear
        return self.constant_diffusion or self.all_linear


def heston_degrees(xi=Fraction(7, 15), kappa=Fraction(5), theta=Fraction(9, 400), sigma=Fraction(1, 4)) -> DegreeSpec:
    return DegreeSpec(
        eta_sq=(0, xi * xi),
        m1=(kappa * theta, -kappa),
        eta_m2=(0, xi * sigma),
        m2_sq=(0, sigma * sigma),
    )


DEGREE_PRESETS: dict[str, DegreeSpec] = {
    "heston": heston_degrees(),
    # generic representatives with every admissible coefficient nonzero
    "constant-diffusion": DegreeSpec(
        eta_sq=(Fraction(1, 10), Fraction(1, 5), Fraction(1, 2)),
        m1=(Fraction(1), Fraction(-2)),
        eta_m2=(Fraction(1, 10), Fraction(1, 3)),
        m2_sq=(Fraction(1, 16),),
    ),
    "constant-premium": DegreeSpec(
        eta_sq=(Fraction(1, 4),),
        m1=(Fraction(1), Fraction(-2)),
        eta_m2=(Fraction(1, 10),),
        m2_sq=(Fraction(1, 16),),
    ),
    "linear": DegreeSpec(
        eta_sq=(Fraction(1, 10), Fraction(1, 2)),
        m1=(Fraction(1), Fraction(-2)),
        eta_m2=(Fraction(0), Fraction(1, 3)),
        m2_sq=(Fraction(1, 16), Fraction(1, 4)),
    ),
}


class AnsatzCase(str, enum.Enum):
    INF_UNIT = "inf-unit"
    INF_GENERAL = "inf-general"
    FIN_UNIT = "fin-unit"
    FIN_GENERAL = "fin-general"

    @property
    def finite(self) -> bool:
        return self in (AnsatzCase.FIN_UNIT, AnsatzCase.FIN_GENERAL)

    @property
    def general(self) -> bool:
        return self in (AnsatzCase.INF_GENERAL, AnsatzCase.FIN_GENERAL)


@dataclass(frozen=True)
class AnsatzSpec:
    order: int
    case: AnsatzCase

    def __post_init__(self):
        if not isinstance(self.order, int) or self.order < 0:
            raise ParameterError(f"ansatz order must be a nonnegative integer (got {self.order!r})")
        object.__setattr__(self, "case", AnsatzCase(self.case))


class Verdict(str, enum.Enum):
    SOLVABLE = "Solvable"
    UNSOLVABLE = "Unsolvable"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class MatchReport:
    verdict: Verdict
    residual_powers: tuple[int, ...]
    witness: float | None
    witness_text: str
    matched_system_size: int
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "residual_powers": list(self.residual_powers),
            "witness": self.witness,
            "witness_text": self.witness_text,
            "matched_system_size": self.matched_system_size,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------


def _numeric(values: Iterable) -> tuple[bool, list]:
    """Return (exact, converted values); exact iff every input is rational."""
    vals = list(values)
    exact = all(isinstance(v, Rational) for v in vals)
    if exact:
        return True, [Fraction(v) for v in vals]
    return False, [float(v) for v in vals]


def _unknown(name: str) -> bool:
    return name.startswith("A") or name.startswith("dA")


def expand_matching_system(
    d: DegreeSpec, a: AnsatzSpec, gamma, rho, phi=Fraction(1, 8)
) -> list[Poly]:
    """Per-power coefficients (index = power of nu) of the reduced PDE under the ansatz.

    Unknowns are ``A0..An`` (and ``dA0..dAn`` for finite horizons, the
    tau-derivatives).  ``r``, ``beta``, ``lnbeta`` and the linearization
    constants are opaque symbols.
    """
    n = a.order
    coeff_lists = (d.eta_sq, d.m1, d.eta_m2, d.m2_sq)
    flat = [gamma, rho, phi] + [c for cs in coeff_lists for c in cs]
    exact, conv = _numeric(flat)
    g, rh, ph = conv[:3]
    if not g > 0:
        raise ParameterError("gamma must be > 0")
    if abs(rh) > 1:
        raise ParameterError("rho out of [-1,1]")
    one = Fraction(1) if exact else 1.0
    it = iter(conv[3:])
    eta_sq, m1, eta_m2, m2_sq = (_nu_from_numbers([next(it) for _ in cs]) for cs in coeff_lists)

    # L = ln h, Lnu = dL/dnu, Lnunu = d2L/dnu2, Ltau = dL/dtau
    L = [Poly.sym("A0")] + [Poly.sym(f"A{k}", one / k) for k in range(1, n + 1)]
    Lnu = [Poly.sym(f"A{k}") for k in range(1, n + 1)]
    Lnunu = [Poly.sym(f"A{k}", one * (k - 1)) for k in range(2, n + 1)]
    Ltau = [Poly.sym("dA0")] + [Poly.sym(f"dA{k}", one / k) for k in range(1, n + 1)]
    Lnu_sq = _nu_mul(Lnu, Lnu)
    # h_nu^2/h^2 = Lnu^2 and h_nunu/h = Lnunu + Lnu^2
    hnunu_over_h = _nu_add(Lnunu, Lnu_sq)

    drift = _nu_add(m1, _nu_scale(rh * (one - g) / g, eta_m2))
    r, beta, lnbeta = Poly.sym("r"), Poly.sym("beta"), Poly.sym("lnbeta")

    if not a.case.general:
        const = r - beta + beta * lnbeta
        terms = [
            [const],
            _nu_scale(one / (2 * g), eta_sq),
            _nu_scale(-beta, L),
            _nu_mul(drift, Lnu),
            _nu_scale(one / 2 * (rh * rh * (one - g) ** 2 / g - g), _nu_mul(m2_sq, Lnu_sq)),
            _nu_scale(one / 2, _nu_mul(m2_sq, hnunu_over_h)),
        ]
        if a.case.finite:
            terms.append(_nu_scale(-one, Ltau))
    else:
        if ph == 1:
            raise ParameterError("general-EIS templates require phi != 1")
        z_lo, z_hi = ("zeta3", "zeta4") if a.case.finite else ("zeta1", "zeta2")
        zl, zh = Poly.sym(z_lo), Poly.sym(z_hi)
        # linearized consumption-wealth ratio zl + zh (phi ln beta - L)
        cw = _nu_add([zl + zh * ph * lnbeta], _nu_scale(-zh, L))
        terms = [
            [r - beta * (ph / (ph - one))],
            _nu_scale(-one, cw),
            _nu_scale(one / (2 * g), eta_sq),
            _nu_scale(ph / (ph - one), cw),
            _nu_scale(-one / (one - ph), _nu_mul(drift, Lnu)),
            _nu_scale(
                (2 - ph - g + rh * rh * (one - g) ** 2 / g) / (2 * (one - ph) ** 2),
                _nu_mul(m2_sq, Lnu_sq),
            ),
            _nu_scale(-one / (2 * (one - ph)), _nu_mul(m2_sq, hnunu_over_h)),
        ]
        if a.case.finite:
            terms.append(_nu_scale(one / (one - ph), Ltau))

    system = _nu_add(*terms)
    if not exact:
        scale = max((p.max_abs() for p in system), default=0.0)
        tol = FLOAT_ZERO_TOL * max(1.0, scale)
        system = [p.pruned(tol) for p in system]
    while len(system) > 1 and system[-1].is_zero():
        system.pop()
    return system


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


def unit_bracket(gamma, rho):
    return 1 - gamma + rho * rho * (1 - gamma) ** 2 / gamma


def general_bracket(gamma, rho, phi):
    """Combined coefficient of Lnu^2 in the general-EIS template, times 2/m2^2."""
    return (2 - phi - gamma + rho * rho * (1 - gamma) ** 2 / gamma) / (1 - phi) ** 2 - 1 / (1 - phi)


def bracket_equivalence_gap(gamma, rho, phi) -> float:
    """|general bracket - unit bracket / (1-phi)^2|; zero up to rounding."""
    return abs(float(general_bracket(gamma, rho, phi) - unit_bracket(gamma, rho) / (1 - phi) ** 2))


def witness_infeasible(gamma) -> bool:
    """True iff rho^2 = gamma/(gamma-1) has no solution with rho in [-1, 1]."""
    if not gamma > 0 or gamma == 1:
        raise ParameterError("witness requires gamma > 0 and gamma != 1")
    need = gamma / (gamma - 1)
    return not (0 <= need <= 1)


def _contradiction(eq: Poly, n: int) -> str | None:
    """Reason why ``eq = 0`` is impossible for an order-n ansatz, if evident."""
    unknowns = {s for s in eq.symbols() if _unknown(s)}
    if not unknowns and len(eq.terms) == 1:
        return "nonzero term free of unknowns"
    if n >= 1 and unknowns == {f"A{n}"} and len(eq.terms) == 1:
        (mono, _c), = eq.terms.items()
        if all(s == f"A{n}" for s, _ in mono):
            return f"forces A{n} = 0"
    return None


def judge_solvability(d: DegreeSpec, a: AnsatzSpec, gamma, rho, phi=Fraction(1, 8)) -> MatchReport:
    n = a.order
    system = expand_matching_system(d, a, gamma, rho, phi)
    residual = tuple(j for j in range(n + 1, len(system)) if not system[j].is_zero())
    notes: list[str] = [f"degree classes: constant_diffusion={d.constant_diffusion} constant_premium={d.constant_premium} "
        f"all_linear={d.all_linear}"]

    if not residual:
        if a.case.finite:
            missing = [j for j in range(n + 1) if f"dA{j}" not in system[j].symbols()]
            if missing:
                return MatchReport(Verdict.INDETERMINATE, (), None, f"powers {missing} carry no derivative term", 0, tuple(notes))
        verdict = Verdict.SOLVABLE if d.within_hypotheses(n) else Verdict.INDETERMINATE
        if verdict is Verdict.INDETERMINATE:
            notes.append("degrees exceed the hypotheses; matching closes but no conclusion is drawn")
        text = f"{n + 1} coefficient equations in {n + 1} unknowns (powers 0..{n})"
        return MatchReport(verdict, (), None, text, n + 1, tuple(notes))

    if not d.within_hypotheses(n):
        notes.append("degrees exceed the hypotheses; residual powers listed for information")
        return MatchReport(
            Verdict.INDETERMINATE, residual, None, "degree specification outside the analysed class", 0, tuple(notes)
        )

    for j in reversed(residual):
        why = _contradiction(system[j], n)
        if why is None:
            continue
        mono_syms = system[j].symbols()
        if why.startswith("forces") and any(s == f"A{n}" for s in mono_syms):
            w = general_bracket(gamma, rho, phi) if a.case.general else unit_bracket(gamma, rho)
            need = float(gamma) / (float(gamma) - 1) if gamma != 1 else math.inf
            form = (
                "(1/(1-phi)^2)[2-phi-gamma+rho^2(1-gamma)^2/gamma] - 1/(1-phi) = 0"
                if a.case.general
                else "1-gamma+rho^2(1-gamma)^2/gamma = 0"
            )
            infeasible = gamma != 1 and witness_infeasible(gamma)
            text = (
                f"coefficient of nu^{j} is {system[j]}; cancelling it needs {form}, "
                f"i.e. rho^2 = gamma/(gamma-1) = {need:.6g}"
                + (" (infeasible for rho in [-1,1])" if infeasible else "")
            )
            return MatchReport(Verdict.UNSOLVABLE, residual, float(w), text, 0, tuple(notes))
        text = f"coefficient of nu^{j} is {system[j]}, which cannot vanish"
        return MatchReport(Verdict.UNSOLVABLE, residual, None, text, 0, tuple(notes))

    notes.append("residual powers survive but none yields an evident contradiction")
    return MatchReport(Verdict.INDETERMINATE, residual, None, "overdetermined system", 0, tuple(notes))


# ---------------------------------------------------------------------------
# Degree-spec files for the CLI
# ---------------------------------------------------------------------------


def parse_degree_file(text: str) -> DegreeSpec:
    """``key = c0, c1, ...`` lines for eta_sq, m1, eta_m2, m2_sq; fractions allowed."""
    vals: dict[str, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"degree spec line {lineno}: expected key = c0, c1, ...")
        key, rhs = (s.strip() for s in line.split("=", 1))
        if key not in ("eta_sq", "m1", "eta_m2", "m2_sq"):
            raise ParameterError(f"degree spec line {lineno}: unknown key {key!r}")
        if key in vals:
            raise ParameterError(f"degree spec line {lineno}: duplicate key {key!r}")
        try:
            vals[key] = tuple(Fraction(c.strip()) for c in rhs.split(","))
        except (ValueError, ZeroDivisionError):
            raise ParameterError(f"degree spec line {lineno}: bad coefficient list {rhs!r}") from None
    missing = {"eta_sq", "m1", "eta_m2", "m2_sq"} - set(vals)
    if missing:
        raise ParameterError(f"degree spec is missing: {', '.join(sorted(missing))}")
    return DegreeSpec(**vals)
