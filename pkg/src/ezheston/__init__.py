"""Optimal consumption and investment under Heston stochastic volatility with
Epstein-Zin recursive preferences.

Exponential-affine solvers for the infinite and finite horizons (unit and
general EIS), a mechanical checker for the exponential-polynomial ansatz,
verification oracles, Monte Carlo simulation and strategy sweeps.
"""

from __future__ import annotations

from .errors import (
    DomainError,
    EzHestonError,
    ParameterError,
    SolverError,
    VerificationFailed,
)
from .finite_solver import CoefficientPath, TimeGrid, solve_finite, strategy_finite
from .infinite_solver import (
    AffineSolution,
    FixedPointOptions,
    LogLinearization,
    Strategy,
    solve_infinite,
    strategy_infinite,
)
from .model import (
    CaseTag,
    MarketParams,
    PreferenceParams,
    adapt_to_case,
    classify_case,
    load_config,
    reference_params,
)

__all__ = [
    "AffineSolution",
    "CaseTag",
    "CoefficientPath",
    "DomainError",
    "EzHestonError",
    "FixedPointOptions",
    "LogLinearization",
    "MarketParams",
    "ParameterError",
    "PreferenceParams",
    "SolverError",
    "Strategy",
    "TimeGrid",
    "VerificationFailed",
    "adapt_to_case",
    "classify_case",
    "load_config",
    "reference_params",
    "solve",
    "strategy",
]


def solve(m: MarketParams, p: PreferenceParams, grid: TimeGrid | None = None, opts: FixedPointOptions | None = None):
    """Solve the case selected by ``classify_case``.

    Returns ``(solution, linearization)``; the linearization is ``None``
    except for the infinite-horizon general-EIS case.
    """
    if classify_case(m, p).finite:
        return solve_finite(m, p, grid), None
    return solve_infinite(m, p, opts)


def strategy(solution, m: MarketParams, p: PreferenceParams, nu: float, t: float = 0.0) -> Strategy:
    if isinstance(solution, CoefficientPath):
        return strategy_finite(solution, t, m, p, nu)
    return strategy_infinite(solution, m, p, nu)
