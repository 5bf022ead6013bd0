"""Monte Carlo simulation of the variance and of wealth under the solved strategy.

Variance: full-truncation Euler for the CIR process.  Wealth: Euler in log
space, so every path stays strictly positive.

The noise stream is a Philox counter-based generator; normals are produced by
inverse-CDF from 53-bit uniforms so that antithetic pairs are exact
negatives.  Only every ``save_every``-th node is stored, which keeps 1e5
paths over thousands of steps in memory; :func:`simulate_wealth` regenerates
the same noise from the seed and re-runs the variance recursion alongside.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import GridMismatch, ParameterError
from .finite_solver import CoefficientPath
from .infinite_solver import AffineSolution, consumption_ratio, portfolio_weight
from .model import MarketParams, PreferenceParams

GENERATOR = "numpy.random.Philox"
SCHEME = "full-truncation Euler (variance), log-Euler (wealth)"
NOT_AVAILABLE = "n/a"


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    dt: float = 0.005
    T_sim: float = 10.0
    seed: int = 0
    antithetic: bool = False
    save_every: int | None = None  # default: at most 200 stored intervals

    def __post_init__(self):
        if not (isinstance(self.n_paths, int) and self.n_paths >= 1):
            raise ParameterError("n_paths must be an integer >= 1")
        if not (self.dt > 0 and self.T_sim > 0):
            raise ParameterError("dt and T_sim must be > 0")
        n = round(self.T_sim / self.dt)
        if n < 1 or abs(n * self.dt - self.T_sim) > 1e-9 * self.T_sim:
            raise ParameterError(f"T_sim / dt = {self.T_sim / self.dt!r} is not an integer")
        if self.antithetic and self.n_paths % 2:
            raise ParameterError("antithetic sampling needs an even number of paths")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in 64 bits")
        if self.save_every is not None and self.save_every < 1:
            raise ParameterError("save_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return round(self.T_sim / self.dt)

    @property
    def stride(self) -> int:
        if self.save_every is not None:
            return self.save_every
        return max(1, math.ceil(self.n_steps / 200))

    @property
    def save_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


@dataclass(frozen=True)
class PathEnsemble:
    """Stored series have shape (len(t), n_paths)."""

    t: np.ndarray
    nu: np.ndarray
    cfg: SimConfig
    log_wealth: np.ndarray | None = None
    c_over_x: np.ndarray | None = None
    generator: str = GENERATOR
    scheme: str = SCHEME

    @property
    def wealth(self) -> np.ndarray:
        if self.log_wealth is None:
            raise ParameterError("ensemble carries no wealth")
        return np.exp(self.log_wealth)

    def to_csv(self, path: str | Path | None = None, max_paths: int | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "t", "nu", "X", "c_over_x"])
        X = self.wealth
        n = self.nu.shape[1] if max_paths is None else min(max_paths, self.nu.shape[1])
        for j in range(n):
            for i, t in enumerate(self.t):
                w.writerow([j, repr(float(t)), repr(float(self.nu[i, j])), repr(float(X[i, j])),
                            repr(float(self.c_over_x[i, j]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _normal_stream(cfg: SimConfig):
    """Yield one (n_paths, 2) block of standard normals per time step."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n_base = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    for _ in range(cfg.n_steps):
        bits = rng.integers(0, 2**64, size=(n_base, 2), dtype=np.uint64, endpoint=False)
        u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        z = ndtri(u)
        yield np.concatenate([z, -z]) if cfg.antithetic else z


def _cir_step(nu, z, m: MarketParams, dt: float):
    nup = np.maximum(nu, 0.0)
    return nu + m.kappa * (m.theta - nup) * dt + m.sigma * np.sqrt(nup * dt) * z


def simulate_heston(m: MarketParams, cfg: SimConfig) -> PathEnsemble:
    steps = cfg.save_steps
    out = np.empty((steps.size, cfg.n_paths))
    nu = np.full(cfg.n_paths, m.nu0)
    out[0] = nu
    j = 1
    for k, z in enumerate(_normal_stream(cfg), start=1):
        nu = _cir_step(nu, z[:, 0], m, cfg.dt)
        if j < steps.size and k == steps[j]:
            out[j] = np.maximum(nu, 0.0)
            j += 1
    return PathEnsemble(t=steps * cfg.dt, nu=out, cfg=cfg)


def _strategy_coeffs(solution, m, p, T_sim):
    """Return ``coeffs(t) -> (A0, A1)`` for the solution, checking the time grid."""
    if isinstance(solution, CoefficientPath):
        T = solution.grid.T
        if T_sim > T * (1 + 1e-12):
            raise GridMismatch(f"simulation horizon {T_sim} exceeds the solved horizon {T}")
        return lambda t: tuple(float(v) for v in solution.at(max(T - t, 0.0)))
    if isinstance(solution, AffineSolution):
        return lambda t: (solution.A0, solution.A1)
    raise ParameterError("solution must be an AffineSolution or a CoefficientPath")


def simulate_wealth(
    m: MarketParams, p: PreferenceParams, solution, ensemble: PathEnsemble
) -> PathEnsemble:
    """Attach log-wealth and consumption-ratio series to a variance ensemble."""
    cfg = ensemble.cfg
    if ensemble.nu.shape != (cfg.save_steps.size, cfg.n_paths):
        raise GridMismatch("ensemble arrays do not match its configuration")
    case = solution.case
    coeffs = _strategy_coeffs(solution, m, p, cfg.T_sim)
    steps = cfg.save_steps
    dt, sq = cfg.dt, math.sqrt(1.0 - m.rho**2)

    logx = np.full(cfg.n_paths, math.log(m.x0))
    nu = np.full(cfg.n_paths, m.nu0)
    LX = np.empty_like(ensemble.nu)
    CW = np.empty_like(ensemble.nu)

    def cw_at(t, v):
        A0, A1 = coeffs(t)
        return np.asarray(consumption_ratio(case, A0, A1, v, p), dtype=float) * np.ones_like(v)

    LX[0] = logx
    CW[0] = cw_at(0.0, nu)
    j = 1
    for k, z in enumerate(_normal_stream(cfg)):
        t = k * dt
        A0, A1 = coeffs(t)
        pi = float(portfolio_weight(case, A1, m, p))
        nup = np.maximum(nu, 0.0)
        cw = consumption_ratio(case, A0, A1, nup, p)
        drift = m.r + m.xi * nup * pi - cw - 0.5 * pi * pi * nup
        logx = logx + drift * dt + pi * np.sqrt(nup * dt) * (m.rho * z[:, 0] + sq * z[:, 1])
        nu = _cir_step(nu, z[:, 0], m, dt)
        if j < steps.size and k + 1 == steps[j]:
            nup = np.maximum(nu, 0.0)
            if not np.array_equal(nup, ensemble.nu[j]):
                raise GridMismatch("regenerated variance differs from the ensemble (seed or config changed)")
            LX[j] = logx
            CW[j] = cw_at((k + 1) * dt, nup)
            j += 1
    return PathEnsemble(t=ensemble.t, nu=ensemble.nu, cfg=cfg, log_wealth=LX, c_over_x=CW)


@dataclass(frozen=True)
class SimSummary:
    n_paths: int
    t: list
    nu_mean: list
    nu_se: list
    cir_mean: list
    terminal_wealth_mean: float | None
    terminal_wealth_std: float | str | None
    terminal_log_wealth_mean: float | None
    terminal_log_wealth_se: float | str | None
    c_over_x_min: float | None
    c_over_x_max: float | None
    wealth_positive: bool | None
    generator: str
    seed: int
    antithetic: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def cir_mean(m: MarketParams, t):
    return m.theta + (m.nu0 - m.theta) * np.exp(-m.kappa * np.asarray(t, dtype=float))


def _mean_se(x: np.ndarray, antithetic: bool):
    """Mean and standard error along the path axis; antithetic pairs are averaged first."""
    n = x.shape[-1]
    mean = x.mean(axis=-1)
    if antithetic:
        h = n // 2
        pairs = 0.5 * (x[..., :h] + x[..., h:])
        se = pairs.std(axis=-1, ddof=1) / math.sqrt(h) if h > 1 else None
    else:
        se = x.std(axis=-1, ddof=1) / math.sqrt(n) if n > 1 else None
    return mean, se


def summarize(ens: PathEnsemble, m: MarketParams) -> SimSummary:
    n = ens.cfg.n_paths
    anti = ens.cfg.antithetic
    nu_mean, nu_se = _mean_se(ens.nu, anti)
    fields = dict(
        terminal_wealth_mean=None,
        terminal_wealth_std=None,
        terminal_log_wealth_mean=None,
        terminal_log_wealth_se=None,
        c_over_x_min=None,
        c_over_x_max=None,
        wealth_positive=None,
    )
    if ens.log_wealth is not None:
        XT = np.exp(ens.log_wealth[-1])
        lmean, lse = _mean_se(ens.log_wealth[-1], anti)
        fields.update(
            terminal_wealth_mean=float(XT.mean()),
            terminal_wealth_std=float(XT.std(ddof=1)) if n > 1 else NOT_AVAILABLE,
            terminal_log_wealth_mean=float(lmean),
            terminal_log_wealth_se=float(lse) if lse is not None else NOT_AVAILABLE,
            c_over_x_min=float(ens.c_over_x.min()),
            c_over_x_max=float(ens.c_over_x.max()),
            wealth_positive=bool(np.all(np.exp(ens.log_wealth) > 0)),
        )
    return SimSummary(
        n_paths=n,
        t=[float(v) for v in ens.t],
        nu_mean=[float(v) for v in nu_mean],
        nu_se=[float(v) for v in nu_se] if nu_se is not None else [NOT_AVAILABLE] * ens.t.size,
        cir_mean=[float(v) for v in cir_mean(m, ens.t)],
        generator=ens.generator,
        seed=ens.cfg.seed,
        antithetic=anti,
        **fields,
    )
