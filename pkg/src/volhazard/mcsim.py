"""Monte Carlo simulation of the controlled output and the contract payoff.

Each path draws its Brownian increments from its own Philox stream keyed by
``(seed, path index)``; the Philox counter then runs over the time steps.  A
path therefore looks the same whatever chunking or worker layout is used, and
two strategies simulated with the same seed see identical shocks (common
random numbers).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import agent
from .model import (ContractControls, MarketModel, Preferences, QuadraticCost,
                    ResponseKind, integrands_from_controls)
from .principal import resolved_rate

CHUNK_ELEMENTS = 1 << 22
CSV_COLUMNS = ("path_id", "x_T", "qv", "xi_T", "k_T", "b1_T")


class InadmissibleContract(ValueError):
    """The agent's problem is unbounded under the given controls."""


@dataclass(frozen=True)
class SimulationConfig:
    T: float = 1.0
    n_steps: int = 200
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be positive")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be at least 1")
        if self.T / self.n_steps > 0.1:
            warnings.warn(f"coarse time step T/n_steps = {self.T / self.n_steps:g} > 0.1",
                          stacklevel=2)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps


@dataclass(frozen=True)
class PathResult:
    x_T: float
    qv: float
    xi_T: float
    k_T: float
    b1_T: float | None = None


@dataclass(eq=False)
class PathEnsemble:
    """Column-oriented store of simulated paths.  ``b1_T`` is None when d0=0."""

    x_T: np.ndarray
    qv: np.ndarray
    xi_T: np.ndarray
    k_T: np.ndarray
    b1_T: np.ndarray | None = None
    antithetic: bool = False

    def __len__(self):
        return self.x_T.size

    def __getitem__(self, i) -> PathResult:
        b1 = None if self.b1_T is None else float(self.b1_T[i])
        return PathResult(float(self.x_T[i]), float(self.qv[i]), float(self.xi_T[i]),
                          float(self.k_T[i]), b1)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for i in range(len(self)):
                b1 = "" if self.b1_T is None else f"{self.b1_T[i]:.17g}"
                w.writerow([i, f"{self.x_T[i]:.17g}", f"{self.qv[i]:.17g}",
                            f"{self.xi_T[i]:.17g}", f"{self.k_T[i]:.17g}", b1])

    @classmethod
    def from_csv(cls, path) -> "PathEnsemble":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = {k: np.array([float(r[k]) for r in rows]) for k in CSV_COLUMNS[1:5]}
        has_b1 = bool(rows) and rows[0]["b1_T"] != ""
        b1 = np.array([float(r["b1_T"]) for r in rows]) if has_b1 else None
        return cls(col["x_T"], col["qv"], col["xi_T"], col["k_T"], b1)


def path_increments(seed: int, path_ids, n_steps: int, d: int, dt: float) -> np.ndarray:
    """Brownian increments of shape (len(path_ids), n_steps, d)."""
    key0 = int(seed) % (1 << 64)
    out = np.empty((len(path_ids), n_steps, d))
    scale = math.sqrt(dt)
    for row, pid in enumerate(path_ids):
        gen = np.random.Generator(np.random.Philox(key=[key0, int(pid)]))
        out[row] = gen.standard_normal((n_steps, d)) * scale
    return out


def _admissible_G(controls, market, cost, preferences) -> float:
    G = agent.G_value(controls, market, cost, preferences)
    if not math.isfinite(G):
        raise InadmissibleContract("agent response is unbounded; contract not admissible")
    return G


def simulate(config: SimulationConfig, market: MarketModel, strategy,
             controls: ContractControls, cost: QuadraticCost,
             preferences: Preferences, antithetic: bool = False,
             qv_estimator: str = "analytic") -> PathEnsemble:
    """Euler-Maruyama paths of X and of the contract payoff under a constant strategy.

    With ``antithetic=True`` paths 2m and 2m+1 share stream m with opposite
    signs.  ``qv_estimator="realized"`` replaces the analytic quadratic and
    cross variations by sums of squared/cross increments.
    """
    v = np.asarray(strategy, dtype=float)
    if v.shape != (market.d,):
        raise ValueError(f"strategy must have length {market.d}")
    if qv_estimator not in ("analytic", "realized"):
        raise ValueError("qv_estimator must be 'analytic' or 'realized'")
    if antithetic and config.n_paths % 2:
        raise ValueError("antithetic sampling needs an even number of paths")
    c = controls.for_market(market)
    G = _admissible_G(c, market, cost, preferences)
    yX, y1, h = integrands_from_controls(c, preferences, G)

    theta = market.exposure(v)
    dt, n, d = config.dt, config.n_steps, market.d
    drift = float(np.dot(theta, market.b)) * dt
    qv_step = float(np.dot(theta, theta)) * dt
    cross_step = float(theta[0]) * dt
    k_T = np.full(config.n_paths, cost(v) * n * dt)
    contractible = market.d0 == 1

    x_T = np.empty(config.n_paths)
    qv = np.empty(config.n_paths)
    xi_T = np.empty(config.n_paths)
    b1_T = np.empty(config.n_paths) if contractible else None

    chunk = max(2, CHUNK_ELEMENTS // (n * d)) & ~1
    for start in range(0, config.n_paths, chunk):
        ids = np.arange(start, min(start + chunk, config.n_paths))
        if antithetic:
            streams = np.unique(ids // 2)
            base = path_increments(config.seed, streams, n, d, dt)
            dB = base[ids // 2 - streams[0]]
            dB[ids % 2 == 1] *= -1.0
        else:
            dB = path_increments(config.seed, ids, n, d, dt)
        dX = drift + dB @ theta
        if qv_estimator == "analytic":
            d_qv = np.full_like(dX, qv_step)
            d_cross = np.full_like(dX, cross_step)
        else:
            d_qv = dX * dX
            d_cross = dX * dB[:, :, 0]
        d_xi = c.zX * dX + yX * d_qv + h * dt
        if contractible:
            d_xi += c.z1 * dB[:, :, 0] + y1 * d_cross
            b1_T[ids] = dB[:, :, 0].sum(axis=1)
        x_T[ids] = dX.sum(axis=1)
        qv[ids] = d_qv.sum(axis=1)
        xi_T[ids] = c.cash + d_xi.sum(axis=1)
    return PathEnsemble(x_T, qv, xi_T, k_T, b1_T, antithetic)


# --------------------------------------------------------------------------
# estimators

def _mean_stderr(samples: np.ndarray, antithetic: bool = False) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float)
    if antithetic:
        x = 0.5 * (x[0::2] + x[1::2])
    if x.size == 0:
        raise ValueError("empty ensemble")
    if np.all(x == x[0]):
        return float(x[0]), 0.0
    n = x.size
    mean = math.fsum(x) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def agent_utility_samples(ensemble: PathEnsemble, preferences: Preferences) -> np.ndarray:
    return -np.exp(-preferences.R_A * (ensemble.xi_T - ensemble.k_T))


def principal_utility_samples(ensemble: PathEnsemble, preferences: Preferences) -> np.ndarray:
    return -np.exp(-preferences.R_P * (ensemble.x_T - ensemble.xi_T))


def agent_utility(ensemble: PathEnsemble, preferences: Preferences,
                  cost: QuadraticCost | None = None) -> tuple[float, float]:
    """Mean and standard error of -exp(-R_A (xi_T - K_T)).

    ``cost`` is not needed (K_T is stored per path) and kept for call symmetry.
    """
    return _mean_stderr(agent_utility_samples(ensemble, preferences), ensemble.antithetic)


def principal_utility(ensemble: PathEnsemble, preferences: Preferences) -> tuple[float, float]:
    """Mean and standard error of -exp(-R_P (X_T - xi_T))."""
    return _mean_stderr(principal_utility_samples(ensemble, preferences), ensemble.antithetic)


def certainty_equivalent(mean: float, stderr: float, R: float) -> tuple[float, float]:
    """CE = -(1/R) log(-mean), with a delta-method standard error."""
    if not mean < 0:
        raise ValueError("CARA expected utility must be negative")
    return -math.log(-mean) / R, stderr / (R * abs(mean))


# --------------------------------------------------------------------------
# incentive compatibility

@dataclass(frozen=True, eq=False)
class ICRow:
    strategy: np.ndarray
    mean: float
    stderr: float
    diff: float          # mean utility minus that of v*, same shocks
    diff_stderr: float

    def dominated(self, n_sigma: float = 3.0) -> bool:
        """True if v* is at least as good up to ``n_sigma`` paired std errors."""
        return self.diff <= n_sigma * self.diff_stderr

    def strictly_worse(self, n_sigma: float = 3.0) -> bool:
        return self.diff < -n_sigma * self.diff_stderr


def optimal_strategy(controls, market, cost, preferences) -> np.ndarray:
    """Agent's best response, free coordinates resolved in the principal's favor."""
    resp = agent.best_response(controls, market, cost, preferences)
    if resp.kind is ResponseKind.UNBOUNDED:
        raise InadmissibleContract("agent response is unbounded; contract not admissible")
    if resp.kind is ResponseKind.UNIQUE:
        return resp.v_star
    return resolved_rate(controls, market, cost, preferences)[1]


def star_deviations(v_star, radius: float = 0.5, n: int = 8) -> list[np.ndarray]:
    """``n`` points on a circle of the given radius in the first two coordinates."""
    v_star = np.asarray(v_star, dtype=float)
    out = []
    for k in range(n):
        step = np.zeros_like(v_star)
        step[0] = radius * math.cos(2 * math.pi * k / n)
        step[1] = radius * math.sin(2 * math.pi * k / n)
        out.append(v_star + step)
    return out


def ic_probe(config: SimulationConfig, market: MarketModel, controls: ContractControls,
             cost: QuadraticCost, preferences: Preferences, deviations,
             v_star=None) -> list[ICRow]:
    """Agent utility at v* and at each deviating constant strategy.

    All strategies are simulated on the same shocks, so the reported
    differences have much smaller error than the utilities themselves.  The
    first row is v*; deviations equal to v* are dropped.
    """
    _admissible_G(controls.for_market(market), market, cost, preferences)
    if v_star is None:
        v_star = optimal_strategy(controls, market, cost, preferences)
    v_star = np.asarray(v_star, dtype=float)

    base = agent_utility_samples(
        simulate(config, market, v_star, controls, cost, preferences), preferences)
    mean, se = _mean_stderr(base)
    rows = [ICRow(v_star, mean, se, 0.0, 0.0)]
    for dev in deviations:
        dev = np.asarray(dev, dtype=float)
        if np.array_equal(dev, v_star):
            continue
        u = agent_utility_samples(
            simulate(config, market, dev, controls, cost, preferences), preferences)
        m, s = _mean_stderr(u)
        dm, ds = _mean_stderr(u - base)
        rows.append(ICRow(dev, m, s, dm, ds))
    return rows
