"""Domain types for the CARA volatility-contracting model.

Everything here is an immutable value object.  Constructors only coerce
inputs to floats/arrays; use :func:`validate` to get a list of violated
invariants instead of exceptions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

SINGULAR_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Preferences:
    """Absolute risk aversions of agent and principal, plus the first-best
    bargaining weight ``rho``."""

    R_A: float
    R_P: float
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "R_A", float(self.R_A))
        object.__setattr__(self, "R_P", float(self.R_P))
        object.__setattr__(self, "rho", float(self.rho))

    def aggregate_risk_aversion(self) -> float:
        """R_A R_P / (R_A + R_P), the harmonic-type aggregate of both."""
        return self.R_A * self.R_P / (self.R_A + self.R_P)


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Output dynamics dX = (sigma^T v) . (b dt + dB).

    ``d0`` is the number of exogenous contractible factors (0 or 1); when it
    is 1 the first Brownian coordinate B^1 may appear in contracts.
    """

    d: int
    b: np.ndarray
    sigma: np.ndarray | None = None
    d0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen_array(self.b))
        if self.sigma is None:
            sigma = np.eye(int(self.d))
        else:
            sigma = np.array(self.sigma, dtype=float, copy=True)
            if sigma.ndim == 1 and sigma.size == int(self.d) ** 2:
                sigma = sigma.reshape(int(self.d), int(self.d))
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_identity", sigma.shape == (self.d, self.d)
                           and bool(np.array_equal(sigma, np.eye(self.d))))

    @property
    def identity_sigma(self) -> bool:
        return self._identity

    def exposure(self, v) -> np.ndarray:
        """theta = sigma^T v, the loading of dX on each Brownian driver."""
        v = np.asarray(v, dtype=float)
        if self.identity_sigma:
            return v
        return self.sigma.T @ v

    def strategy_from_exposure(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.identity_sigma:
            return theta
        return np.linalg.solve(self.sigma.T, theta)


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """k(v) = 1/2 sum_i beta_i (v_i - alpha_i)^2.

    With ``zero_cost=True`` the cost is identically zero and ``alpha`` and
    ``beta`` are ignored (effective beta is the zero vector).
    """

    alpha: np.ndarray
    beta: np.ndarray
    zero_cost: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen_array(self.alpha))
        object.__setattr__(self, "beta", _frozen_array(self.beta))
        object.__setattr__(self, "zero_cost", bool(self.zero_cost))

    @classmethod
    def zero(cls, d: int) -> "QuadraticCost":
        return cls(np.zeros(d), np.zeros(d), zero_cost=True)

    @property
    def effective_alpha(self) -> np.ndarray:
        return np.zeros_like(self.alpha) if self.zero_cost else self.alpha

    @property
    def effective_beta(self) -> np.ndarray:
        return np.zeros_like(self.beta) if self.zero_cost else self.beta

    def __call__(self, v) -> float:
        if self.zero_cost:
            return 0.0
        dv = np.asarray(v, dtype=float) - self.alpha
        return 0.5 * float(np.dot(self.beta, dv * dv))


@dataclass(frozen=True)
class ContractControls:
    """Constant contract sensitivities.

    ``zX``/``gammaX`` load on the output and its quadratic variation,
    ``z1``/``gamma1`` on the contractible factor B^1 and the cross-variation
    d<X, B^1>.  The latter two are forced to zero when ``d0 == 0``.
    """

    cash: float = 0.0
    zX: float = 0.0
    gammaX: float = 0.0
    z1: float = 0.0
    gamma1: float = 0.0

    def __post_init__(self):
        for name in ("cash", "zX", "gammaX", "z1", "gamma1"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def for_market(self, market: MarketModel) -> "ContractControls":
        if market.d0 == 0 and (self.z1 != 0.0 or self.gamma1 != 0.0):
            return replace(self, z1=0.0, gamma1=0.0)
        return self


class ResponseKind(enum.Enum):
    UNIQUE = "Unique"
    INDIFFERENT = "IndifferentCoordinates"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True, eq=False)
class AgentResponse:
    """Agent best response.

    ``v_star`` holds NaN in the free coordinates and is ``None`` when the
    response is unbounded.  Coordinates are 0-based and refer to the exposure
    vector sigma^T v (equal to v for the identity volatility map).
    """

    kind: ResponseKind
    v_star: np.ndarray | None = None
    free_coords: tuple[int, ...] = field(default_factory=tuple)

    @property
    def bounded(self) -> bool:
        return self.kind is not ResponseKind.UNBOUNDED


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def _all_finite(*arrays) -> bool:
    return all(np.all(np.isfinite(np.asarray(a, dtype=float))) for a in arrays)


def validate(preferences: Preferences, market: MarketModel,
             cost: QuadraticCost) -> ValidationReport:
    """Collect every violated model invariant; an empty report means valid."""
    out: list[str] = []
    p = preferences
    if not _all_finite([p.R_A, p.R_P, p.rho]):
        out.append("preferences must be finite")
    else:
        if not p.R_A > 0:
            out.append("R_A must be strictly positive")
        if not p.R_P > 0:
            out.append("R_P must be strictly positive")
        if not p.rho > 0:
            out.append("rho must be strictly positive")

    d = market.d
    if not isinstance(d, (int, np.integer)) or d < 2:
        out.append("d must be an integer >= 2")
        return ValidationReport(out)
    if market.d0 not in (0, 1):
        out.append("d0 must be 0 or 1")
    if market.b.shape != (d,):
        out.append(f"b must have length {d}")
    elif not _all_finite(market.b):
        out.append("b must be finite")

    if market.sigma.shape != (d, d):
        out.append(f"sigma must be a {d}x{d} matrix")
    elif not _all_finite(market.sigma):
        out.append("sigma must be finite")
    elif abs(np.linalg.det(market.sigma)) <= SINGULAR_TOL:
        out.append("sigma singular")

    if not cost.zero_cost:
        if cost.alpha.shape != (d,):
            out.append(f"alpha must have length {d}")
        elif not _all_finite(cost.alpha):
            out.append("alpha must be finite")
        if cost.beta.shape != (d,):
            out.append(f"beta must have length {d}")
        elif not _all_finite(cost.beta):
            out.append("beta must be finite")
        elif not np.all(cost.beta > 0):
            out.append("beta must be strictly positive")
        if market.sigma.shape == (d, d) and not market.identity_sigma:
            out.append("sigma must be the identity unless zero_cost is set")
    return ValidationReport(out)


def integrands_from_controls(controls: ContractControls, preferences: Preferences,
                             G_value: float) -> tuple[float, float, float]:
    """Map (Z, Gamma, G) to the contract integrands (Y^X, Y^1, H)."""
    R_A = preferences.R_A
    c = controls
    yX = 0.5 * (c.gammaX + R_A * c.zX * c.zX)
    y1 = c.gamma1 + R_A * c.zX * c.z1
    h = -G_value + 0.5 * R_A * c.z1 * c.z1
    return yX, y1, h


def controls_from_integrands(yX: float, y1: float, h: float, zX: float, z1: float,
                             preferences: Preferences,
                             cash: float = 0.0) -> tuple[ContractControls, float]:
    """Inverse of :func:`integrands_from_controls`; returns controls and G."""
    R_A = preferences.R_A
    gammaX = 2.0 * yX - R_A * zX * zX
    gamma1 = y1 - R_A * zX * z1
    G = 0.5 * R_A * z1 * z1 - h
    return ContractControls(cash=cash, zX=zX, gammaX=gammaX, z1=z1, gamma1=gamma1), G


def cash_from_reservation(reservation_utility: float, preferences: Preferences) -> float:
    """Cash constant C = -(1/R_A) log(-V0) delivering agent utility V0 < 0."""
    if not reservation_utility < 0:
        raise ValueError("reservation utility must be negative")
    return 0.0 - math.log(-reservation_utility) / preferences.R_A
