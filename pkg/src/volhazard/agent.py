"""Agent Hamiltonian and closed-form best response.

For constant controls the agent maximizes, pointwise in time,

    g(v) = -k(v) + zX b.theta + 1/2 gammaX |theta|^2 + 1{d0=1} gamma1 theta_1,

with theta = sigma^T v.  The quadratic cost makes this separable in the
coordinates, so each coordinate is either a strictly concave parabola, a flat
line (agent indifferent) or unbounded above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (AgentResponse, ContractControls, MarketModel, Preferences,
                    QuadraticCost, ResponseKind)

EQUALITY_TOL = 1e-10


@dataclass(frozen=True)
class Hamiltonian:
    value: float
    cost_term: float
    drift_term: float
    quadratic_term: float
    cross_term: float


def hamiltonian(v, controls: ContractControls, market: MarketModel,
                cost: QuadraticCost) -> Hamiltonian:
    v = np.asarray(v, dtype=float)
    if v.shape != (market.d,):
        raise ValueError(f"strategy must have length {market.d}, got shape {v.shape}")
    c = controls.for_market(market)
    theta = market.exposure(v)
    cost_term = -cost(v)
    drift_term = c.zX * float(np.dot(market.b, theta))
    quadratic_term = 0.5 * c.gammaX * float(np.dot(theta, theta))
    cross_term = c.gamma1 * float(theta[0]) if market.d0 == 1 else 0.0
    value = cost_term + drift_term + quadratic_term + cross_term
    return Hamiltonian(value, cost_term, drift_term, quadratic_term, cross_term)


def g_value(v, controls: ContractControls, market: MarketModel,
            cost: QuadraticCost) -> float:
    """Agent's instantaneous objective at a candidate strategy ``v``."""
    return hamiltonian(v, controls, market, cost).value


def _numerators(controls: ContractControls, market: MarketModel,
                cost: QuadraticCost) -> np.ndarray:
    num = controls.zX * market.b + cost.effective_alpha * cost.effective_beta
    if market.d0 == 1:
        num = num.copy()
        num[0] += controls.gamma1
    return num


def best_response(controls: ContractControls, market: MarketModel, cost: QuadraticCost,
                  preferences: Preferences | None = None) -> AgentResponse:
    """Classify and solve the agent's problem for constant controls.

    ``preferences`` is accepted for symmetry with the other operations; the
    agent's pointwise problem does not depend on risk aversion.
    """
    c = controls.for_market(market)
    beta = cost.effective_beta
    num = _numerators(c, market, cost)
    gap = beta - c.gammaX

    if np.any(gap < -EQUALITY_TOL):
        return AgentResponse(ResponseKind.UNBOUNDED)
    tied = np.abs(gap) <= EQUALITY_TOL
    if np.any(tied & (np.abs(num) > EQUALITY_TOL)):
        return AgentResponse(ResponseKind.UNBOUNDED)

    theta = np.full(market.d, np.nan)
    theta[~tied] = num[~tied] / gap[~tied]
    free = tuple(int(i) for i in np.flatnonzero(tied))
    if free:
        return AgentResponse(ResponseKind.INDIFFERENT, theta, free)
    return AgentResponse(ResponseKind.UNIQUE, market.strategy_from_exposure(theta))


def G_value(controls: ContractControls, market: MarketModel, cost: QuadraticCost,
            preferences: Preferences | None = None) -> float:
    """Supremum of g over strategies; ``math.inf`` when unbounded."""
    resp = best_response(controls, market, cost, preferences)
    if resp.kind is ResponseKind.UNBOUNDED:
        return math.inf
    if resp.kind is ResponseKind.UNIQUE:
        return g_value(resp.v_star, controls, market, cost)
    # free coordinates contribute a constant; check two different fills agree
    lo = resp.v_star.copy()
    hi = resp.v_star.copy()
    idx = list(resp.free_coords)
    lo[idx] = 0.0
    hi[idx] = 1.0
    g_lo = g_value(market.strategy_from_exposure(lo), controls, market, cost)
    g_hi = g_value(market.strategy_from_exposure(hi), controls, market, cost)
    assert abs(g_lo - g_hi) <= 1e-9 * max(1.0, abs(g_lo)), (g_lo, g_hi)
    return g_lo


def resolve_free(response: AgentResponse, fill) -> np.ndarray:
    """Strategy with free coordinates set from ``fill`` (array or scalar)."""
    theta = response.v_star.copy()
    idx = list(response.free_coords)
    fill = np.broadcast_to(np.asarray(fill, dtype=float), theta.shape)
    theta[idx] = fill[idx]
    return theta
