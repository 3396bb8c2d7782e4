"""First-best benchmark: the principal picks the volatility herself."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import MarketModel, Preferences, QuadraticCost


@dataclass(frozen=True, eq=False)
class FirstBestSolution:
    v_fb: np.ndarray
    f_rate: float
    contract_slope: float   # coefficient on X_T
    cost_share: float       # coefficient on K_T
    cash_constant: float    # log(rho R_A / R_P) / (R_A + R_P)


def f_rate(v, market: MarketModel, cost: QuadraticCost, preferences: Preferences) -> float:
    """Per-unit-time certainty-equivalent surplus b.theta - k(v) - Rbar/2 |theta|^2."""
    v = np.asarray(v, dtype=float)
    theta = market.exposure(v)
    rbar = preferences.aggregate_risk_aversion()
    return float(np.dot(market.b, theta)) - cost(v) - 0.5 * rbar * float(np.dot(theta, theta))


def first_best_volatility(market: MarketModel, cost: QuadraticCost,
                          preferences: Preferences) -> FirstBestSolution:
    rbar = preferences.aggregate_risk_aversion()
    beta = cost.effective_beta
    theta = (market.b + beta * cost.effective_alpha) / (beta + rbar)
    v_fb = market.strategy_from_exposure(theta)
    R_A, R_P = preferences.R_A, preferences.R_P
    return FirstBestSolution(
        v_fb=v_fb,
        f_rate=f_rate(v_fb, market, cost, preferences),
        contract_slope=R_P / (R_A + R_P),
        cost_share=R_A / (R_A + R_P),
        cash_constant=math.log(preferences.rho * R_A / R_P) / (R_A + R_P),
    )


def first_best_certainty_equivalent_rate(market: MarketModel, cost: QuadraticCost,
                                         preferences: Preferences) -> float:
    return first_best_volatility(market, cost, preferences).f_rate
