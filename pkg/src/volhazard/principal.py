"""Principal's reduced problem, optimizer and first-best attainability.

With CARA utilities and constant controls the principal's certainty
equivalent grows linearly in time at rate

    b.theta - k(v) - 1/2 [R_A zX^2 + R_P (1 - zX)^2] |theta|^2
        + [R_P (1 - zX) - R_A zX] z1 theta_1 - 1/2 (R_A + R_P) z1^2

evaluated at the agent's best response theta = sigma^T v*.  The d0 = 0 case
is the same expression with z1 = gamma1 = 0.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import agent
from ._optim import multistart_minimize
from .firstbest import first_best_volatility
from .model import (ContractControls, MarketModel, Preferences, QuadraticCost,
                    ResponseKind, cash_from_reservation)

NEG_INF = -math.inf
TIE_TOL = 1e-12
Z_BOUND = 100.0
U_BOUND = 30.0
Z_STARTS = (-1.0, 0.0, 0.5, 1.0)
U_STARTS = (-2.0, 0.0, 1.0, 2.0)


class Restriction(enum.Enum):
    FULL = "Full"
    # contracts that do not load on the output's quadratic variation (Y^X = 0)
    GAMMA_ZERO = "GammaZero"


class OptimizationError(RuntimeError):
    pass


@dataclass
class Diagnostics:
    starts: int
    start_values: list[float]
    interior_rate: float
    boundary_rate: float
    gradient_norm: float


@dataclass(eq=False)
class SecondBestSolution:
    controls: ContractControls
    v_star: np.ndarray
    rate: float
    boundary: bool
    diagnostics: Diagnostics
    restriction: Restriction = Restriction.FULL
    qv_sensitivity: float = math.nan   # Y^X = (gammaX + R_A zX^2) / 2


class ExistenceCase(enum.Enum):
    HETEROGENEOUS = "CardGreaterOne_Heterogeneous"
    HOLDS = "Homogeneous_InequalityHolds"
    FAILS = "Homogeneous_InequalityFails"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(eq=False)
class ExistenceReport:
    case: ExistenceCase
    lhs: float = math.nan
    rhs: float = math.nan
    eta: float = math.nan
    index_set: tuple[int, ...] = ()
    offset: float = math.nan   # lhs/rhs minus offset are principal rates
    note: str = ""


# --------------------------------------------------------------------------
# objectives

def resolved_rate(controls: ContractControls, market: MarketModel, cost: QuadraticCost,
                  preferences: Preferences) -> tuple[float, np.ndarray | None]:
    """Principal rate and the agent strategy after tie-breaking.

    Free coordinates of an indifferent agent are set to the principal's
    maximizer of the (separable, concave) rate expression.
    """
    resp = agent.best_response(controls, market, cost, preferences)
    if resp.kind is ResponseKind.UNBOUNDED:
        return NEG_INF, None
    c = controls.for_market(market)
    R_A, R_P = preferences.R_A, preferences.R_P
    q = R_A * c.zX * c.zX + R_P * (1.0 - c.zX) ** 2
    lin = (R_P * (1.0 - c.zX) - R_A * c.zX) * c.z1 if market.d0 == 1 else 0.0

    if resp.kind is ResponseKind.UNIQUE:
        v = resp.v_star
        theta = market.exposure(v)
    else:
        beta = cost.effective_beta
        best = (market.b + beta * cost.effective_alpha) / (beta + q)
        best[0] += lin / (beta[0] + q)
        theta = agent.resolve_free(resp, best)
        v = market.strategy_from_exposure(theta)

    rate = (float(np.dot(market.b, theta)) - cost(v)
            - 0.5 * q * float(np.dot(theta, theta))
            + lin * float(theta[0]) - 0.5 * (R_A + R_P) * c.z1 * c.z1)
    return rate, v


def _interior_rate_fn(market: MarketModel, cost: QuadraticCost, preferences: Preferences):
    """Float-only rate for strictly concave agent problems, None when unusable.

    Gives the same value as ``resolved_rate`` whenever every gap beta_i - gammaX
    exceeds the tie tolerance; returns None otherwise so the caller falls back.
    """
    if not (market.identity_sigma or cost.zero_cost):
        return None
    b = [float(x) for x in market.b]
    beta = [float(x) for x in cost.effective_beta]
    ab = [float(a * x) for a, x in zip(cost.effective_alpha, cost.effective_beta)]
    alpha = [float(x) for x in cost.effective_alpha]
    min_beta = min(beta)
    R_A, R_P = preferences.R_A, preferences.R_P
    contractible = market.d0 == 1
    idx = range(market.d)

    def rate(zX, gammaX, z1=0.0, gamma1=0.0):
        if not min_beta - gammaX > agent.EQUALITY_TOL:
            return None
        if not contractible:
            z1 = gamma1 = 0.0
        theta = [(zX * b[i] + ab[i]) / (beta[i] - gammaX) for i in idx]
        theta[0] += gamma1 / (beta[0] - gammaX)
        q = R_A * zX * zX + R_P * (1.0 - zX) ** 2
        lin = (R_P * (1.0 - zX) - R_A * zX) * z1
        total = 0.0
        for i in idx:
            t = theta[i]
            total += b[i] * t - 0.5 * beta[i] * (t - alpha[i]) ** 2 - 0.5 * q * t * t
        return total + lin * theta[0] - 0.5 * (R_A + R_P) * z1 * z1

    return rate


def objective_noncontractible(zX: float, gammaX: float, market: MarketModel,
                              cost: QuadraticCost, preferences: Preferences) -> float:
    """Principal rate for a contract on X and <X> only; -inf if inadmissible."""
    if market.d0 != 0:
        raise ValueError("objective_noncontractible requires d0 = 0")
    return resolved_rate(ContractControls(zX=zX, gammaX=gammaX), market, cost, preferences)[0]


def objective_contractible(zX: float, z1: float, gammaX: float, gamma1: float,
                           market: MarketModel, cost: QuadraticCost,
                           preferences: Preferences) -> float:
    """Principal rate when B^1 and d<X, B^1> are contractible."""
    if market.d0 != 1:
        raise ValueError("objective_contractible requires d0 = 1")
    controls = ContractControls(zX=zX, gammaX=gammaX, z1=z1, gamma1=gamma1)
    return resolved_rate(controls, market, cost, preferences)[0]


# --------------------------------------------------------------------------
# optimizer

def _interior_problem(market, cost, preferences, restriction):
    """Return (decode, starts, bounds) for the interior search."""
    min_beta = float(cost.effective_beta.min())
    R_A = preferences.R_A
    zb, ub = (-Z_BOUND, Z_BOUND), (-U_BOUND, U_BOUND)

    if restriction is Restriction.FULL:
        if market.d0 == 0:
            def decode(x):
                return ContractControls(zX=x[0], gammaX=min_beta - math.exp(x[1]))
            starts = [(z, u) for z in Z_STARTS for u in U_STARTS]
            bounds = [zb, ub]
        else:
            def decode(x):
                return ContractControls(zX=x[0], z1=x[1], gammaX=min_beta - math.exp(x[2]),
                                        gamma1=x[3])
            starts = [(z, 0.0, u, 0.0) for z in Z_STARTS for u in U_STARTS]
            bounds = [zb, zb, ub, zb]
    else:
        if market.d0 == 0:
            def decode(x):
                return ContractControls(zX=x[0], gammaX=-R_A * x[0] * x[0])
            starts = [(z,) for z in Z_STARTS]
            bounds = [zb]
        else:
            def decode(x):
                return ContractControls(zX=x[0], z1=x[1], gammaX=-R_A * x[0] * x[0],
                                        gamma1=x[2])
            starts = [(z, 0.0, g) for z in Z_STARTS for g in (-1.0, 0.0, 1.0, 2.0)]
            bounds = [zb, zb, zb]
    return decode, starts, bounds


def _boundary_problems(market, cost):
    """Searches on the indifference boundary gammaX = min beta.

    Each yields (decode, starts, bounds); an empty start list means a single
    fixed contract.  zX is pinned wherever a tied non-contractible coordinate
    has b_j != 0; gamma1 is pinned when the contractible coordinate is tied.
    """
    beta = cost.effective_beta
    alpha = cost.effective_alpha
    b = market.b
    min_beta = float(beta.min())
    tied = np.flatnonzero(np.abs(beta - min_beta) <= agent.EQUALITY_TOL)
    contractible = market.d0 == 1
    pins = sorted({-alpha[j] * beta[j] / b[j] for j in tied
                   if b[j] != 0 and not (contractible and j == 0)})
    gamma1_tied = contractible and 0 in tied

    problems = []
    for pin in (pins or [None]):
        free_z = pin is None
        names = (["zX"] if free_z else []) + (["z1"] if contractible else []) \
            + (["gamma1"] if contractible and not gamma1_tied else [])

        def decode(x, pin=pin, names=tuple(names)):
            vals = dict(zip(names, x))
            zX = vals.get("zX", pin)
            gamma1 = 0.0
            if contractible:
                gamma1 = vals["gamma1"] if "gamma1" in vals else -(zX * b[0] + alpha[0] * beta[0])
            return ContractControls(zX=zX, gammaX=min_beta, z1=vals.get("z1", 0.0),
                                    gamma1=gamma1)

        grids = {"zX": Z_STARTS, "z1": (0.0,), "gamma1": (0.0,)}
        starts = list(itertools.product(*(grids[n] for n in names)))
        bounds = [(-Z_BOUND, Z_BOUND)] * len(names)
        problems.append((decode, starts if names else [], bounds))
    return problems


def _grad_norm(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return float(np.linalg.norm(g))


def optimize(market: MarketModel, cost: QuadraticCost, preferences: Preferences,
             restriction: Restriction = Restriction.FULL,
             reservation_utility: float = -1.0) -> SecondBestSolution:
    """Maximize the principal's rate over constant contract controls.

    The interior search uses gammaX = min(beta) - exp(u) so the agent's
    problem stays strictly concave; the indifference boundary is evaluated
    separately and the better of the two is returned.
    """
    restriction = Restriction(restriction)

    def rate_of(controls):
        return resolved_rate(controls, market, cost, preferences)[0]

    decode, starts, bounds = _interior_problem(market, cost, preferences, restriction)
    fast = _interior_rate_fn(market, cost, preferences)

    def interior_rate_of(x):
        c = decode(x)
        if fast is not None:
            val = fast(c.zX, c.gammaX, c.z1, c.gamma1)
            if val is not None:
                return val
        return rate_of(c)

    interior = multistart_minimize(lambda x: -interior_rate_of(x), starts, bounds)
    interior_rate = -interior.fun
    best_controls, best_rate, on_boundary = decode(interior.x), interior_rate, False
    start_values = [-v for v in interior.start_values]
    grad = (_grad_norm(interior_rate_of, interior.x)
            if math.isfinite(interior_rate) else math.nan)

    boundary_rate = NEG_INF
    if restriction is Restriction.FULL:
        for bdecode, bstarts, bbounds in _boundary_problems(market, cost):
            if bstarts:
                res = multistart_minimize(lambda x: -rate_of(bdecode(x)), bstarts, bbounds)
                cand, val = bdecode(res.x), -res.fun
                start_values.extend(-v for v in res.start_values)
            else:
                cand = bdecode(())
                val = rate_of(cand)
                start_values.append(val)
            if val > boundary_rate:
                boundary_rate = val
                if val > best_rate + TIE_TOL:
                    best_controls, best_rate, on_boundary = cand, val, True

    if not math.isfinite(best_rate):
        raise OptimizationError("no admissible contract found from any start")

    rate, v_star = resolved_rate(best_controls, market, cost, preferences)
    cash = cash_from_reservation(reservation_utility, preferences)
    controls = ContractControls(cash=cash, zX=best_controls.zX, gammaX=best_controls.gammaX,
                                z1=best_controls.z1, gamma1=best_controls.gamma1)
    diag = Diagnostics(starts=len(start_values), start_values=start_values,
                       interior_rate=interior_rate, boundary_rate=boundary_rate,
                       gradient_norm=math.nan if on_boundary else grad)
    qv = 0.5 * (controls.gammaX + preferences.R_A * controls.zX ** 2)
    return SecondBestSolution(controls, v_star, rate, on_boundary, diag, restriction, qv)


# --------------------------------------------------------------------------
# attainability constructions

def attain_first_best_contractible(market: MarketModel, cost: QuadraticCost,
                                   preferences: Preferences) -> ContractControls:
    """Contract that pins v_1 at its first-best value and leaves v_2 free.

    gammaX = beta_2 and zX = -alpha_2 beta_2 / b_2 make the agent indifferent
    in the second coordinate; gamma1 then moves the first coordinate's
    optimum onto the first-best volatility.
    """
    if market.d != 2 or market.d0 != 1:
        raise ValueError("construction requires d = 2 and d0 = 1")
    b = market.b
    alpha, beta = cost.effective_alpha, cost.effective_beta
    if b[1] == 0:
        raise ValueError("construction requires b_2 != 0")
    if beta[1] > beta[0]:
        raise ValueError("construction requires beta_2 <= beta_1")
    v1_fb = first_best_volatility(market, cost, preferences).v_fb[0]
    zX = -alpha[1] * beta[1] / b[1]
    gamma1 = -alpha[0] * beta[0] - zX * b[0] + (beta[0] - beta[1]) * v1_fb
    return ContractControls(zX=zX, gammaX=beta[1], z1=0.0, gamma1=gamma1)


def zero_cost_response(z: float, gamma_diag: float, gamma_cross: float,
                       market: MarketModel) -> np.ndarray:
    """Agent optimum without effort cost, solved from the first-order condition
    z sigma b + gamma_cross sigma_{.1} + gamma_diag sigma sigma^T v = 0."""
    if not gamma_diag < 0:
        raise ValueError("zero-cost response needs a negative quadratic-variation loading")
    sigma = market.sigma
    rhs = z * (sigma @ market.b) + gamma_cross * sigma[:, 0]
    return -np.linalg.solve(sigma @ sigma.T, rhs) / gamma_diag


def attain_first_best_zero_cost(market: MarketModel,
                                preferences: Preferences) -> ContractControls:
    """First-best contract when effort is free: zX = R_P/(R_A+R_P), no cross term."""
    R_A, R_P = preferences.R_A, preferences.R_P
    zX = R_P / (R_A + R_P)
    gammaX = -R_A * R_P ** 2 / (R_A + R_P) ** 2
    v = zero_cost_response(zX, gammaX, 0.0, market)
    target = market.strategy_from_exposure(market.b / preferences.aggregate_risk_aversion())
    if not np.allclose(v, target, rtol=1e-9, atol=1e-12):
        raise AssertionError(f"implemented volatility {v} differs from first best {target}")
    return ContractControls(zX=zX, gammaX=gammaX, z1=0.0, gamma1=0.0)


# --------------------------------------------------------------------------
# existence conditions (non-contractible case)

def tied_index_set(cost: QuadraticCost) -> tuple[int, ...]:
    beta = cost.effective_beta
    return tuple(int(i) for i in np.flatnonzero(np.abs(beta - beta.min()) <= agent.EQUALITY_TOL))


def check_existence(market: MarketModel, cost: QuadraticCost,
                    preferences: Preferences) -> ExistenceReport:
    """Classify the sufficient conditions for an interior optimal contract.

    ``lhs`` is the supremum of the principal's objective on the indifference
    boundary and ``rhs`` its value at (Z, Gamma) = (1, -R_A), both on the
    scale that omits the constant -1/2 sum beta_i alpha_i^2 (stored in
    ``offset``).  The growth-based condition for super-quadratic costs does
    not apply to quadratic k and is only recorded in ``note``.
    """
    if market.d0 != 0:
        raise ValueError("check_existence applies to the non-contractible case (d0 = 0)")
    note = "growth condition for super-quadratic cost: NotApplicable (quadratic k)"
    b = market.b
    alpha, beta = cost.effective_alpha, cost.effective_beta
    R_A, R_P = preferences.R_A, preferences.R_P
    index = tied_index_set(cost)
    offset = 0.5 * float(np.dot(beta, alpha * alpha))
    if any(b[j] == 0 for j in index):
        return ExistenceReport(ExistenceCase.NOT_APPLICABLE, index_set=index, offset=offset,
                               note=note + "; b_j = 0 for some j with minimal beta")

    ratios = np.array([alpha[j] * beta[j] / b[j] for j in index])
    if len(index) > 1 and not np.allclose(ratios, ratios[0], rtol=1e-12, atol=1e-12):
        return ExistenceReport(ExistenceCase.HETEROGENEOUS, index_set=index, offset=offset,
                               note=note)

    eta = float(ratios[0])
    rhs = float(np.sum((b + alpha * beta) ** 2 / (2.0 * (beta + R_A))))
    lhs = boundary_supremum(eta, index, market, cost, preferences)
    case = ExistenceCase.HOLDS if lhs <= rhs else ExistenceCase.FAILS
    return ExistenceReport(case, lhs, rhs, eta, index, offset, note)


def boundary_supremum(eta: float, index, market: MarketModel, cost: QuadraticCost,
                      preferences: Preferences) -> float:
    """Best objective value at gammaX = min beta, zX = -eta (without offset).

    Tied coordinates are free for the agent and chosen independently by the
    principal; the others sit at (alpha_i beta_i - eta b_i)/(beta_i - min beta).
    """
    b = market.b
    alpha, beta = cost.effective_alpha, cost.effective_beta
    q = preferences.R_A * eta ** 2 + preferences.R_P * (1.0 + eta) ** 2
    min_beta = beta.min()
    total = 0.0
    for i in range(market.d):
        lead = b[i] + alpha[i] * beta[i]
        if i in index:
            total += lead ** 2 / (2.0 * (beta[i] + q))
        else:
            w = (alpha[i] * beta[i] - eta * b[i]) / (beta[i] - min_beta)
            total += lead * w - 0.5 * w * w * (q + beta[i])
    return float(total)
