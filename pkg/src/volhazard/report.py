"""Sweeps of first- and second-best outcomes over the initial exposure alpha_2."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .firstbest import first_best_volatility
from .model import MarketModel, Preferences, QuadraticCost
from .principal import OptimizationError, Restriction, optimize

LOSS_DENOM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BaseParams:
    preferences: Preferences
    market: MarketModel
    cost: QuadraticCost


def figure_defaults() -> BaseParams:
    """Baseline for the alpha_2 figures: d=2, d0=0, R_A=R_P=1, b=(1,1), beta=(1/4,1/4), alpha_1=1.

    The low effort cost keeps the first-best surplus positive over the whole
    range [-2, 6] so percentage losses are well defined.
    """
    return BaseParams(Preferences(1.0, 1.0), MarketModel(2, [1.0, 1.0]),
                      QuadraticCost([1.0, 1.0], [0.25, 0.25]))


@dataclass(frozen=True, eq=False)
class SweepSpec:
    base: BaseParams
    lo: float = -2.0
    hi: float = 6.0
    n_points: int = 81
    parameter: str = "alpha2"

    def __post_init__(self):
        if self.parameter != "alpha2":
            raise ValueError(f"unsupported sweep parameter {self.parameter!r}")
        if not self.lo < self.hi:
            raise ValueError("sweep needs lo < hi")
        if self.n_points < 2:
            raise ValueError("sweep needs at least 2 points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)


@dataclass(frozen=True)
class FigureRow:
    alpha2: float
    fb_rate: float
    sb_rate: float
    sb_rate_gamma0: float
    pct_loss_fb: float
    pct_loss_gamma0: float
    qv_sensitivity: float
    z_star: float
    gamma_star: float
    flag: str = ""


COLUMNS = tuple(f.name for f in fields(FigureRow))


def pct_loss(fb: float, sb: float) -> tuple[float, bool]:
    """100 (fb - sb)/|fb|; falls back to the absolute gap when |fb| is tiny."""
    if abs(fb) < LOSS_DENOM_TOL:
        return fb - sb, True
    return 100.0 * (fb - sb) / abs(fb), False


def sweep_point(base: BaseParams, alpha2: float) -> FigureRow:
    alpha = np.array(base.cost.alpha, dtype=float)
    alpha[1] = alpha2
    cost = QuadraticCost(alpha, base.cost.beta, base.cost.zero_cost)
    market, prefs = base.market, base.preferences
    fb = first_best_volatility(market, cost, prefs).f_rate
    try:
        full = optimize(market, cost, prefs, Restriction.FULL)
        gz = optimize(market, cost, prefs, Restriction.GAMMA_ZERO)
    except OptimizationError as exc:
        nan = math.nan
        return FigureRow(float(alpha2), fb, nan, nan, nan, nan, nan, nan, nan,
                         f"optimizer_failed: {exc}")
    loss, small = pct_loss(fb, full.rate)
    loss0, small0 = pct_loss(fb, gz.rate)
    flag = "absolute_loss" if (small or small0) else ""
    return FigureRow(float(alpha2), fb, full.rate, gz.rate, loss, loss0,
                     full.qv_sensitivity, full.controls.zX, full.controls.gammaX, flag)


def sweep(spec: SweepSpec) -> list[FigureRow]:
    """One row per grid point, in grid order; failures are flagged, not raised."""
    return [sweep_point(spec.base, a) for a in spec.grid()]


def _fmt(value) -> str:
    return value if isinstance(value, str) else f"{value:.17g}"


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in asdict(row).values()])


def read_rows(path) -> list[FigureRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        return [FigureRow(**{k: (r[k] if k == "flag" else float(r[k])) for k in COLUMNS})
                for r in reader]


def qv_sign_changes(rows) -> list[tuple[float, float]]:
    """Adjacent (alpha2, alpha2') pairs where the QV sensitivity changes sign."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if np.sign(a.qv_sensitivity) != np.sign(b.qv_sensitivity):
            out.append((a.alpha2, b.alpha2))
    return out
