"""Deterministic multi-start derivative-free minimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Minimize a unimodal scalar function on [a, b]; returns (x, f(x))."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


@dataclass
class MultiStartResult:
    x: np.ndarray
    fun: float
    start_values: list[float] = field(default_factory=list)

    @property
    def n_starts(self) -> int:
        return len(self.start_values)


def _polish(fun, x, fx, bounds, sweeps=2):
    x = np.array(x, dtype=float)
    for _ in range(sweeps):
        for i in range(x.size):
            radius = max(1e-4, 1e-3 * abs(x[i]))
            lo = max(bounds[i][0], x[i] - radius)
            hi = min(bounds[i][1], x[i] + radius)

            def along(t, i=i):
                y = x.copy()
                y[i] = t
                return fun(y)

            t, ft = golden_section(along, lo, hi)
            if ft < fx:
                x[i], fx = t, ft
    return x, fx


def multistart_minimize(fun, starts, bounds, xatol: float = 1e-10,
                        maxiter: int = 10_000, polish: bool = True) -> MultiStartResult:
    """Run bounded Nelder-Mead from every start and keep the best point.

    Non-finite objective values are treated as +inf.  Ties between starts are
    broken lexicographically on x so the result does not depend on ordering.
    """

    def safe(x):
        val = fun(np.asarray(x, dtype=float))
        return val if math.isfinite(val) else math.inf

    best_x, best_f = None, math.inf
    values = []
    for x0 in starts:
        x0 = np.asarray(x0, dtype=float)
        res = minimize(safe, x0, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": xatol, "fatol": 1e-15, "maxiter": maxiter})
        x, fx = np.asarray(res.x, dtype=float), float(res.fun)
        if polish and math.isfinite(fx):
            x, fx = _polish(safe, x, fx, bounds)
        values.append(fx)
        if fx < best_f or (fx == best_f and best_x is not None and tuple(x) < tuple(best_x)):
            best_x, best_f = x, fx
    if best_x is None:
        best_x = np.asarray(starts[0], dtype=float)
    return MultiStartResult(best_x, best_f, values)
