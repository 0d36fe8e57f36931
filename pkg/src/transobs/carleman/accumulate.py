"""Deterministic reductions: compensated sums and log-domain accumulation of exponentially weighted integrands."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._numeric import EXTENDED, real
from .quadrature import QuadratureError, QuadratureGrid


def compensated_sum(values) -> float:
    """Correctly rounded sum (independent of evaluation order upstream).

    Long double input is reduced in long double by numpy's fixed pairwise order,
    which stays deterministic and keeps the extra bits.
    """
    arr = real(values).ravel()
    if arr.dtype == EXTENDED:
        return np.sum(arr, dtype=EXTENDED)
    return math.fsum(arr.tolist())


@dataclass(frozen=True)
class Scaled:
    """The number ``mantissa * exp(log_scale)``."""

    mantissa: float
    log_scale: float = 0.0

    def to(self, log_scale: float) -> float:
        if self.mantissa == 0.0:
            return 0.0 * self.mantissa
        if self.log_scale == log_scale:
            return self.mantissa
        if isinstance(self.mantissa, EXTENDED):
            return self.mantissa * np.exp(EXTENDED(self.log_scale) - EXTENDED(log_scale))
        return self.mantissa * math.exp(self.log_scale - log_scale)

    @property
    def extended(self) -> bool:
        return isinstance(self.mantissa, EXTENDED)

    def __float__(self) -> float:
        return float(self.to(0.0))

    @property
    def log_abs(self) -> float:
        return -math.inf if self.mantissa == 0.0 else math.log(abs(float(self.mantissa))) + self.log_scale

    def __neg__(self) -> Scaled:
        return Scaled(-self.mantissa, self.log_scale)

    def __mul__(self, k: float) -> Scaled:
        return Scaled(self.mantissa * k, self.log_scale)

    __rmul__ = __mul__

    def __add__(self, other: Scaled) -> Scaled:
        return combine([self, other])

    def __sub__(self, other: Scaled) -> Scaled:
        return combine([self, -other])


ZERO = Scaled(0.0, 0.0)


def common_scale(values) -> float:
    scales = [v.log_scale for v in values if v.mantissa != 0.0]
    return max(scales) if scales else 0.0


def combine(values, signs=None) -> Scaled:
    """Sum of Scaled values at their largest common scale."""
    values = list(values)
    if signs is not None:
        values = [v if s > 0 else -v for v, s in zip(values, signs)]
    m = common_scale(values)
    if any(v.extended for v in values):
        return Scaled(np.sum(np.array([v.to(m) for v in values], dtype=EXTENDED)), m)
    return Scaled(math.fsum(v.to(m) for v in values), m)


def _check_finite(grid: QuadratureGrid, arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureError(f"non-finite {what} at node x={grid.x[i].tolist()}, t={grid.t[i]!r}")


def weighted_integral(grid: QuadratureGrid, values, log_weight=None, log_domain: bool = False) -> Scaled:
    """Quadrature of ``exp(log_weight) * values`` over ``grid``.

    In linear mode the exponential is formed directly and must stay finite; pass
    ``log_domain=True`` to accumulate in the log domain when it would overflow.
    """
    values = np.broadcast_to(real(values), grid.w.shape)
    _check_finite(grid, values, "integrand")
    if log_weight is None:
        return Scaled(compensated_sum(grid.w * values))
    lw = np.broadcast_to(real(log_weight), grid.w.shape)
    if not log_domain:
        with np.errstate(over="ignore"):
            prod = grid.w * np.exp(lw) * values
        if not np.all(np.isfinite(prod)):
            _check_finite(grid, prod, "weighted integrand (overflow: log-domain accumulation required)")
        return Scaled(compensated_sum(prod))
    with np.errstate(divide="ignore"):
        ell = lw + np.log(grid.w) + np.log(np.abs(values))
    finite = np.isfinite(ell)
    if not np.any(finite):
        return ZERO
    m = float(np.max(ell[finite]))
    terms = np.where(finite, np.sign(values) * np.exp(np.where(finite, ell, m) - m), 0.0)
    return Scaled(compensated_sum(terms), m)


def integrate(grid: QuadratureGrid, integrand) -> float:
    """Plain quadrature of an array of node values or a callable ``f(x, t)``."""
    vals = integrand(grid.x, grid.t) if callable(integrand) else integrand
    return float(weighted_integral(grid, vals))
