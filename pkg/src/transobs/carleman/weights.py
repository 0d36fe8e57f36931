"""Carleman weights phi = |x-x0|^2 - beta t^2 (degenerate) and psi = |x-x0|^2 - beta t (non-degenerate)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .._numeric import real
from ..field import DEGENERATE, MODES, VectorField, reflect_extend
from ..geometry import SpatialDomain
from .quadrature import Grading

LOG_DOMAIN_THRESHOLD = 600.0
# nodes whose weight exponent sits this far below the maximum cannot contribute in double precision
PRUNE_MARGIN = 1500.0


class WeightSample(NamedTuple):
    value: np.ndarray
    shifted: np.ndarray
    first: np.ndarray  # A phi
    second: np.ndarray  # A^2 phi


@dataclass(frozen=True, eq=False)
class CarlemanWeight:
    mode: str
    x0: np.ndarray
    beta: float
    tau: float
    shift: float

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (self.beta > 0 and self.tau > 0):
            raise ValueError("beta and tau must be positive")
        object.__setattr__(self, "x0", np.atleast_1d(real(self.x0)))

    @classmethod
    def from_certificate(cls, cert, shift: float | None = None, beta: float | None = None, tau: float | None = None) -> CarlemanWeight:
        b = cert.beta if beta is None else beta
        tt = cert.t1 if tau is None else tau
        if b is None:
            raise ValueError("certificate is infeasible: pass beta and tau explicitly for diagnostic runs")
        return cls(cert.mode, cert.x0, float(b), float(tt), cert.d_M if shift is None else float(shift))

    @property
    def degenerate(self) -> bool:
        return self.mode == DEGENERATE

    @property
    def window(self) -> tuple[float, float]:
        return (-self.tau, self.tau) if self.degenerate else (0.0, self.tau)

    @property
    def time_splits(self) -> tuple[float, ...]:
        # the reflected field is only C^1 across t = 0
        return (0.0,) if self.degenerate else ()

    def active_field(self, field: VectorField) -> VectorField:
        return reflect_extend(field) if self.degenerate else field

    def _check_window(self, t):
        lo, hi = self.window
        slack = 1e-12 * max(1.0, self.tau)
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise ValueError(f"time outside the weight window [{lo}, {hi}]")

    def value(self, x, t) -> np.ndarray:
        x = np.atleast_2d(real(x))
        t = real(t)
        r2 = np.sum((x - self.x0) ** 2, axis=-1)
        return r2 - self.beta * (t**2 if self.degenerate else t)

    def first(self, field: VectorField, x, t) -> np.ndarray:
        x = np.atleast_2d(real(x))
        t = real(t)
        hx = 2.0 * np.sum(field.H(t) * (x - self.x0), axis=-1)
        return hx - (2.0 * self.beta * t if self.degenerate else self.beta)

    def second(self, field: VectorField, x, t) -> np.ndarray:
        x = np.atleast_2d(real(x))
        t = real(t)
        H = field.H(t)
        out = 2.0 * np.sum(field.dH(t) * (x - self.x0), axis=-1) + 2.0 * np.sum(H * H, axis=-1)
        return out - 2.0 * self.beta if self.degenerate else out

    def log_weight(self, x, t, s: float, shift: float | None = None) -> np.ndarray:
        """2 s (phi - shift); the default shift keeps the exponent <= 0 on the cylinder."""
        lam = self.shift if shift is None else shift
        return 2.0 * s * (self.value(x, t) - lam)

    def exponent_range(self, domain: SpatialDomain) -> float:
        d_m, d_M = domain.radius_extrema(self.x0)
        return d_M - d_m + self.beta * (self.tau**2 if self.degenerate else self.tau)

    def needs_log_domain(self, domain: SpatialDomain, s: float) -> bool:
        return 2.0 * s * self.exponent_range(domain) > LOG_DOMAIN_THRESHOLD

    def transit_time(self, field: VectorField, domain: SpatialDomain, samples: int = 4096) -> float | None:
        """First t in (0, tau] at which the flow has moved one diameter (None if it never does)."""
        ts = np.linspace(0.0, self.tau, samples + 1)[1:]
        moved = np.linalg.norm(field.flow(ts), axis=-1) >= domain.diameter()
        return float(ts[np.argmax(moved)]) if moved.any() else None

    def time_grading(self, field: VectorField, domain: SpatialDomain, s: float | None = None, log_domain: bool = False) -> Grading:
        """Geometric time panels from t = 0 sized by the transit time, merged with the weight grading."""
        g = self.grading(domain, s) if log_domain else Grading()
        w0 = self.transit_time(field, domain)
        if w0 is None or w0 >= 0.5 * self.tau:
            return g
        width = min([w0] + [wd for _, wd in g.time])
        return Grading(g.axes, ((0.0, width),))

    def grading(self, domain: SpatialDomain, s: float) -> Grading:
        """Panel grading toward the weight maximum (used in log-domain mode)."""
        x0 = self.x0
        if domain.kind in ("interval", "box"):
            axes = []
            for i in range(domain.dim):
                lo, hi = domain.lo[i], domain.hi[i]
                ends = [(e, 2 * s * (e - x0[i]) ** 2) for e in (lo, hi)]
                top = max(v for _, v in ends)
                g = []
                for e, v in ends:
                    k = 4 * s * abs(e - x0[i])
                    if top - v < 50.0 and k * (hi - lo) > 8.0:
                        g.append((e, 4.0 / k))
                axes.append(tuple(g))
        else:
            c = domain.center
            D = float(np.linalg.norm(c - x0))
            R = domain.radius
            k = 4 * s * (R + D)
            radial = ((R, 4.0 / k),) if k * R > 8.0 else ()
            theta_peak = math.atan2(*(c - x0)[::-1]) if D > 0 else 0.0
            sig = 1.0 / math.sqrt(4 * s * R * D) if D > 0 else math.inf
            angular = ((theta_peak, 2.0 * sig),) if sig < 0.5 else ()
            axes = [radial, angular]
        if self.degenerate:
            sig = 1.0 / (2.0 * math.sqrt(s * self.beta))
            time = ((0.0, 2.0 * sig),) if sig < 0.25 * self.tau else ()
        else:
            k = 2 * s * self.beta
            time = ((0.0, 4.0 / k),) if k * self.tau > 8.0 else ()
        return Grading(tuple(axes), time)


def weight_eval(weight: CarlemanWeight, field: VectorField, x, t) -> WeightSample:
    """phi, phi - shift, A phi and A^2 phi at (x, t) (field reflected automatically in degenerate mode)."""
    t = real(t)
    weight._check_window(t)
    f = weight.active_field(field)
    v = weight.value(x, t)
    return WeightSample(v, v - weight.shift, weight.first(f, x, t), weight.second(f, x, t))
