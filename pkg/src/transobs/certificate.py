"""Admissibility certificates: observation point, geometric thresholds and the beta/kappa/epsilon choice."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .field import (
    DEGENERATE,
    MODES,
    FieldError,
    VectorField,
    modulus_lower_bound,
    persistence,
    reference_direction,
)
from .geometry import GeometryError, Location, SpatialDomain

DEFAULT_ETA = 0.05
ANGLE_TIME_SAMPLES = 200
ANGLE_SPACE_SAMPLES = 1000


class AdmissibilityError(ValueError):
    pass


def _check_c0(c0: float) -> None:
    if not 1 / math.sqrt(2) < c0 < 1:
        raise AdmissibilityError("c0 must lie in (1/√2,1)")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise AdmissibilityError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True, eq=False)
class AdmissibilityCertificate:
    mode: str
    c0: float
    rho: float
    T1: float
    t1: float
    t1_attained: bool
    theta0: np.ndarray
    R: float
    x0: np.ndarray
    angle_margin: float
    delta: float
    d_m: float
    d_M: float
    T0: float
    beta: float | None
    kappa: float | None
    eps: float | None
    feasible: bool
    diagnostics: tuple[str, ...] = ()
    eta: float = DEFAULT_ETA
    diameter: float = 0.0
    distance: float = 0.0
    beyond_hypotheses: bool = False

    @property
    def margin(self) -> float:
        """t1 - T0; positive exactly when the threshold condition holds."""
        return self.t1 - self.T0

    @property
    def beta_interval(self) -> tuple[float, float]:
        gap = self.d_M - self.d_m
        if self.mode == DEGENERATE:
            return gap / self.t1**2, self.delta
        return gap / self.t1, 2.0 * self.delta

    @property
    def decay_gap(self) -> float | None:
        """kappa - beta*eps^2 (or kappa - beta*eps): the exponent driving the final absorption step."""
        if not self.feasible:
            return None
        p = 2 if self.mode == DEGENERATE else 1
        return self.kappa - self.beta * self.eps**p

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                for i, c in enumerate(v.tolist()):
                    out[f"{f.name}_{i}"] = c
            elif f.name == "diagnostics":
                out[f.name] = "; ".join(v)
            else:
                out[f.name] = v
        out["margin"] = self.margin
        out["decay_gap"] = self.decay_gap
        return out

    def audit(self) -> None:
        """Re-check every certificate invariant; raise AdmissibilityError on the first failure."""
        problems = []
        if abs(np.linalg.norm(self.theta0) - 1.0) > 1e-12:
            problems.append("theta0 is not a unit vector")
        if not np.allclose(self.x0, -self.R * self.theta0, rtol=0, atol=1e-12 * self.R):
            problems.append("x0 != -R*theta0")
        if not self.R > (1 + self.c0) / (1 - self.c0) * self.diameter:
            problems.append("R does not exceed (1+c0)/(1-c0)*diam")
        if self.feasible:
            b, k, e, g = self.beta, self.kappa, self.eps, self.d_M - self.d_m
            if not math.isclose(self.delta, self.rho * (2 * self.c0**2 - 1) * self.distance, rel_tol=1e-12):
                problems.append("delta != rho*(2c0^2-1)*dist")
            if not self.delta > 0:
                problems.append("delta <= 0")
            if not self.angle_margin >= 0:
                problems.append("angle bound violated")
            if not self.T0 < self.t1:
                problems.append("T0 >= t1")
            if not 0 < e < self.t1:
                problems.append("eps outside (0, t1)")
            if not k > 0:
                problems.append("kappa <= 0")
            if self.mode == DEGENERATE:
                checks = [0 < b < self.delta, g - b * self.t1**2 <= -k * (1 - 1e-12), self.d_m - b * e**2 > 0, k - b * e**2 > 0]
            else:
                checks = [0 < b < 2 * self.delta, g - b * self.t1 <= -k * (1 - 1e-12), self.d_m - b * e > 0, k - b * e > 0]
            names = ["beta interval", "kappa gap", "d_m - beta*eps^p > 0", "kappa - beta*eps^p > 0"]
            problems += [n for n, ok in zip(names, checks) if not ok]
        if problems:
            raise AdmissibilityError("certificate self-audit failed: " + ", ".join(problems))


def select_observation_point(domain: SpatialDomain, field: VectorField, c0: float, mode: str = DEGENERATE, eta: float = DEFAULT_ETA):
    """x0 = -R*theta0 with R = (1+eta)(1+c0)/(1-c0) diam."""
    _check_c0(c0)
    _check_mode(mode)
    if not eta > 0:
        raise AdmissibilityError("eta must be positive")
    if field.dim != domain.dim:
        raise AdmissibilityError(f"field dimension {field.dim} != domain dimension {domain.dim}")
    try:
        theta0 = reference_direction(field, mode)
    except FieldError as exc:
        raise AdmissibilityError(str(exc)) from exc
    R = (1.0 + eta) * (1.0 + c0) / (1.0 - c0) * domain.diameter()
    x0 = -R * theta0
    if domain.contains(x0) is not Location.EXTERIOR:
        raise AdmissibilityError("observation point is not exterior")
    return x0, R, theta0


def verify_angle_bound(
    domain: SpatialDomain,
    field: VectorField,
    x0,
    c0: float,
    window: tuple[float, float],
    mode: str = DEGENERATE,
    time_samples: int = ANGLE_TIME_SAMPLES,
    space_samples: int = ANGLE_SPACE_SAMPLES,
) -> float:
    """Grid minimum of cos(angle(H'(t) or H(t), x - x0)) minus 2c0^2 - 1."""
    x0 = np.asarray(x0, dtype=float)
    if domain.contains(x0) is not Location.EXTERIOR:
        raise AdmissibilityError("x0 must be exterior to the domain")
    ts = np.linspace(window[0], window[1], max(time_samples, 2))
    vec = field.dH(ts) if mode == DEGENERATE else field.H(ts)
    nv = np.linalg.norm(vec, axis=-1)
    if np.any(nv <= 1e-12):
        raise AdmissibilityError("vanishing direction vector inside the window (positivity violated)")
    dirs = vec / nv[:, None]
    xs = domain.sample_closure(space_samples) - x0
    xs /= np.linalg.norm(xs, axis=-1)[:, None]
    return float(np.min(dirs @ xs.T)) - (2 * c0**2 - 1)


def combine_constants(C1: float, C_energy: float) -> float:
    """Global observability constant sqrt(C1^2 + C_energy) from a local one and the energy constant."""
    if C1 < 0 or C_energy < 0:
        raise ValueError("constants must be nonnegative")
    return math.hypot(C1, math.sqrt(C_energy))


def build_certificate(
    domain: SpatialDomain,
    field: VectorField,
    c0: float,
    mode: str = DEGENERATE,
    eta: float = DEFAULT_ETA,
) -> AdmissibilityCertificate:
    _check_c0(c0)
    _check_mode(mode)
    if field.reflected:
        raise AdmissibilityError("certificates are built from the unreflected field on [0, T]")
    diags = []
    try:
        if mode == DEGENERATE and np.linalg.norm(field.H(0.0)) > 1e-12:
            raise AdmissibilityError("degenerate mode requires H(0) = 0")
        rho = modulus_lower_bound(field, mode, (0.0, field.T1))
        pt = persistence(field, c0, mode)
    except FieldError as exc:
        raise AdmissibilityError(str(exc)) from exc
    t1 = pt.t1
    if t1 <= 0:
        raise AdmissibilityError("direction persistence time is zero")
    if not pt.attained:
        diags.append("cosine constraint is not attained at t1 itself (supremum not a maximum)")
    x0, R, theta0 = select_observation_point(domain, field, c0, mode, eta)
    try:
        angle_margin = verify_angle_bound(domain, field, x0, c0, (0.0, t1), mode)
        dist = domain.exterior_distance(x0)
        d_m, d_M = domain.radius_extrema(x0)
    except GeometryError as exc:
        raise AdmissibilityError(str(exc)) from exc
    delta = rho * (2 * c0**2 - 1) * dist
    gap = d_M - d_m
    T0 = math.sqrt(gap / delta) if mode == DEGENERATE else gap / delta

    beta = kappa = eps = None
    feasible = True
    if angle_margin < 0:
        feasible = False
        diags.append(f"angle bound violated on [0, t1] (margin {angle_margin:.6g})")
    if not T0 < t1:
        feasible = False
        diags.append(f"threshold T0={T0:.6g} >= t1={t1:.6g} (margin {t1 - T0:.6g})")
        diags.append("a different exterior observation point might lower T0; the -R*theta0 construction is fixed here")
    if feasible:
        lo, hi = (gap / t1**2, delta) if mode == DEGENERATE else (gap / t1, 2 * delta)
        beta = 0.5 * (lo + hi)
        if mode == DEGENERATE:
            kappa = beta * t1**2 - gap
            eps = min(0.5 * math.sqrt(min(d_m, kappa) / beta), 0.9 * t1)
        else:
            kappa = beta * t1 - gap
            eps = min(0.5 * min(d_m, kappa) / beta, 0.9 * t1)
    if not domain.smooth_boundary:
        diags.append("box domain: beyond the smooth-boundary hypotheses (verified numerically only)")

    cert = AdmissibilityCertificate(
        mode=mode, c0=float(c0), rho=rho, T1=field.T1, t1=t1, t1_attained=pt.attained,
        theta0=theta0, R=R, x0=x0, angle_margin=angle_margin, delta=delta, d_m=d_m, d_M=d_M,
        T0=T0, beta=beta, kappa=kappa, eps=eps, feasible=feasible, diagnostics=tuple(diags),
        eta=float(eta), diameter=domain.diameter(), distance=dist,
        beyond_hypotheses=not domain.smooth_boundary,
    )
    cert.audit()
    return cert


def diagnostic_weight_parameters(cert: AdmissibilityCertificate) -> tuple[float, float]:
    """(beta, tau) for forced runs: the certificate's own values when feasible,
    otherwise the longer window [0, T1] with beta at the middle of (0, delta) or (0, 2 delta)."""
    if cert.feasible:
        return cert.beta, cert.t1
    beta = 0.5 * cert.delta if cert.mode == DEGENERATE else cert.delta
    return beta, cert.T1
