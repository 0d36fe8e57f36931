"""Quadrature checks of the weighted integration-by-parts identity, the sharp Carleman
inequalities, the energy identity and the pointwise lower bound behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..field import DEGENERATE, NONDEGENERATE, VectorField
from ..geometry import SpatialDomain
from .accumulate import Scaled, combine, common_scale, compensated_sum, weighted_integral
from .quadrature import boundary_slice_grid, slice_grid, surface_grid, volume_grid
from .weights import PRUNE_MARGIN, CarlemanWeight

TINY = 1e-300
ROUNDOFF_FLOOR = 1e-12
TOL_FACTOR = 10.0


@dataclass(frozen=True)
class IdentityResult:
    lhs: Scaled
    rhs: Scaled
    residual: float


class _Nodes:
    """Node data of one grid: log-weight, w, A w and the weight derivatives."""

    def __init__(self, grid, w, field, weight, s, shift, log_domain):
        lw = weight.log_weight(grid.x, grid.t, s, shift)
        if log_domain and grid.size:
            keep = lw >= lw.max() - PRUNE_MARGIN
            grid, lw = grid.subset(keep), lw[keep]
        self.grid, self.lw, self.log_domain = grid, lw, log_domain
        self.w = w.value(grid.x, grid.t)
        self.field = field
        self._w, self._weight = w, weight

    @property
    def Aw(self):
        return self._w.apply_A(self.field, self.grid.x, self.grid.t)

    @property
    def first(self):
        return self._weight.first(self.field, self.grid.x, self.grid.t)

    @property
    def second(self):
        return self._weight.second(self.field, self.grid.x, self.grid.t)

    @property
    def flux(self):
        return np.sum(self.field.H(self.grid.t) * self.grid.normal, axis=-1)

    def integral(self, values) -> Scaled:
        return weighted_integral(self.grid, values, self.lw, self.log_domain)


def _node_sets(w, field, weight: CarlemanWeight, s, domain, level, shift, log_domain, extended=False):
    f = weight.active_field(field)
    grading = weight.time_grading(field, domain, s, log_domain)
    lo, hi = weight.window
    mk = lambda g: _Nodes(g, w, f, weight, s, shift, log_domain)  # noqa: E731
    return (
        mk(volume_grid(domain, weight.window, level, grading, weight.time_splits, extended)),
        mk(surface_grid(domain, weight.window, level, grading, weight.time_splits, extended)),
        mk(slice_grid(domain, lo, level, grading, extended)),
        mk(slice_grid(domain, hi, level, grading, extended)),
    )


def _relative(a: Scaled, b: Scaled) -> float:
    m = common_scale([a, b])
    x, y = a.to(m), b.to(m)
    return float(abs(x - y) / (abs(x) + abs(y) + TINY))


def ibp_identity_residual(w, field: VectorField, weight: CarlemanWeight, s: float, domain: SpatialDomain,
                          level: int = 3, shift: float | None = None, log_domain: bool | None = None,
                          extended: bool = False) -> IdentityResult:
    """Relative residual of 2(Az, -s(A phi) z) = s∫A²phi|z|² - s∫_Σ A phi (H·ν)|z|² - s[∫_Ω A phi|z|²] with z = e^{s phi} w.

    ``extended`` evaluates nodes, weights and sums in long double, which lowers the
    roundoff floor so that refinement can be followed past double precision.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if log_domain is None:
        log_domain = weight.needs_log_domain(domain, s)
    V, S, E0, E1 = _node_sets(w, field, weight, s, domain, level, shift, log_domain, extended)
    a1 = V.first
    lhs = V.integral(-2.0 * s * a1 * V.w * (V.Aw + s * a1 * V.w))
    vol = V.integral(s * V.second * V.w**2)
    sig = S.integral(s * S.first * S.flux * S.w**2)
    end = combine([E1.integral(s * E1.first * E1.w**2), E0.integral(s * E0.first * E0.w**2)], signs=[1, -1])
    rhs = combine([vol, sig, end], signs=[1, -1, -1])
    return IdentityResult(lhs, rhs, _relative(lhs, rhs))


@dataclass(frozen=True)
class CarlemanTerms:
    lhs: Scaled
    aw: Scaled
    sigma: Scaled
    endpoint: Scaled
    paper_endpoint: Scaled

    @property
    def rhs(self) -> Scaled:
        return combine([self.aw, self.sigma, self.endpoint])

    @property
    def slack(self) -> Scaled:
        return combine([self.rhs, -self.lhs])

    @property
    def parts(self) -> list[Scaled]:
        return [self.lhs, self.aw, self.sigma, self.endpoint]


def carleman_terms(w, field: VectorField, cert, s: float, domain: SpatialDomain, level: int = 3,
                   form: str = "exact", weight: CarlemanWeight | None = None, shift: float | None = None,
                   log_domain: bool | None = None) -> CarlemanTerms:
    """Both sides of the sharp Carleman inequality, every term weighted by e^{2s(phi - shift)}.

    Degenerate: LHS = 2(delta - beta) s ∫ e|w|². Non-degenerate ``exact``: LHS =
    s²∫e(A psi)²|w|² + s∫e A²psi|w|²; ``final``: LHS = ((2delta - beta)²/2) s²∫e|w|².
    RHS = ∫e|Aw|² + s∫_Σ e A phi (H·ν)|w|² + s[∫_Ω e A phi |w|²] (endpoint difference).
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if weight is None:
        if not cert.feasible:
            raise ValueError("certificate is infeasible; pass an explicit diagnostic weight")
        weight = CarlemanWeight.from_certificate(cert)
    if log_domain is None:
        log_domain = weight.needs_log_domain(domain, s)
    V, S, E0, E1 = _node_sets(w, field, weight, s, domain, level, shift, log_domain)
    w2 = V.w**2
    b, delta = weight.beta, cert.delta
    if weight.mode == DEGENERATE:
        if form != "exact":
            raise ValueError("the degenerate inequality has a single (exact) form")
        lhs = V.integral(2.0 * (delta - b) * s * w2)
    elif form == "exact":
        a1 = V.first
        lhs = V.integral((s * s * a1 * a1 + s * V.second) * w2)
    elif form == "final":
        lhs = V.integral(0.5 * (2 * delta - b) ** 2 * s * s * w2)
    else:
        raise ValueError(f"unknown form {form!r}")
    aw = V.integral(V.Aw**2)
    sigma = S.integral(s * S.first * S.flux * S.w**2)
    end = combine([E1.integral(s * E1.first * E1.w**2), E0.integral(s * E0.first * E0.w**2)], signs=[1, -1])
    sup_a = max((float(np.max(np.abs(n.first))) for n in (V, S, E0, E1) if n.grid.size), default=0.0)
    ends = [E1.integral(E1.w**2)] + ([E0.integral(E0.w**2)] if weight.degenerate else [])
    paper = combine(ends) * (s * sup_a)
    return CarlemanTerms(lhs, aw, sigma, end, paper)


@dataclass(frozen=True)
class SlackCheck:
    s: float
    level: int
    form: str
    log_domain: bool
    log_scale: float
    lhs: float
    aw: float
    sigma: float
    endpoint: float
    paper_endpoint: float
    slack: float
    slack_fine: float
    tol: float
    passed: bool

    @property
    def relative_slack(self) -> float:
        scale = abs(self.lhs) + abs(self.aw) + abs(self.sigma) + abs(self.endpoint)
        return self.slack / scale if scale else 0.0


def carleman_slack(w, field, cert, s, domain, level=3, form="exact", weight=None, shift=None, log_domain=None) -> Scaled:
    """RHS - LHS of the sharp inequality at one level (shifted units)."""
    return carleman_terms(w, field, cert, s, domain, level, form, weight, shift, log_domain).slack


def carleman_check(w, field, cert, s, domain, level=3, form="exact", weight=None, shift=None, log_domain=None) -> SlackCheck:
    """Slack at level L judged against tol_quad = 10 |slack_L - slack_{L+1}| (plus a roundoff floor)."""
    if weight is None:
        weight = CarlemanWeight.from_certificate(cert)
    if log_domain is None:
        log_domain = weight.needs_log_domain(domain, s)
    coarse = carleman_terms(w, field, cert, s, domain, level, form, weight, shift, log_domain)
    fine = carleman_terms(w, field, cert, s, domain, level + 1, form, weight, shift, log_domain)
    m = common_scale(coarse.parts + fine.parts + [coarse.paper_endpoint])
    sl, sf = coarse.slack.to(m), fine.slack.to(m)
    scale = sum(abs(p.to(m)) for p in coarse.parts)
    tol = TOL_FACTOR * abs(sl - sf) + ROUNDOFF_FLOOR * scale
    return SlackCheck(
        s=float(s), level=level, form=form, log_domain=bool(log_domain), log_scale=m,
        lhs=float(coarse.lhs.to(m)), aw=float(coarse.aw.to(m)), sigma=float(coarse.sigma.to(m)),
        endpoint=float(coarse.endpoint.to(m)), paper_endpoint=float(coarse.paper_endpoint.to(m)),
        slack=float(sl), slack_fine=float(sf), tol=float(tol), passed=bool(sl >= -tol),
    )


def s_star(cert, field: VectorField, domain: SpatialDomain, weight: CarlemanWeight | None = None,
           time_samples: int = 2001, space_samples: int = 1000) -> float:
    """Threshold 2M/(2 delta - beta)² with M = max |A² psi| over the closed cylinder."""
    if cert.mode != NONDEGENERATE:
        raise ValueError("s_star applies to the non-degenerate inequality")
    if weight is None:
        if not cert.feasible:
            raise ValueError("certificate is infeasible")
        weight = CarlemanWeight.from_certificate(cert)
    gap = 2 * cert.delta - weight.beta
    if not gap > 0:
        return math.inf
    xs = domain.sample_closure(space_samples)
    ts = np.linspace(0.0, weight.tau, time_samples)
    X = np.repeat(xs, ts.size, axis=0)
    T = np.tile(ts, xs.shape[0])
    M = float(np.max(np.abs(weight.second(field, X, T))))
    return 2.0 * M / gap**2


def pointwise_bound_margin(domain: SpatialDomain, field: VectorField, x0, delta: float, window, mode: str = DEGENERATE,
                           time_samples: int = 400, space_samples: int = 1000) -> float:
    """min over the grid of H'(t)·(x - x0) (or H(t)·(x - x0)) minus delta."""
    ts = np.linspace(window[0], window[1], time_samples)
    vec = field.dH(ts) if mode == DEGENERATE else field.H(ts)
    xs = domain.sample_closure(space_samples) - np.asarray(x0, dtype=float)
    return float(np.min(vec @ xs.T)) - delta


# -- energy identity


def _as_solution(u0, field):
    from ..transport import Solution

    return u0 if getattr(u0, "is_solution", False) else Solution(u0, field)


def _energy(sol, domain, t, level) -> float:
    g = slice_grid(domain, t, level)
    return compensated_sum(g.w * sol.value(g.x, g.t) ** 2)


def _flux(sol, field, domain, t, level) -> float:
    g = boundary_slice_grid(domain, t, level)
    hn = g.normal @ field.H(float(t))
    return compensated_sum(g.w * hn * sol.value(g.x, g.t) ** 2)


def energy_residual(u0, field: VectorField, domain: SpatialDomain, t: float, h: float, level: int = 3) -> float:
    """|central difference of ||u(t)||² + ∫_∂Ω (H·ν)|g(t)|² dσ|."""
    lo, hi = field.window
    if not (lo <= t - h and t + h <= hi and h > 0):
        raise ValueError(f"t ± h must stay inside [{lo}, {hi}]")
    sol = _as_solution(u0, field)
    ddt = (_energy(sol, domain, t + h, level) - _energy(sol, domain, t - h, level)) / (2 * h)
    return abs(ddt + _flux(sol, field, domain, t, level))


def energy_bound_constant(field: VectorField, samples: int = 10_000) -> float:
    """C_E = max over [0, T] of |H(t)|."""
    ts = np.linspace(0.0, field.T, samples + 1)
    mods = np.linalg.norm(field.H(ts), axis=-1)
    k = int(np.argmax(mods))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, samples)]
    res = minimize_scalar(lambda t: -float(np.linalg.norm(field.H(t))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(mods[k]), -float(res.fun))


@dataclass(frozen=True)
class EnergyCheck:
    max_gap: float
    g_norm_sq: float
    C_E: float
    passed: bool

    @property
    def bound(self) -> float:
        return self.C_E * self.g_norm_sq


def energy_inequality(u0, field: VectorField, domain: SpatialDomain, level: int = 3, times=None, C_E: float | None = None) -> EnergyCheck:
    """Checks | ||u(t)||² - ||u(0)||² | <= C_E ||g||²_{L²(Σ)} on a time grid."""
    sol = _as_solution(u0, field)
    if times is None:
        times = np.linspace(0.0, field.T, 257)
    CE = energy_bound_constant(field) if C_E is None else C_E
    e0 = _energy(sol, domain, 0.0, level)
    gap = max(abs(_energy(sol, domain, float(t), level) - e0) for t in times)
    S = surface_grid(domain, (0.0, field.T), level)
    gsq = compensated_sum(S.w * sol.value(S.x, S.t) ** 2)
    bound = CE * gsq
    return EnergyCheck(gap, gsq, CE, bool(gap <= bound * (1 + 1e-9) + 1e-14))
