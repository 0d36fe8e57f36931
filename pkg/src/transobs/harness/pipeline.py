"""Certify / verify / observe pipelines over a scenario."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..carleman import (
    CarlemanWeight,
    carleman_check,
    energy_bound_constant,
    energy_inequality,
    energy_residual,
    ibp_identity_residual,
    pointwise_bound_margin,
    s_star,
)
from ..carleman.quadrature import slice_grid, surface_grid
from ..carleman.accumulate import compensated_sum
from ..certificate import AdmissibilityCertificate, AdmissibilityError, build_certificate, combine_constants, diagnostic_weight_parameters
from ..field import DEGENERATE
from ..transport import (
    BoundaryTrace,
    Solution,
    boundary_trace,
    random_profiles,
    random_test_functions,
    reconstruct_from_trace,
)
from .config import Scenario
from .report import VerificationReport

EXIT_OK, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4

IDENTITY_TOL = 1e-6
POINTWISE_TOL = 1e-9
ENERGY_STEPS = (1e-2, 5e-3)
ENERGY_RATIO = (4.0 * 0.9, 4.0 * 1.1)
ENERGY_CANDIDATES = 64
OBS_TIME_NODES = 256


@dataclass(frozen=True)
class CertifyResult:
    certificate: AdmissibilityCertificate | None
    error: str | None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.certificate is not None and self.certificate.feasible else EXIT_INFEASIBLE

    def as_dict(self) -> dict:
        if self.certificate is None:
            return {"feasible": False, "diagnostics": self.error}
        return self.certificate.as_dict()


def run_certify(scn: Scenario) -> CertifyResult:
    try:
        cert = build_certificate(scn.domain, scn.field, scn.c0, scn.mode, scn.eta)
    except AdmissibilityError as exc:
        return CertifyResult(None, str(exc))
    return CertifyResult(cert, None)


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rngs(scn: Scenario):
    return np.random.default_rng([scn.seed, 0]), np.random.default_rng([scn.seed, 1])


def ensemble_profiles(scn: Scenario):
    if scn.profiles:
        return list(scn.profiles)
    return random_profiles(_rngs(scn)[1], scn.n_profiles, scn.domain)


def verification_weight(cert: AdmissibilityCertificate) -> CarlemanWeight:
    if cert.feasible:
        return CarlemanWeight.from_certificate(cert)
    beta, tau = diagnostic_weight_parameters(cert)
    return CarlemanWeight.from_certificate(cert, beta=beta, tau=tau)


def ensemble_functions(scn: Scenario, weight: CarlemanWeight):
    active = weight.active_field(scn.field)
    return random_test_functions(_rngs(scn)[0], scn.ensemble_size, scn.domain, active, weight.window)


def _row(scn, check, **kw):
    base = {"scenario": scn.name, "mode": scn.mode, "check": check}
    base.update(kw)
    return base


def _carleman_rows(scn, cert, weight, fns, s_values, finals, level, workers):
    tasks = []
    for i in range(len(fns)):
        for s in s_values:
            tasks.append((i, s, "exact"))
        for s in finals:
            tasks.append((i, s, "exact"))
            tasks.append((i, s, "final"))

    def work(task):
        i, s, form = task
        chk = carleman_check(fns[i], scn.field, cert, s, scn.domain, level, form, weight)
        rows = [_row(
            scn, "carleman", form=form, function=i, s=s, level=level, log_domain=chk.log_domain, log_scale=chk.log_scale,
            lhs=chk.lhs, rhs=chk.aw + chk.sigma + chk.endpoint, aw=chk.aw, sigma=chk.sigma, endpoint=chk.endpoint,
            paper_endpoint=chk.paper_endpoint, slack=chk.slack, residual=chk.relative_slack, tol=chk.tol, **{"pass": chk.passed},
        )]
        if form == "exact":
            idr = ibp_identity_residual(fns[i], scn.field, weight, s, scn.domain, level, log_domain=chk.log_domain)
            m = max(idr.lhs.log_scale, idr.rhs.log_scale) if idr.lhs.mantissa and idr.rhs.mantissa else 0.0
            rows.insert(0, _row(
                scn, "identity", form="", function=i, s=s, level=level, log_domain=chk.log_domain, log_scale=m,
                lhs=float(idr.lhs.to(m)), rhs=float(idr.rhs.to(m)), residual=idr.residual, tol=IDENTITY_TOL,
                **{"pass": idr.residual <= IDENTITY_TOL},
            ))
        return rows

    out = []
    for rows in _map(work, tasks, workers):
        out.extend(rows)
    return out


def _energy_row(scn, idx, profile, C_E, level):
    fld, dom = scn.field, scn.domain
    h0, h1 = ENERGY_STEPS
    cands = np.linspace(h0, fld.T - h0, ENERGY_CANDIDATES)
    res = [energy_residual(profile, fld, dom, float(t), h0, level) for t in cands]
    t = float(cands[int(np.argmax(res))])
    r0, r1 = energy_residual(profile, fld, dom, t, h0, level), energy_residual(profile, fld, dom, t, h1, level)
    ratio = r0 / r1 if r1 > 0 else math.nan
    ineq = energy_inequality(profile, fld, dom, level, C_E=C_E)
    ok = ENERGY_RATIO[0] <= ratio <= ENERGY_RATIO[1] and ineq.passed
    return {
        "scenario": scn.name, "profile": idx, "t": t, "h": h0, "residual": r0, "residual_half_h": r1, "ratio": ratio,
        "ratio_lo": ENERGY_RATIO[0], "ratio_hi": ENERGY_RATIO[1], "max_gap": ineq.max_gap, "C_E": C_E,
        "g_norm_sq": ineq.g_norm_sq, "bound": ineq.bound, "pass": ok,
    }


def run_verify(scn: Scenario, force: bool = False, level: int | None = None, s_grid=None, workers: int = 1):
    """Full verification report; returns (report, exit code)."""
    level = scn.level if level is None else level
    s_values = tuple(scn.s_grid if s_grid is None else s_grid)
    cr = run_certify(scn)
    report = VerificationReport(scn.name, scn.mode, certificate=cr.as_dict())
    cert = cr.certificate
    if cert is None:
        report.notes.append(f"no certificate: {cr.error}")
        return report, EXIT_INFEASIBLE
    if not cert.feasible:
        if not force:
            report.notes.append("certificate infeasible; rerun with --force for a diagnostic verification")
            return report, EXIT_INFEASIBLE
        report.diagnostic = True
    weight = verification_weight(cert)
    if report.diagnostic:
        report.notes.append(f"diagnostic weight: beta={weight.beta!r}, window={weight.window!r}")
    fns = ensemble_functions(scn, weight)

    finals = ()
    if scn.mode != DEGENERATE:
        ss = s_star(cert, scn.field, scn.domain, weight)
        report.constants["s_star"] = ss
        finals = tuple(f * ss for f in scn.final_factors) if math.isfinite(ss) else ()
    report.carleman = _carleman_rows(scn, cert, weight, fns, s_values, finals, level, workers)

    margin = pointwise_bound_margin(scn.domain, scn.field, cert.x0, cert.delta, (0.0, weight.tau), scn.mode)
    report.carleman.append(_row(
        scn, "pointwise", form="", function="", s="", level="", residual=margin, tol=POINTWISE_TOL,
        **{"pass": margin >= -POINTWISE_TOL},
    ))
    report.constants["pointwise_margin"] = margin

    C_E = energy_bound_constant(scn.field)
    profiles = ensemble_profiles(scn)
    report.energy = _map(lambda ip: _energy_row(scn, ip[0], ip[1], C_E, level), list(enumerate(profiles)), workers)
    report.constants["C_E"] = C_E
    if cert.feasible:
        report.constants["kappa_minus_beta_eps_p"] = cert.decay_gap
        report.constants["two_eps"] = 2 * cert.eps
    if not report.passed:
        return report, EXIT_NUMERICAL
    return report, EXIT_INFEASIBLE if report.diagnostic else EXIT_OK


# -- observability


def observation_times(T: float, t1: float) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, T, OBS_TIME_NODES), [0.0, t1, T]]))


@dataclass(frozen=True)
class ProfileRatio:
    u_norm_max: float
    g_norm: float
    ratio: float
    ratio_local: float
    status: str


def profile_ratio(profile, scn: Scenario, level: int, t1: float) -> ProfileRatio:
    sol = Solution(profile, scn.field)
    times = observation_times(scn.field.T, t1)
    base = slice_grid(scn.domain, 0.0, level)
    norms = np.array([
        math.sqrt(compensated_sum(base.w * sol.value(base.x, np.full(base.w.size, t)) ** 2)) for t in times
    ])
    S = surface_grid(scn.domain, (0.0, scn.field.T), level)
    g = math.sqrt(compensated_sum(S.w * sol.value(S.x, S.t) ** 2))
    umax = float(norms.max())
    local = times <= t1
    if umax == 0.0:
        return ProfileRatio(0.0, g, math.nan, math.nan, "skipped")
    if g == 0.0:
        return ProfileRatio(umax, 0.0, math.inf, math.inf, "unbounded")
    return ProfileRatio(umax, g, umax / g, float(norms[local].max()) / g, "ok")


def _aggregate(ratios, attr):
    vals = [getattr(r, attr) for r in ratios if r.status != "skipped"]
    return max(vals) if vals else math.nan


def estimate_observability_constant(scn: Scenario, level: int | None = None, force: bool = False, workers: int = 1):
    """Empirical C_obs = max over profiles and times of ||u(t)|| / ||g||, at levels L and L+1."""
    level = scn.level if level is None else level
    cr = run_certify(scn)
    cert = cr.certificate
    report = VerificationReport(scn.name, scn.mode, certificate=cr.as_dict())
    if cert is None or not cert.feasible:
        if not force:
            report.notes.append("certificate infeasible; rerun with --force for a diagnostic estimate")
            return report, EXIT_INFEASIBLE
        report.diagnostic = True
    t1 = cert.t1 if cert is not None else scn.field.T
    profiles = ensemble_profiles(scn)
    results = {}
    for L in (level, level + 1):
        ratios = _map(lambda p: profile_ratio(p, scn, L, t1), profiles, workers)
        results[L] = ratios
        for i, r in enumerate(ratios):
            report.observability.append({
                "scenario": scn.name, "profile": i, "level": L, "u_norm_max": r.u_norm_max, "g_norm": r.g_norm,
                "ratio": r.ratio, "ratio_local": r.ratio_local, "status": r.status,
            })
    C_obs = _aggregate(results[level], "ratio")
    C_fine = _aggregate(results[level + 1], "ratio")
    C_local = _aggregate(results[level], "ratio_local")
    C_E = energy_bound_constant(scn.field)
    rc = report.constants
    rc["C_obs"] = C_obs
    rc["C_obs_fine"] = C_fine
    rc["C_obs_relative_change"] = abs(C_fine - C_obs) / C_obs if math.isfinite(C_obs) and C_obs > 0 else math.nan
    rc["C_local"] = C_local
    rc["C_E"] = C_E
    rc["C2"] = combine_constants(C_local, C_E) if not math.isnan(C_local) else math.nan
    rc["skipped_profiles"] = sum(r.status == "skipped" for r in results[level])
    unbounded = any(r.status == "unbounded" for r in results[level])
    if unbounded:
        report.notes.append("boundary trace vanishes for a nonzero solution: ratio unbounded")
    anomaly = unbounded and cert is not None and cert.feasible
    if anomaly:
        report.notes.append("anomaly: unbounded ratio on a feasible certificate")
    code = EXIT_NUMERICAL if anomaly else (EXIT_INFEASIBLE if report.diagnostic else EXIT_OK)
    return report, code


# -- traces


def export_trace(scn: Scenario, path, profile: int = 0, level: int | None = None) -> BoundaryTrace:
    profiles = ensemble_profiles(scn)
    if not 0 <= profile < len(profiles):
        raise IndexError(f"profile index {profile} out of range (ensemble has {len(profiles)})")
    grid = surface_grid(scn.domain, (0.0, scn.field.T), scn.level if level is None else level)
    trace = boundary_trace(profiles[profile], scn.field, grid, scn.domain, source=f"{scn.name}:profile{profile}")
    trace.to_csv(path)
    return trace


def reconstruct(scn: Scenario, x, t: float, trace_path=None, profile: int = 0, level: int | None = None):
    """(reconstructed value or None, exact value) at (x, t)."""
    profiles = ensemble_profiles(scn)
    u0 = profiles[profile]
    if trace_path is not None:
        trace = BoundaryTrace.from_csv(trace_path, scn.domain)
    else:
        grid = surface_grid(scn.domain, (0.0, scn.field.T), scn.level if level is None else level)
        trace = boundary_trace(u0, scn.field, grid, scn.domain, source=f"{scn.name}:profile{profile}")
    exact = float(Solution(u0, scn.field).value(np.atleast_2d(np.asarray(x, dtype=float)), np.array([t]))[0])
    return reconstruct_from_trace(trace, scn.field, x, t), exact


__all__ = [
    "EXIT_CONFIG", "EXIT_INFEASIBLE", "EXIT_NUMERICAL", "EXIT_OK", "CertifyResult", "ProfileRatio",
    "estimate_observability_constant", "export_trace", "profile_ratio", "reconstruct", "run_certify", "run_verify",
]
