"""Report data model and deterministic CSV / text emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

CERTIFY_COLUMNS = ["key", "value"]
CARLEMAN_COLUMNS = [
    "scenario", "mode", "check", "form", "function", "s", "level", "log_domain", "log_scale",
    "lhs", "rhs", "aw", "sigma", "endpoint", "paper_endpoint", "slack", "residual", "tol", "pass",
]
ENERGY_COLUMNS = [
    "scenario", "profile", "t", "h", "residual", "residual_half_h", "ratio", "ratio_lo", "ratio_hi",
    "max_gap", "C_E", "g_norm_sq", "bound", "pass",
]
OBSERVABILITY_COLUMNS = ["scenario", "profile", "level", "u_norm_max", "g_norm", "ratio", "ratio_local", "status"]


def fmt(v) -> str:
    """Exact text for numbers: 17 significant digits, 'inf'/'nan' spelled out."""
    if hasattr(v, "tolist"):
        v = v.tolist()
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return " ".join(fmt(x) for x in v)
    return str(v)


@dataclass
class VerificationReport:
    scenario: str
    mode: str
    diagnostic: bool = False
    certificate: dict = field(default_factory=dict)
    carleman: list[dict] = field(default_factory=list)
    energy: list[dict] = field(default_factory=list)
    observability: list[dict] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def _all_rows(self):
        return self.carleman + self.energy + [r for r in self.observability if "pass" in r]

    @property
    def failures(self) -> list[dict]:
        return [r for r in self._all_rows() if not r["pass"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def counts(self) -> dict[str, tuple[int, int]]:
        out: dict[str, list[int]] = {}
        for r in self.carleman:
            key = r["check"] if r["check"] != "carleman" else f"carleman/{r['form']}"
            c = out.setdefault(key, [0, 0])
            c[0] += bool(r["pass"])
            c[1] += 1
        if self.energy:
            out["energy"] = [sum(bool(r["pass"]) for r in self.energy), len(self.energy)]
        return {k: (v[0], v[1]) for k, v in out.items()}


def _csv_text(columns, rows, title: str) -> str:
    buf = io.StringIO()
    buf.write(f"# transobs {title} schema v{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def certify_text(cert: dict) -> str:
    return _csv_text(CERTIFY_COLUMNS, [{"key": k, "value": v} for k, v in cert.items()], "certify")


def summary_text(report: VerificationReport) -> str:
    lines = [f"scenario: {report.scenario}", f"mode: {report.mode}"]
    if report.diagnostic:
        lines.append("run: DIAGNOSTIC (forced on an infeasible certificate)")
    cert = report.certificate
    if cert:
        lines.append(f"feasible: {fmt(cert.get('feasible'))}")
        for key in ("t1", "T0", "margin", "delta", "beta", "kappa", "eps"):
            if key in cert:
                lines.append(f"  {key} = {fmt(cert[key])}")
    for name, (ok, n) in report.counts().items():
        lines.append(f"{name}: {ok}/{n} passed")
    for key, value in report.constants.items():
        lines.append(f"{key} = {fmt(value)}")
    for note in report.notes:
        lines.append(f"note: {note}")
    if not report.passed:
        verdict = "FAIL"
    elif cert and not cert.get("feasible") and not report.diagnostic:
        verdict = "INFEASIBLE"
    else:
        verdict = "PASS"
    lines.append(f"verdict: {verdict}")
    return "\n".join(lines) + "\n"


def render(report: VerificationReport) -> dict[str, str]:
    return {
        "certify.csv": certify_text(report.certificate),
        "carleman.csv": _csv_text(CARLEMAN_COLUMNS, report.carleman, "carleman"),
        "energy.csv": _csv_text(ENERGY_COLUMNS, report.energy, "energy"),
        "observability.csv": _csv_text(OBSERVABILITY_COLUMNS, report.observability, "observability"),
        "summary.txt": summary_text(report),
    }


def emit_report(report: VerificationReport, out_dir, formats=("csv", "text-summary")) -> list[Path]:
    """Write the report files; identical reports give byte-identical files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in render(report).items():
        if name.endswith(".csv") and "csv" not in formats:
            continue
        if name.endswith(".txt") and "text-summary" not in formats:
            continue
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
