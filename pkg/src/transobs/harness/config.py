"""Scenario files: plain ``key = value`` lines with dotted sections.

::

    name = S1
    domain.kind = interval          # interval | box | ball
    domain.dim = 1
    domain.params = -1, 1           # interval: lo,hi; box: lo_1..lo_d,hi_1..hi_d; ball: c_1..c_d,r
    field.dim = 1
    field.T = 5
    field.T1 = 5                    # optional, defaults to T
    field.component.1 = poly:0,1    # one descriptor per component, numbered 1..d
    cert.c0 = 0.8
    cert.eta = 0.05
    cert.mode = degenerate          # degenerate | non-degenerate
    verify.s_grid = 0.05, 0.1, 0.2, 0.5, 1.0
    verify.level = 3
    verify.final_factors = 1, 2     # non-degenerate final form at these multiples of s_*
    ensemble.size = 20              # random test functions for the inequality checks
    ensemble.seed = 1
    ensemble.profiles = 10          # random initial profiles for energy/observability
    ensemble.profile.1 = gauss:1,0  # explicit profiles replace the random ones
    output.dir = out/S1

``#`` starts a comment. Keys may appear once; unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..certificate import DEFAULT_ETA
from ..field import MODES, DescriptorError, VectorField, parse_component
from ..geometry import GeometryError, SpatialDomain
from ..transport import TestFunction, TransportError, parse_test_function

DEFAULT_S_GRID = (0.05, 0.1, 0.2, 0.5, 1.0)

_SCALAR_KEYS = {
    "name", "domain.kind", "domain.dim", "domain.params", "field.dim", "field.T", "field.T1",
    "cert.c0", "cert.eta", "cert.mode", "verify.s_grid", "verify.level", "verify.final_factors",
    "ensemble.size", "ensemble.seed", "ensemble.profiles", "output.dir",
}
_INDEXED = re.compile(r"^(field\.component|ensemble\.profile)\.(\d+)$")
_REQUIRED = ("name", "domain.kind", "domain.dim", "domain.params", "field.dim", "field.T")


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None, key: str | None = None):
        where = path
        if line is not None:
            where += f":{line}"
        if key:
            where += f" [{key}]"
        super().__init__(f"{where}: {message}" if where else message)
        self.line, self.key = line, key


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    domain: SpatialDomain
    field: VectorField
    mode: str = "degenerate"
    c0: float = 0.8
    eta: float = DEFAULT_ETA
    s_grid: tuple[float, ...] = DEFAULT_S_GRID
    level: int = 3
    final_factors: tuple[float, ...] = (1.0, 2.0)
    ensemble_size: int = 20
    seed: int = 0
    n_profiles: int = 10
    profiles: tuple[TestFunction, ...] = ()
    output_dir: str = ""
    source: str = ""
    raw: dict = field(default_factory=dict)


def _numbers(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"{what} must be finite numbers, got {text!r}")
    return vals


def parse_lines(text: str, path: str = "<string>") -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", path, no)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _SCALAR_KEYS and not _INDEXED.match(key):
            raise ConfigError(f"unknown key {key!r}", path, no, key)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", path, no, key)
        if not value:
            raise ConfigError("empty value", path, no, key)
        entries[key] = (value, no)
    return entries


def _indexed(entries, prefix, path):
    items = {}
    for key, (value, no) in entries.items():
        m = _INDEXED.match(key)
        if m and m.group(1) == prefix:
            items[int(m.group(2))] = (value, no, key)
    if items and sorted(items) != list(range(1, len(items) + 1)):
        raise ConfigError(f"{prefix}.<i> must be numbered 1..n without gaps", path)
    return [items[i] for i in sorted(items)]


def _build_domain(kind: str, dim: int, params: list[float]) -> SpatialDomain:
    if kind == "interval":
        if dim != 1 or len(params) != 2:
            raise ValueError("interval needs domain.dim = 1 and params lo,hi")
        return SpatialDomain.interval(*params)
    if kind == "box":
        if len(params) != 2 * dim:
            raise ValueError(f"box in d={dim} needs {2 * dim} params (lower corner, then upper corner)")
        return SpatialDomain.box(params[:dim], params[dim:])
    if kind == "ball":
        if len(params) != dim + 1:
            raise ValueError(f"ball in d={dim} needs {dim + 1} params (center, radius)")
        return SpatialDomain.ball(params[:dim], params[dim])
    raise ValueError(f"domain.kind must be interval, box or ball, got {kind!r}")


def scenario_from_text(text: str, path: str = "<string>") -> Scenario:
    entries = parse_lines(text, path)
    for key in _REQUIRED:
        if key not in entries:
            raise ConfigError(f"missing required key {key!r}", path, key=key)

    def get(key, conv, default=None):
        if key not in entries:
            return default
        value, no = entries[key]
        try:
            return conv(value)
        except (ValueError, DescriptorError, GeometryError, TransportError) as exc:
            raise ConfigError(str(exc), path, no, key) from None

    def integer(v):
        if not re.fullmatch(r"[-+]?\d+", v):
            raise ValueError(f"expected an integer, got {v!r}")
        return int(v)

    def number(v):
        vals = _numbers(v, "value")
        if len(vals) != 1:
            raise ValueError("expected a single number")
        return vals[0]

    dim = get("domain.dim", integer)
    if dim < 1:
        raise ConfigError("domain.dim must be >= 1", path, entries["domain.dim"][1], "domain.dim")
    kind = entries["domain.kind"][0]
    domain = get("domain.params", lambda v: _build_domain(kind, dim, _numbers(v, "domain.params")))

    fdim = get("field.dim", integer)
    comps = _indexed(entries, "field.component", path)
    if len(comps) != fdim:
        raise ConfigError(f"field.dim = {fdim} but {len(comps)} field.component.<i> entries given", path, key="field.dim")
    if fdim != dim:
        raise ConfigError(f"field.dim = {fdim} does not match domain.dim = {dim}", path, entries["field.dim"][1], "field.dim")
    parsed = []
    for value, no, key in comps:
        try:
            parsed.append(parse_component(value))
        except DescriptorError as exc:
            raise ConfigError(str(exc), path, no, key) from None
    T = get("field.T", number)
    T1 = get("field.T1", number)
    try:
        fld = VectorField(tuple(parsed), T, T1)
    except ValueError as exc:
        raise ConfigError(str(exc), path, key="field.T") from None

    mode = get("cert.mode", str, "degenerate")
    if mode not in MODES:
        raise ConfigError(f"cert.mode must be one of {', '.join(MODES)}", path, entries["cert.mode"][1], "cert.mode")
    c0 = get("cert.c0", number, 0.8)
    if not 1 / math.sqrt(2) < c0 < 1:
        raise ConfigError("c0 must lie in (1/√2,1)", path, entries.get("cert.c0", ("", None))[1], "cert.c0")
    eta = get("cert.eta", number, DEFAULT_ETA)
    if not eta > 0:
        raise ConfigError("eta must be positive", path, entries["cert.eta"][1], "cert.eta")

    s_grid = tuple(get("verify.s_grid", lambda v: _numbers(v, "verify.s_grid"), DEFAULT_S_GRID))
    if not all(s > 0 for s in s_grid):
        raise ConfigError("s values must be positive", path, entries["verify.s_grid"][1], "verify.s_grid")
    level = get("verify.level", integer, 3)
    if not 0 <= level <= 6:
        raise ConfigError("verify.level must lie in 0..6", path, entries["verify.level"][1], "verify.level")
    factors = tuple(get("verify.final_factors", lambda v: _numbers(v, "verify.final_factors"), (1.0, 2.0)))
    if not all(f >= 1 for f in factors):
        raise ConfigError("final-form factors must be >= 1 (the bound holds for s >= s_*)", path, key="verify.final_factors")

    size = get("ensemble.size", integer, 20)
    n_prof = get("ensemble.profiles", integer, 10)
    if size < 0 or n_prof < 0:
        raise ConfigError("ensemble sizes must be >= 0", path, key="ensemble.size")
    seed = get("ensemble.seed", integer, 0)
    profiles = []
    for value, no, key in _indexed(entries, "ensemble.profile", path):
        try:
            p = parse_test_function(value, dim)
        except (DescriptorError, TransportError) as exc:
            raise ConfigError(str(exc), path, no, key) from None
        if p.time_dependent:
            raise ConfigError("initial profiles must not depend on t", path, no, key)
        profiles.append(p)

    return Scenario(
        name=entries["name"][0], domain=domain, field=fld, mode=mode, c0=c0, eta=eta, s_grid=s_grid,
        level=level, final_factors=factors, ensemble_size=size, seed=seed, n_profiles=n_prof,
        profiles=tuple(profiles), output_dir=entries.get("output.dir", ("",))[0], source=path,
        raw={k: v for k, (v, _) in entries.items()},
    )


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", str(p)) from None
    return scenario_from_text(text, str(p))
