"""Exact transport solutions, boundary traces and reconstruction along characteristics.

Test functions are closed forms with analytic gradient and time derivative. All
evaluation methods take ``x`` of shape (N, d) and ``t`` of shape (N,).

Descriptor grammar for profiles (``ensemble.profile.<i>`` in scenario files)::

    expr   := term ('+' term)*
    term   := factor ('*' factor)*
    factor := gauss:a,p_1..p_d[,b,q]   exp(-a|x-p|^2) exp(-b(t-q)^2)
            | mono:c,e_1..e_d,e_t      c x_1^e_1 ... x_d^e_d t^e_t
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._numeric import real
from .carleman.quadrature import QuadratureGrid
from .field import FieldError, VectorField, reflect_extend
from .geometry import BOUNDARY_TOL, SpatialDomain, bisect_brackets

MAX_POLY_DEGREE = 4
CROSSING_SAMPLES = 2048
TRACE_SCHEMA = "transobs boundary-trace v1"


class TransportError(ValueError):
    pass


def _xt(x, t):
    x = np.atleast_2d(real(x))
    t = np.broadcast_to(real(t), (x.shape[0],))
    return x, t


class TestFunction:
    """Base class for closed-form scalar fields w(x, t)."""

    __test__ = False  # not a pytest class
    is_solution = False
    dim: int

    def value(self, x, t) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x, t) -> np.ndarray:
        raise NotImplementedError

    def dt(self, x, t) -> np.ndarray:
        raise NotImplementedError

    @property
    def time_dependent(self) -> bool:
        return True

    def apply_A(self, field: VectorField, x, t) -> np.ndarray:
        """A w = dw/dt + H(t) . grad w."""
        x, t = _xt(x, t)
        return self.dt(x, t) + np.sum(field.H(t) * self.grad(x, t), axis=-1)

    def __add__(self, other: TestFunction) -> TestFunction:
        return Sum((self, other))

    def __mul__(self, other: TestFunction) -> TestFunction:
        return Product((self, other))

    def validate(self, rng: np.random.Generator | None = None, points: int = 4, window=(-1.0, 1.0)) -> None:
        """Check the analytic derivatives against central differences (order-2 decay)."""
        rng = rng or np.random.default_rng(0)
        x = rng.uniform(-1.0, 1.0, size=(points, self.dim))
        t = rng.uniform(window[0], window[1], size=points)
        scale = 1.0 + np.max(np.abs(self.value(x, t)))
        exact = np.column_stack([self.grad(x, t), self.dt(x, t)])
        errs = []
        for h in (1e-3, 1e-4):
            fd = np.empty_like(exact)
            for j in range(self.dim + 1):
                dx = np.zeros((points, self.dim))
                dtt = np.zeros(points)
                if j < self.dim:
                    dx[:, j] = h
                else:
                    dtt[:] = h
                fd[:, j] = (self.value(x + dx, t + dtt) - self.value(x - dx, t - dtt)) / (2 * h)
            errs.append(np.max(np.abs(fd - exact)))
        coarse, fine = errs
        # order 2: a 10x smaller step must shrink the error ~100x, up to roundoff
        if fine > max(0.05 * coarse, 1e-8 * scale) or coarse > 1e-3 * scale + 1e-3 * np.max(np.abs(exact)):
            raise TransportError(f"derivative check failed for {self!r}: errors {coarse:.3e}, {fine:.3e}")


@dataclass(frozen=True, eq=False)
class Gaussian(TestFunction):
    a: float
    center: tuple[float, ...]
    b: float = 0.0
    q: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def time_dependent(self) -> bool:
        return self.b != 0.0

    def value(self, x, t):
        x, t = _xt(x, t)
        r2 = np.sum((x - np.asarray(self.center)) ** 2, axis=-1)
        return np.exp(-self.a * r2 - self.b * (t - self.q) ** 2)

    def grad(self, x, t):
        x, t = _xt(x, t)
        return -2.0 * self.a * (x - np.asarray(self.center)) * self.value(x, t)[:, None]

    def dt(self, x, t):
        x, t = _xt(x, t)
        return -2.0 * self.b * (t - self.q) * self.value(x, t)


@dataclass(frozen=True, eq=False)
class Polynomial(TestFunction):
    """Sum of monomials c * x^e * t^k, stored as (c, e, k) triples."""

    terms: tuple[tuple[float, tuple[int, ...], int], ...]

    def __post_init__(self):
        if not self.terms:
            raise TransportError("polynomial needs at least one term")
        dims = {len(e) for _, e, _ in self.terms}
        if len(dims) != 1:
            raise TransportError("inconsistent monomial dimensions")
        for _, e, k in self.terms:
            if min(e + (k,)) < 0 or sum(e) + k > MAX_POLY_DEGREE:
                raise TransportError(f"monomial exponents must be >= 0 with total degree <= {MAX_POLY_DEGREE}")

    @property
    def dim(self) -> int:
        return len(self.terms[0][1])

    @property
    def time_dependent(self) -> bool:
        return any(k and c for c, _, k in self.terms)

    @staticmethod
    def _pow(base, e):
        return np.ones_like(base) if e == 0 else base**e

    def _eval(self, x, t, dvar=None):
        out = np.zeros(x.shape[0])
        for c, e, k in self.terms:
            fac = np.full(x.shape[0], float(c))
            for i, ei in enumerate(e):
                if dvar == i:
                    fac = fac * (ei * self._pow(x[:, i], ei - 1) if ei else 0.0)
                else:
                    fac = fac * self._pow(x[:, i], ei)
            if dvar == "t":
                fac = fac * (k * self._pow(t, k - 1) if k else 0.0)
            else:
                fac = fac * self._pow(t, k)
            out = out + fac
        return out

    def value(self, x, t):
        return self._eval(*_xt(x, t))

    def grad(self, x, t):
        x, t = _xt(x, t)
        return np.stack([self._eval(x, t, i) for i in range(self.dim)], axis=-1)

    def dt(self, x, t):
        return self._eval(*_xt(x, t), "t")


def constant(c: float, dim: int) -> Polynomial:
    return Polynomial(((float(c), (0,) * dim, 0),))


@dataclass(frozen=True, eq=False)
class Sum(TestFunction):
    parts: tuple[TestFunction, ...]

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    @property
    def time_dependent(self) -> bool:
        return any(p.time_dependent for p in self.parts)

    def value(self, x, t):
        return sum(p.value(x, t) for p in self.parts)

    def grad(self, x, t):
        return sum(p.grad(x, t) for p in self.parts)

    def dt(self, x, t):
        return sum(p.dt(x, t) for p in self.parts)


@dataclass(frozen=True, eq=False)
class Product(TestFunction):
    parts: tuple[TestFunction, ...]

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    @property
    def time_dependent(self) -> bool:
        return any(p.time_dependent for p in self.parts)

    def value(self, x, t):
        out = 1.0
        for p in self.parts:
            out = out * p.value(x, t)
        return out

    def _deriv(self, x, t, which):
        vals = [p.value(x, t) for p in self.parts]
        total = 0.0
        for i, p in enumerate(self.parts):
            d = which(p)
            others = np.prod([v for j, v in enumerate(vals) if j != i], axis=0) if len(vals) > 1 else 1.0
            total = total + (d * others[:, None] if d.ndim == 2 else d * others)
        return total

    def grad(self, x, t):
        x, t = _xt(x, t)
        return self._deriv(x, t, lambda p: p.grad(x, t))

    def dt(self, x, t):
        x, t = _xt(x, t)
        return self._deriv(x, t, lambda p: p.dt(x, t))


@dataclass(frozen=True, eq=False)
class Solution(TestFunction):
    """u(x, t) = u0(x - X(t)), an exact solution of A u = 0."""

    profile: TestFunction
    field: VectorField
    is_solution = True

    def __post_init__(self):
        if self.profile.time_dependent:
            raise TransportError("initial profiles must not depend on t")
        if self.profile.dim != self.field.dim:
            raise TransportError("profile and field dimensions differ")

    @property
    def dim(self) -> int:
        return self.profile.dim

    def _shift(self, x, t):
        x, t = _xt(x, t)
        return x - self.field.flow(t), np.zeros_like(t)

    def value(self, x, t):
        return self.profile.value(*self._shift(x, t))

    def grad(self, x, t):
        return self.profile.grad(*self._shift(x, t))

    def dt(self, x, t):
        x, t = _xt(x, t)
        return -np.sum(self.field.H(t) * self.grad(x, t), axis=-1)


# -- descriptor parsing for profiles

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_FACTOR_RE = re.compile(rf"\s*(gauss|mono)\s*:\s*({_NUM}(?:\s*,\s*{_NUM})*)\s*")


def parse_test_function(text: str, dim: int) -> TestFunction:
    """Parse a profile/test-function descriptor (grammar in the module docstring)."""
    from .field import DescriptorError

    pos, n = 0, len(text)
    sums = []
    while True:
        prods = []
        while True:
            m = _FACTOR_RE.match(text, pos)
            if not m:
                raise DescriptorError("expected 'gauss:...' or 'mono:...'", text, pos)
            nums = [float(s) for s in m.group(2).split(",")]
            if m.group(1) == "gauss":
                if len(nums) not in (1 + dim, 3 + dim):
                    raise DescriptorError(f"gauss takes {1 + dim} or {3 + dim} numbers in d={dim}", text, m.start(1))
                b, q = (nums[1 + dim], nums[2 + dim]) if len(nums) == 3 + dim else (0.0, 0.0)
                prods.append(Gaussian(nums[0], tuple(nums[1 : 1 + dim]), b, q))
            else:
                if len(nums) != dim + 2 or any(v != int(v) for v in nums[1:]):
                    raise DescriptorError(f"mono takes a coefficient and {dim + 1} integer exponents", text, m.start(1))
                try:
                    prods.append(Polynomial(((nums[0], tuple(int(v) for v in nums[1 : 1 + dim]), int(nums[-1])),)))
                except TransportError as exc:
                    raise DescriptorError(str(exc), text, m.start(1)) from exc
            pos = m.end()
            if pos < n and text[pos] == "*":
                pos += 1
                continue
            break
        sums.append(prods[0] if len(prods) == 1 else Product(tuple(prods)))
        if pos == n:
            break
        if text[pos] != "+":
            raise DescriptorError("expected '+', '*' or end of descriptor", text, pos)
        pos += 1
    fn = sums[0] if len(sums) == 1 else Sum(tuple(sums))
    fn.validate()
    return fn


# -- random registry ensembles


def _uniform_interior(rng: np.random.Generator, domain: SpatialDomain, shrink: float = 0.8) -> np.ndarray:
    c = domain.center
    while True:
        p = c + shrink * rng.uniform(domain.lo - c, domain.hi - c)
        if domain.level(p) < -1e-3:
            return p


def random_profiles(rng: np.random.Generator, n: int, domain: SpatialDomain) -> list[TestFunction]:
    """Gaussian initial profiles exp(-a|x-p|^2) with centers inside the domain."""
    out = []
    for _ in range(n):
        a = float(rng.uniform(1.0, 4.0))
        out.append(Gaussian(a, tuple(_uniform_interior(rng, domain).tolist())))
    return out


def random_polynomial(rng: np.random.Generator, dim: int, degree: int = MAX_POLY_DEGREE, with_time: bool = True, scale=(1.0, 1.0)) -> Polynomial:
    exps = []

    def rec(prefix, left):
        if len(prefix) == dim:
            for k in range(left + 1 if with_time else 1):
                exps.append((tuple(prefix), k))
            return
        for e in range(left + 1):
            rec(prefix + [e], left - e)

    rec([], degree)
    sx, st = scale
    terms = tuple(
        (float(rng.uniform(-1.0, 1.0)) / (sx ** sum(e) * st**k), e, k) for e, k in exps if rng.random() < 0.6 or not any(e) and not k
    )
    return Polynomial(terms)


def random_test_functions(
    rng: np.random.Generator,
    n: int,
    domain: SpatialDomain,
    field: VectorField,
    window: tuple[float, float],
) -> list[TestFunction]:
    """Deterministic mix of exact solutions and free (A w != 0) registry functions."""
    span = window[1] - window[0]
    mid = 0.5 * (window[0] + window[1])
    out: list[TestFunction] = []
    sx = max(domain.hi - domain.lo) / 2
    for i in range(n):
        kind = i % 4
        if kind == 0:
            fn: TestFunction = Solution(random_profiles(rng, 1, domain)[0], field)
        elif kind == 1:
            b = float(rng.uniform(0.5, 2.0)) / (0.5 * span) ** 2
            q = float(rng.uniform(window[0], window[1]))
            fn = Gaussian(float(rng.uniform(0.5, 3.0)), tuple(_uniform_interior(rng, domain).tolist()), b, q)
        elif kind == 2:
            fn = random_polynomial(rng, domain.dim, scale=(sx, max(abs(window[0]), abs(window[1]))))
        else:
            bump = Gaussian(float(rng.uniform(0.5, 2.0)), tuple(_uniform_interior(rng, domain).tolist()),
                            float(rng.uniform(0.2, 1.0)) / (0.5 * span) ** 2, mid)
            poly = random_polynomial(rng, domain.dim, degree=2, scale=(sx, 0.5 * span))
            fn = Sum((Product((bump, poly)), Solution(random_profiles(rng, 1, domain)[0], field)))
        fn.validate(rng, window=window)
        out.append(fn)
    return out


# -- solutions, reflection and traces


def evaluate_solution(u0: TestFunction, field: VectorField, x, t):
    """u(x, t) = u0(x - X(t))."""
    x = np.asarray(x, dtype=float)
    single = np.ndim(t) == 0 and x.size == field.dim
    xx = x.reshape(-1, field.dim)
    vals = Solution(u0, field).value(xx, np.broadcast_to(np.asarray(t, dtype=float), (xx.shape[0],)))
    return float(vals[0]) if single else vals


def extend_even(u: Solution, field: VectorField | None = None) -> Solution:
    """Even-in-time extension to [-T, T], transported by the reflected field."""
    if not isinstance(u, Solution):
        raise TransportError("only exact solutions can be extended")
    base = field if field is not None else u.field
    try:
        return Solution(u.profile, reflect_extend(base))
    except FieldError as exc:
        raise TransportError(f"field not degenerate-admissible: {exc}") from exc


@dataclass(eq=False)
class BoundaryTrace:
    """Samples g on a Sigma grid, with the generating closed form when available."""

    domain: SpatialDomain
    x: np.ndarray
    t: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    window: tuple[float, float]
    source: str = ""
    closed_form: Callable | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise TransportError("trace values must be finite")
        if not (self.x.shape[0] == self.t.size == self.weights.size == self.values.size):
            raise TransportError("trace arrays have inconsistent lengths")

    def norm(self) -> float:
        return math.sqrt(math.fsum((self.weights * self.values**2).tolist()))

    def at(self, x, t) -> np.ndarray:
        """g at boundary points ``x`` (N, d) and times ``t`` (N,)."""
        x, t = _xt(x, t)
        if self.closed_form is not None:
            return self.closed_form(x, t)
        return self._interpolate(x, t)

    def _interpolate(self, x, t):
        nodes, inv = np.unique(self.x, axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        nearest = np.argmin(np.linalg.norm(x[:, None, :] - nodes[None, :, :], axis=-1), axis=1)
        out = np.empty(x.shape[0])
        for k in np.unique(nearest):
            sel = inv == k
            order = np.argsort(self.t[sel])
            ts, vs = self.t[sel][order], self.values[sel][order]
            q = nearest == k
            out[q] = np.interp(t[q], ts, vs)
        return out

    def extend_even(self) -> BoundaryTrace:
        """Mirror the samples to negative times: g(x, -t) = g(x, t)."""
        cf = self.closed_form
        return BoundaryTrace(
            self.domain, np.vstack([self.x, self.x]), np.concatenate([-self.t, self.t]),
            np.concatenate([self.weights, self.weights]), np.concatenate([self.values, self.values]),
            (-self.window[1], self.window[1]), self.source + " (even extension)",
            None if cf is None else (lambda x, t: cf(x, np.abs(t))),
        )

    def to_csv(self, path) -> None:
        d = self.domain.dim
        with open(path, "w", newline="") as fh:
            fh.write(f"# {TRACE_SCHEMA}; domain={self.domain.kind}; window={self.window[0]!r},{self.window[1]!r}; source={self.source}\n")
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(d)] + ["t", "value", "weight"])
            for xi, ti, vi, wi in zip(self.x, self.t, self.values, self.weights):
                w.writerow([f"{v:.17g}" for v in xi] + [f"{ti:.17g}", f"{vi:.17g}", f"{wi:.17g}"])

    @classmethod
    def from_csv(cls, path, domain: SpatialDomain) -> BoundaryTrace:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("# " + TRACE_SCHEMA):
                raise TransportError(f"{path}: missing '{TRACE_SCHEMA}' header")
            meta = dict(part.strip().split("=", 1) for part in first[2:].split(";")[1:] if "=" in part)
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = domain.dim
        if header != [f"x{i}" for i in range(d)] + ["t", "value", "weight"]:
            raise TransportError(f"{path}: unexpected columns {header}")
        arr = np.array([[float(v) for v in r] for r in body]).reshape(-1, d + 3)
        lo, hi = (float(v) for v in meta["window"].split(","))
        trace = cls(domain, arr[:, :d], arr[:, d], arr[:, d + 2], arr[:, d + 1], (lo, hi), meta.get("source", ""))
        _require_on_boundary(domain, trace.x)
        return trace


def _require_on_boundary(domain: SpatialDomain, x: np.ndarray) -> None:
    lv = np.abs(domain.level(x))
    if np.any(lv > 1e3 * BOUNDARY_TOL):
        i = int(np.argmax(lv))
        raise TransportError(f"trace node {x[i].tolist()} is off the boundary")


def boundary_trace(u0: TestFunction, field: VectorField, grid: QuadratureGrid, domain: SpatialDomain, source: str = "") -> BoundaryTrace:
    """Trace g(x, t) = u0(x - X(t)) on a Sigma grid."""
    _require_on_boundary(domain, grid.x)
    sol = Solution(u0, field)
    lo, hi = float(grid.t.min()), float(grid.t.max())
    window = field.window if field.window[0] <= lo and hi <= field.window[1] else (lo, hi)
    return BoundaryTrace(domain, grid.x, grid.t, grid.w, sol.value(grid.x, grid.t), window, source or repr(u0), sol.value)


def trace_compatibility(trace: BoundaryTrace, u0: TestFunction, field: VectorField) -> float:
    """Largest mismatch between the earliest trace samples and the transported profile there."""
    early = trace.t <= trace.t.min() + 1e-12
    expect = Solution(u0, field).value(trace.x[early], trace.t[early])
    return float(np.max(np.abs(trace.values[early] - expect)))


# -- characteristics


def _crossings(domain: SpatialDomain, field: VectorField, x, t, window, samples=CROSSING_SAMPLES, chunk=256):
    """For each node, the boundary crossing of xi(s) = x + X(s) - X(t) nearest to s = t (NaN if none)."""
    x, t = _xt(x, t)
    sig = np.linspace(window[0], window[1], samples + 1)
    Xs = field.flow(sig)
    Xt = field.flow(t)
    out = np.full(t.size, np.nan)
    for start in range(0, t.size, chunk):
        sl = slice(start, start + chunk)
        base = x[sl] - Xt[sl]  # xi(s) = base + X(s)
        inside = domain.level(base[:, None, :] + Xs[None, :, :]) < 0.0
        change = inside[:, :-1] != inside[:, 1:]
        has = change.any(axis=1)
        if not has.any():
            continue
        mids = 0.5 * (sig[:-1] + sig[1:])
        dist = np.where(change, np.abs(mids[None, :] - t[sl, None]), np.inf)
        k = np.argmin(dist, axis=1)
        rows = np.flatnonzero(has)
        kk = k[rows]
        b = base[rows]
        roots = bisect_brackets(
            lambda s: domain.level(b + field.flow(s)) < 0.0,
            sig[kk], sig[kk + 1], inside[rows, kk],
        )
        out[start + rows] = roots
    return out


def reconstruct_many(trace: BoundaryTrace, field: VectorField, x, t, samples=CROSSING_SAMPLES):
    """Values at interior nodes recovered from boundary data; NaN marks uncovered nodes."""
    x, t = _xt(x, t)
    sig = _crossings(trace.domain, field, x, t, trace.window, samples)
    covered = np.isfinite(sig)
    vals = np.full(t.size, np.nan)
    if covered.any():
        xi = x[covered] - field.flow(t[covered]) + field.flow(sig[covered])
        pts = np.array([trace.domain.project_to_boundary(p) for p in xi])
        vals[covered] = trace.at(pts, sig[covered])
    return vals, covered


def reconstruct_from_trace(trace: BoundaryTrace, field: VectorField, x, t: float):
    """Interior value u(x, t) read off the boundary along the characteristic, or None if uncovered."""
    vals, covered = reconstruct_many(trace, field, np.atleast_1d(np.asarray(x, dtype=float))[None, :], np.array([t]))
    return float(vals[0]) if covered[0] else None


def coverage_grid(domain: SpatialDomain, n_space: int, n_time: int, T: float):
    """Cell-centred interior space-time nodes: about n_space per axis times n_time."""
    axes = [lo + (np.arange(n_space) + 0.5) * (hi - lo) / n_space for lo, hi in zip(domain.lo, domain.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    pts = pts[domain.level(pts) < -BOUNDARY_TOL]
    ts = (np.arange(n_time) + 0.5) * T / n_time
    return np.repeat(pts, n_time, axis=0), np.tile(ts, pts.shape[0])


def coverage_fraction(field: VectorField, domain: SpatialDomain, x, t, window=None) -> float:
    """Fraction of nodes whose characteristic meets the lateral boundary inside the window."""
    x, t = _xt(x, t)
    if t.size == 0:
        return 0.0
    sig = _crossings(domain, field, x, t, window or (0.0, field.T))
    return float(np.count_nonzero(np.isfinite(sig))) / t.size
