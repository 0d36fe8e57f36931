"""Closed-form time-dependent vector fields H(t), their flows and persistence times.

Each component of H is a sum of registry terms written as a descriptor string::

    poly:c0,c1,...,cn     c0 + c1 t + ... + cn t^n
    sin:a,w               a sin(w t)
    cos:b,w               b cos(w t)

joined with ``+``, e.g. ``"poly:0,1+sin:0.5,3"``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ._numeric import real

SCAN_SAMPLES = 10_000
PERSISTENCE_TOL = 1e-9
COSINE_TOL = 1e-12
ZERO_TOL = 1e-10

DEGENERATE = "degenerate"
NONDEGENERATE = "non-degenerate"
MODES = (DEGENERATE, NONDEGENERATE)


class FieldError(ValueError):
    pass


class DescriptorError(FieldError):
    """Malformed descriptor; ``pos`` is the 0-based character offset of the problem."""

    def __init__(self, message: str, text: str, pos: int):
        self.text, self.pos = text, pos
        super().__init__(f"{message} at position {pos}\n  {text}\n  {' ' * pos}^")


# -- registry terms


@dataclass(frozen=True)
class Poly:
    coeffs: tuple[float, ...]

    def value(self, t):
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def deriv(self, t):
        c = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(t, c) + 0.0 * np.asarray(t)

    def anti(self, t):
        return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyint(self.coeffs))


@dataclass(frozen=True)
class Sin:
    a: float
    w: float

    def value(self, t):
        return self.a * np.sin(self.w * real(t))

    def deriv(self, t):
        return self.a * self.w * np.cos(self.w * real(t))

    def anti(self, t):
        t = real(t)
        if self.w == 0.0:
            return 0.0 * t
        # 1 - cos(wt) = 2 sin^2(wt/2) avoids cancellation near t=0
        return 2.0 * self.a * np.sin(0.5 * self.w * t) ** 2 / self.w


@dataclass(frozen=True)
class Cos:
    b: float
    w: float

    def value(self, t):
        return self.b * np.cos(self.w * real(t))

    def deriv(self, t):
        return -self.b * self.w * np.sin(self.w * real(t))

    def anti(self, t):
        t = real(t)
        if self.w == 0.0:
            return self.b * t
        return self.b * np.sin(self.w * t) / self.w


_ARITY = {"poly": None, "sin": 2, "cos": 2}
_TERM_RE = re.compile(r"\s*([a-z]+)\s*:")
_NUM_RE = re.compile(r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*")


@dataclass(frozen=True)
class Component:
    terms: tuple
    text: str = ""

    def value(self, t):
        return sum((term.value(t) for term in self.terms), start=0.0 * real(t))

    def deriv(self, t):
        return sum((term.deriv(t) for term in self.terms), start=0.0 * real(t))

    def anti(self, t):
        return sum((term.anti(t) for term in self.terms), start=0.0 * real(t))


def parse_component(text: str) -> Component:
    """Parse a component descriptor such as ``"poly:1,1+sin:2,0.5"``."""
    terms = []
    pos = 0
    n = len(text)
    if not text.strip():
        raise DescriptorError("empty descriptor", text, 0)
    while True:
        m = _TERM_RE.match(text, pos)
        if not m:
            raise DescriptorError("expected '<kind>:' (poly, sin or cos)", text, pos)
        kind = m.group(1)
        if kind not in _ARITY:
            raise DescriptorError(f"unknown term kind {kind!r}", text, m.start(1))
        pos = m.end()
        nums = []
        while True:
            nm = _NUM_RE.match(text, pos)
            if not nm or not nm.group(1):
                raise DescriptorError("expected a number", text, pos)
            nums.append(float(nm.group(1)))
            pos = nm.end()
            if pos < n and text[pos] == ",":
                pos += 1
                continue
            break
        arity = _ARITY[kind]
        if arity is not None and len(nums) != arity:
            raise DescriptorError(f"'{kind}' takes {arity} numbers, got {len(nums)}", text, m.start(1))
        terms.append(Poly(tuple(nums)) if kind == "poly" else (Sin if kind == "sin" else Cos)(*nums))
        if pos == n:
            break
        if text[pos] != "+":
            raise DescriptorError("expected '+' or end of descriptor", text, pos)
        pos += 1
    return Component(tuple(terms), text)


# -- fields


@dataclass(frozen=True, eq=False)
class VectorField:
    """H(t) on [0, T] (or its odd reflection on [-T, T] when ``reflected``).

    ``T1`` is the end of the interval on which H' is used; it defaults to T.
    """

    components: tuple[Component, ...]
    T: float
    T1: float | None = None
    reflected: bool = False

    def __post_init__(self):
        if not self.components:
            raise FieldError("a field needs at least one component")
        if not self.T > 0:
            raise FieldError("horizon T must be positive")
        T1 = self.T if self.T1 is None else float(self.T1)
        if not 0 < T1 <= self.T:
            raise FieldError(f"T1 must lie in (0, T], got {T1}")
        object.__setattr__(self, "T1", T1)

    @classmethod
    def from_descriptors(cls, descriptors: Sequence[str], T: float, T1: float | None = None) -> VectorField:
        return cls(tuple(parse_component(s) for s in descriptors), float(T), T1)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def window(self) -> tuple[float, float]:
        return (-self.T if self.reflected else 0.0, self.T)

    def _check(self, t, limit=None):
        t = real(t)
        lo, hi = self.window
        if limit is not None:
            lo, hi = (-limit if self.reflected else 0.0), limit
        slack = 1e-12 * max(1.0, self.T)
        if np.any(t < lo - slack) or np.any(t > hi + slack) or not np.all(np.isfinite(t)):
            raise FieldError(f"time outside the window [{lo}, {hi}]")
        return t

    def _stack(self, fn, t):
        cols = [fn(c, t) for c in self.components]
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    def H(self, t) -> np.ndarray:
        t = self._check(t)
        if not self.reflected:
            return self._stack(Component.value, t)
        sign = np.where(t < 0, -1.0, 1.0)[..., None]
        return sign * self._stack(Component.value, np.abs(t))

    def dH(self, t) -> np.ndarray:
        t = self._check(t, self.T1)
        return self._stack(Component.deriv, np.abs(t) if self.reflected else t)

    def flow(self, t) -> np.ndarray:
        """X(t) = integral of H from 0 to t (even in t for reflected fields)."""
        t = self._check(t)
        return self._stack(Component.anti, np.abs(t) if self.reflected else t)

    def sample(self, t, derivative: bool = True):
        if derivative:
            return self.H(t), self.dH(t)
        return self.H(t), None


def sample(field: VectorField, t, derivative: bool = True):
    return field.sample(t, derivative)


def flow(field: VectorField, t) -> np.ndarray:
    return field.flow(t)


def reflect_extend(field: VectorField) -> VectorField:
    """Odd reflection H(t) = -H(-t) for t < 0; needs H(0) = 0 for continuity."""
    if field.reflected:
        return field
    if np.linalg.norm(field.H(0.0)) > COSINE_TOL:
        raise FieldError("reflection requires H(0) = 0 (degenerate field)")
    return VectorField(field.components, field.T, field.T1, reflected=True)


def _mode_vector(field: VectorField, mode: str):
    if mode == DEGENERATE:
        return field.dH
    if mode == NONDEGENERATE:
        return field.H
    raise FieldError(f"mode must be one of {MODES}, got {mode!r}")


def reference_direction(field: VectorField, mode: str) -> np.ndarray:
    """Unit vector H'(0)/|H'(0)| (degenerate) or H(0)/|H(0)| (non-degenerate)."""
    v = _mode_vector(field, mode)(0.0)
    nv = float(np.linalg.norm(v))
    if nv <= COSINE_TOL:
        what = "H'(0)" if mode == DEGENERATE else "H(0)"
        raise FieldError(f"reference direction undefined: |{what}| = 0")
    return v / nv


@dataclass(frozen=True)
class PersistenceTime:
    t1: float
    attained: bool  # whether the cosine constraint still holds at t1 itself


def persistence(field: VectorField, c0: float, mode: str, samples: int = SCAN_SAMPLES) -> PersistenceTime:
    vec = _mode_vector(field, mode)
    theta0 = reference_direction(field, mode)

    def cosine(t):
        v = vec(t)
        nv = np.linalg.norm(v, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = (v @ theta0) / nv
        return np.where(nv > 0, c, -np.inf)

    def violated(t):
        return cosine(t) - c0 <= COSINE_TOL

    ts = np.linspace(0.0, field.T1, samples + 1)
    bad = np.flatnonzero(violated(ts))
    if bad.size == 0:
        return PersistenceTime(field.T1, True)
    k = int(bad[0])
    if k == 0:
        return PersistenceTime(0.0, False)
    lo, hi = ts[k - 1], ts[k]
    while hi - lo > PERSISTENCE_TOL:
        mid = 0.5 * (lo + hi)
        if violated(mid):
            hi = mid
        else:
            lo = mid
    t1 = 0.5 * (lo + hi)
    return PersistenceTime(t1, bool(cosine(t1) >= c0))


def direction_persistence_time(field: VectorField, c0: float, mode: str = DEGENERATE, samples: int = SCAN_SAMPLES) -> float:
    """Largest tau <= T1 such that the direction of H' (or H) stays within arccos(c0) of its t=0 value."""
    if not 1 / math.sqrt(2) < c0 < 1:
        raise FieldError("c0 must lie in (1/sqrt(2), 1)")
    return persistence(field, c0, mode, samples).t1


def modulus_lower_bound(field: VectorField, mode: str, window: tuple[float, float] | None = None, samples: int = SCAN_SAMPLES) -> float:
    """min |H'| (degenerate) or min |H| (non-degenerate) over ``window``, refined near the grid minimum."""
    vec = _mode_vector(field, mode)
    a, b = (0.0, field.T1) if window is None else (float(window[0]), float(window[1]))
    if a < 0 or b > field.T1 + 1e-12 * field.T or b <= a:
        raise FieldError(f"window must lie inside [0, T1] = [0, {field.T1}]")
    ts = np.linspace(a, b, samples + 1)
    mods = np.linalg.norm(vec(ts), axis=-1)
    k = int(np.argmin(mods))
    best = float(mods[k])
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, samples)]
    res = minimize_scalar(lambda t: float(np.linalg.norm(vec(t))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    best = min(best, float(res.fun))
    if best <= 1e-12:
        what = "|H'|" if mode == DEGENERATE else "|H|"
        raise FieldError(f"positivity assumption fails: min {what} = {best:.3e} on [{a}, {b}]")
    return best


def degenerate_instants(field: VectorField, samples: int = SCAN_SAMPLES) -> list[float]:
    """Times in [0, T] where |H(t)| <= 1e-10 (reporting only)."""
    base = VectorField(field.components, field.T, field.T1)
    ts = np.linspace(0.0, base.T, samples + 1)
    vals = base.H(ts)
    mods = np.linalg.norm(vals, axis=-1)
    scale = max(float(mods.max()), 1.0)
    found: list[float] = []
    for k in range(samples + 1):
        left = mods[k - 1] if k > 0 else np.inf
        right = mods[k + 1] if k < samples else np.inf
        if not (mods[k] <= left and mods[k] <= right and mods[k] < 1e-2 * scale):
            continue
        if mods[k] <= ZERO_TOL:
            found.append(float(ts[k]))
            continue
        # refine on the sign change of the fastest-varying component around the local min
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, samples)]
        flo, fhi = base.H(lo), base.H(hi)
        comps = [i for i in range(base.dim) if flo[i] * fhi[i] <= 0]
        if not comps:
            continue
        i = max(comps, key=lambda j: abs(fhi[j] - flo[j]))
        a, b, fa = lo, hi, flo[i]
        for _ in range(200):
            if b - a <= 1e-15 * max(1.0, abs(b)):
                break
            m = 0.5 * (a + b)
            fm = base.H(m)[i]
            if fm == 0.0:
                a = b = m
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        root = 0.5 * (a + b)
        if np.linalg.norm(base.H(root)) <= ZERO_TOL:
            found.append(float(root))
    out: list[float] = []
    for t in sorted(found):
        if not out or t - out[-1] > 1e-8:
            out.append(t)
    return out
