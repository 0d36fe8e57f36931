"""Tensor Gauss-Legendre grids over Q = Omega x window, Sigma = boundary x window and time slices.

Level ``L`` uses ``8 * 2**L`` nodes per axis panel. A panel layout can be graded
geometrically toward the peak of an exponential weight (see :class:`Grading`);
without grading each axis is one panel, except for explicit split points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .._numeric import EXTENDED
from ..geometry import SpatialDomain


class QuadratureError(ArithmeticError):
    pass


def nodes_per_axis(level: int) -> int:
    if level < 0:
        raise ValueError("refinement level must be >= 0")
    return 8 * 2**level


def _legendre_eval(n: int, x: np.ndarray):
    p0, p1 = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, n * (x * p1 - p0) / (x * x - 1.0)


@lru_cache(maxsize=None)
def _legendre(n: int, extended: bool = False):
    # numpy's eigenvalue nodes lose ~1e-14 for n >= 128; polish by Newton on the recurrence
    x, _ = np.polynomial.legendre.leggauss(n)
    if extended:
        x = x.astype(EXTENDED)
    for _ in range(3):
        p, dp = _legendre_eval(n, x)
        x = x - p / dp
    _, dp = _legendre_eval(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = 0.5 * (x - x[::-1]), 0.5 * (w + w[::-1])
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_rule(a: float, b: float, n: int, extended: bool = False):
    x, w = _legendre(n, extended)
    if extended:
        a, b = EXTENDED(a), EXTENDED(b)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


# (focus, first panel width) pairs; panels double in width moving away from the focus
AxisGrading = tuple[tuple[float, float], ...]


def panel_breaks(a: float, b: float, grading: AxisGrading = (), splits: Sequence[float] = ()) -> np.ndarray:
    pts = {float(a), float(b)}
    pts.update(float(s) for s in splits if a < s < b)
    for focus, width in grading:
        f = min(max(focus, a), b)
        pts.add(f)
        for side in (1.0, -1.0):
            w, pos = width, f
            while True:
                pos += side * w
                if not a < pos < b:
                    break
                pts.add(pos)
                w *= 2.0
    br = np.array(sorted(pts))
    # drop slivers created by overlapping gradings
    keep = np.concatenate([[True], np.diff(br) > 1e-13 * (b - a)])
    br = br[keep]
    br[-1] = b
    return br


def axis_rule(a: float, b: float, n: int, grading: AxisGrading = (), splits: Sequence[float] = (), extended: bool = False):
    br = panel_breaks(a, b, grading, splits)
    xs, ws = zip(*(gauss_rule(lo, hi, n, extended) for lo, hi in zip(br[:-1], br[1:])))
    return np.concatenate(xs), np.concatenate(ws)


@dataclass(frozen=True)
class Grading:
    """Per-axis panel grading. For balls ``axes`` is (radial, angular)."""

    axes: tuple[AxisGrading, ...] = ()
    time: AxisGrading = ()

    def axis(self, i: int) -> AxisGrading:
        return self.axes[i] if i < len(self.axes) else ()


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    x: np.ndarray
    t: np.ndarray
    w: np.ndarray
    kind: str
    level: int
    normal: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.w.size

    def measure(self) -> float:
        return math.fsum(self.w.astype(float).tolist())

    def subset(self, mask: np.ndarray) -> QuadratureGrid:
        return QuadratureGrid(
            self.x[mask], self.t[mask], self.w[mask], self.kind, self.level,
            None if self.normal is None else self.normal[mask],
        )


def _tensor(rules):
    pts = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wts = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    x = np.stack([p.ravel() for p in pts], axis=-1)
    w = np.prod(np.stack([q.ravel() for q in wts], axis=-1), axis=-1)
    return x, w


def _angle_rule(n: int, grading: AxisGrading, extended: bool = False):
    if not grading:
        m = 2 * n
        two_pi = 2 * (EXTENDED(np.pi) + EXTENDED(1.2246467991473532e-16)) if extended else 2 * np.pi
        th = two_pi * np.arange(m) / m
        return th, np.full(m, two_pi / m)
    focus = grading[0][0]
    shifted = tuple((f - focus, wd) for f, wd in grading)
    th, w = axis_rule(-np.pi, np.pi, n, shifted, extended=extended)
    return th + focus, w


def spatial_rule(domain: SpatialDomain, n: int, grading: Grading | None = None, extended: bool = False):
    g = grading or Grading()
    if domain.kind in ("interval", "box"):
        rules = [axis_rule(domain.lo[i], domain.hi[i], n, g.axis(i), extended=extended) for i in range(domain.dim)]
        return _tensor(rules)
    if domain.dim != 2:
        raise NotImplementedError("ball quadrature is implemented for d=2")
    r, wr = axis_rule(0.0, domain.radius, n, g.axis(0), extended=extended)
    th, wth = _angle_rule(n, g.axis(1), extended)
    R, TH = np.meshgrid(r, th, indexing="ij")
    WR, WTH = np.meshgrid(wr * r, wth, indexing="ij")
    x = domain.center + np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], axis=-1)
    return x, (WR * WTH).ravel()


def boundary_rule(domain: SpatialDomain, n: int, grading: Grading | None = None, extended: bool = False):
    """Boundary nodes, outward normals and surface weights."""
    g = grading or Grading()
    d = domain.dim
    dt = EXTENDED if extended else float
    if domain.kind == "interval":
        x = np.array([[domain.lo[0]], [domain.hi[0]]], dtype=dt)
        return x, np.array([[-1.0], [1.0]], dtype=dt), np.ones(2, dtype=dt)
    if domain.kind == "ball":
        if d != 2:
            raise NotImplementedError("ball quadrature is implemented for d=2")
        th, wth = _angle_rule(n, g.axis(1), extended)
        nrm = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return domain.center + domain.radius * nrm, nrm, domain.radius * wth
    xs, ns, ws = [], [], []
    for axis in range(d):
        others = [i for i in range(d) if i != axis]
        if others:
            face_x, face_w = _tensor([axis_rule(domain.lo[i], domain.hi[i], n, g.axis(i), extended=extended) for i in others])
        else:
            face_x, face_w = np.zeros((1, 0), dtype=dt), np.ones(1, dtype=dt)
        for val, sign in ((domain.lo[axis], -1.0), (domain.hi[axis], 1.0)):
            pts = np.insert(face_x, axis, val, axis=1)
            nrm = np.zeros_like(pts)
            nrm[:, axis] = sign
            xs.append(pts)
            ns.append(nrm)
            ws.append(face_w)
    return np.vstack(xs), np.vstack(ns), np.concatenate(ws)


def time_rule(window: tuple[float, float], n: int, grading: AxisGrading = (), splits: Sequence[float] = (), extended: bool = False):
    return axis_rule(window[0], window[1], n, grading, splits, extended)


def _space_time(xs, ws, ts, wt, normals=None):
    m, k = ws.size, wt.size
    x = np.repeat(xs, k, axis=0)
    t = np.tile(ts, m)
    w = np.repeat(ws, k) * np.tile(wt, m)
    nrm = None if normals is None else np.repeat(normals, k, axis=0)
    return x, t, w, nrm


def volume_grid(domain: SpatialDomain, window, level: int, grading: Grading | None = None, splits: Sequence[float] = (), extended: bool = False) -> QuadratureGrid:
    n = nodes_per_axis(level)
    xs, ws = spatial_rule(domain, n, grading, extended)
    ts, wt = time_rule(window, n, (grading or Grading()).time, splits, extended)
    x, t, w, _ = _space_time(xs, ws, ts, wt)
    return QuadratureGrid(x, t, w, "volume", level)


def surface_grid(domain: SpatialDomain, window, level: int, grading: Grading | None = None, splits: Sequence[float] = (), extended: bool = False) -> QuadratureGrid:
    n = nodes_per_axis(level)
    xs, nrm, ws = boundary_rule(domain, n, grading, extended)
    ts, wt = time_rule(window, n, (grading or Grading()).time, splits, extended)
    x, t, w, normals = _space_time(xs, ws, ts, wt, nrm)
    return QuadratureGrid(x, t, w, "surface", level, normals)


def slice_grid(domain: SpatialDomain, t: float, level: int, grading: Grading | None = None, extended: bool = False) -> QuadratureGrid:
    n = nodes_per_axis(level)
    xs, ws = spatial_rule(domain, n, grading, extended)
    return QuadratureGrid(xs, np.full(ws.size, t, dtype=ws.dtype), ws, "slice", level)


def boundary_slice_grid(domain: SpatialDomain, t: float, level: int, grading: Grading | None = None, extended: bool = False) -> QuadratureGrid:
    n = nodes_per_axis(level)
    xs, nrm, ws = boundary_rule(domain, n, grading, extended)
    return QuadratureGrid(xs, np.full(ws.size, t, dtype=ws.dtype), ws, "boundary-slice", level, nrm)
