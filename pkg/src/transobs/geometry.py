"""Spatial domains and the geometric queries used by certificates and characteristics.

Three kinds are supported: ``interval`` (d=1), ``box`` (axis-aligned, any d) and
``ball`` (any d for the closed-form queries; samplers and quadrature are d=2).
Every domain must contain the origin in its interior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

BOUNDARY_TOL = 1e-12
BISECTION_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid domain description or a query outside an operation's contract."""


class Location(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    x: np.ndarray
    normal: np.ndarray
    weight: float = 0.0


def _as_point(x, dim: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (dim,):
        raise GeometryError(f"point has shape {p.shape}, expected ({dim},)")
    return p


@dataclass(frozen=True, eq=False)
class SpatialDomain:
    """Bounded domain with closed-form boundary geometry.

    ``params`` holds ``(lo, hi)`` for intervals, ``lo_1..lo_d, hi_1..hi_d`` for
    boxes and ``c_1..c_d, r`` for balls.
    """

    kind: str
    dim: int
    params: tuple[float, ...]
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kind, d, p = self.kind, self.dim, tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise GeometryError(f"dimension must be a positive integer, got {d!r}")
        if kind == "interval":
            if d != 1 or len(p) != 2:
                raise GeometryError("interval needs dim=1 and params 'lo,hi'")
            lo, hi = np.array([p[0]]), np.array([p[1]])
        elif kind == "box":
            if len(p) != 2 * d:
                raise GeometryError(f"box in d={d} needs {2 * d} params (lows then highs)")
            lo, hi = np.array(p[:d]), np.array(p[d:])
        elif kind == "ball":
            if len(p) != d + 1:
                raise GeometryError(f"ball in d={d} needs {d + 1} params (center then radius)")
            if not p[-1] > 0:
                raise GeometryError("ball radius must be positive")
            c = np.array(p[:d])
            lo, hi = c - p[-1], c + p[-1]
        else:
            raise GeometryError(f"unknown domain kind {kind!r} (expected interval, box or ball)")
        if not np.all(np.isfinite(p)):
            raise GeometryError("domain parameters must be finite")
        if np.any(hi <= lo):
            raise GeometryError("domain bounds must be strictly ordered on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.contains(np.zeros(d)) is not Location.INTERIOR:
            raise GeometryError("the origin must lie in the open interior of the domain")

    @classmethod
    def interval(cls, lo: float, hi: float) -> SpatialDomain:
        return cls("interval", 1, (lo, hi))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> SpatialDomain:
        return cls("box", len(lo), tuple(lo) + tuple(hi))

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> SpatialDomain:
        return cls("ball", len(center), tuple(center) + (radius,))

    @property
    def center(self) -> np.ndarray:
        if self.kind == "ball":
            return np.array(self.params[:-1])
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> float:
        if self.kind != "ball":
            raise GeometryError("radius is only defined for balls")
        return self.params[-1]

    @property
    def smooth_boundary(self) -> bool:
        """False for boxes in d>=2, whose corners fall outside the smooth-boundary setting."""
        return not (self.kind == "box" and self.dim > 1)

    # -- level function: negative inside, zero on the boundary, positive outside

    def level(self, x) -> np.ndarray:
        """Signed level function of the boundary for points of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise GeometryError(f"points have trailing dimension {x.shape[-1]}, expected {self.dim}")
        if self.kind == "ball":
            return np.linalg.norm(x - self.center, axis=-1) - self.radius
        return np.max(np.maximum(self.lo - x, x - self.hi), axis=-1)

    def contains(self, x) -> Location:
        lv = float(self.level(_as_point(x, self.dim)))
        if lv < -BOUNDARY_TOL:
            return Location.INTERIOR
        if lv <= BOUNDARY_TOL:
            return Location.BOUNDARY
        return Location.EXTERIOR

    def outward_normal(self, x) -> np.ndarray:
        p = _as_point(x, self.dim)
        if self.contains(p) is not Location.BOUNDARY:
            raise GeometryError(f"point {p.tolist()} is not on the boundary")
        if self.kind == "ball":
            v = p - self.center
            return v / np.linalg.norm(v)
        n = np.zeros(self.dim)
        n[np.abs(p - self.hi) <= BOUNDARY_TOL] += 1.0
        n[np.abs(p - self.lo) <= BOUNDARY_TOL] -= 1.0
        # corners get the normalized sum of the active face normals
        return n / np.linalg.norm(n)

    def project_to_boundary(self, x) -> np.ndarray:
        """Nearest boundary point for points within a small distance of the boundary."""
        p = _as_point(x, self.dim).copy()
        if self.kind == "ball":
            v = p - self.center
            return self.center + self.radius * v / np.linalg.norm(v)
        gaps = np.concatenate([np.abs(p - self.lo), np.abs(p - self.hi)])
        k = int(np.argmin(gaps))
        axis = k % self.dim
        p = np.clip(p, self.lo, self.hi)
        p[axis] = self.lo[axis] if k < self.dim else self.hi[axis]
        return p

    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        return float(np.linalg.norm(self.hi - self.lo))

    def _require_exterior(self, x0) -> np.ndarray:
        p = _as_point(x0, self.dim)
        if self.contains(p) is not Location.EXTERIOR:
            raise GeometryError(f"point {p.tolist()} is not exterior to the domain")
        return p

    def exterior_distance(self, x0) -> float:
        p = self._require_exterior(x0)
        if self.kind == "ball":
            return float(np.linalg.norm(p - self.center) - self.radius)
        gap = np.maximum(np.maximum(self.lo - p, p - self.hi), 0.0)
        return float(np.linalg.norm(gap))

    def radius_extrema(self, x0) -> tuple[float, float]:
        """Exact (min, max) of |x - x0|^2 over the closed domain."""
        p = self._require_exterior(x0)
        dmin = self.exterior_distance(p)
        if self.kind == "ball":
            dmax = float(np.linalg.norm(p - self.center) + self.radius)
            return dmin**2, dmax**2
        far = np.maximum(np.abs(p - self.lo), np.abs(p - self.hi))
        return dmin**2, float(np.sum(far**2))

    # -- samplers of the closure (used by grid minimizations, not by quadrature)

    def sample_closure(self, n: int = 1000) -> np.ndarray:
        """Deterministic point cloud of at least ``n`` points covering the closed domain."""
        if self.kind == "interval":
            return np.linspace(self.lo[0], self.hi[0], max(n, 2))[:, None]
        if self.kind == "box":
            m = max(2, int(np.ceil(n ** (1.0 / self.dim))))
            axes = [np.linspace(a, b, m) for a, b in zip(self.lo, self.hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            return np.stack([g.ravel() for g in mesh], axis=-1)
        if self.dim != 2:
            raise NotImplementedError("ball sampling is implemented for d=2")
        nr = max(2, int(np.ceil(np.sqrt(n / 2.0))))
        nth = 2 * nr
        r = np.linspace(0.0, self.radius, nr)[1:]
        th = np.linspace(0.0, 2 * np.pi, nth, endpoint=False)
        R, TH = np.meshgrid(r, th, indexing="ij")
        pts = np.stack([R.ravel() * np.cos(TH.ravel()), R.ravel() * np.sin(TH.ravel())], axis=-1)
        return np.vstack([self.center[None, :], pts + self.center])

    def sample_boundary(self, n: int = 10_000) -> np.ndarray:
        """Deterministic boundary samples (about ``n`` of them)."""
        if self.kind == "interval":
            return np.array([[self.lo[0]], [self.hi[0]]])
        if self.kind == "ball":
            if self.dim != 2:
                raise NotImplementedError("ball sampling is implemented for d=2")
            th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        faces = []
        per_face = max(2, int(np.ceil((n / (2 * self.dim)) ** (1.0 / max(self.dim - 1, 1)))))
        for axis in range(self.dim):
            others = [np.linspace(a, b, per_face) for i, (a, b) in enumerate(zip(self.lo, self.hi)) if i != axis]
            mesh = np.meshgrid(*others, indexing="ij") if others else []
            base = np.stack([g.ravel() for g in mesh], axis=-1) if others else np.zeros((1, 0))
            for val in (self.lo[axis], self.hi[axis]):
                pts = np.insert(base, axis, val, axis=1)
                faces.append(pts)
        return np.vstack(faces)

    # -- crossings

    def boundary_crossing(
        self,
        path: Callable[[np.ndarray], np.ndarray],
        window: tuple[float, float],
        samples: int = 2048,
    ) -> list[tuple[float, BoundaryPoint]]:
        """All parameters in ``window`` where ``path`` crosses the boundary, ascending.

        ``path`` must accept an array of parameters of shape (m,) and return points
        of shape (m, d) (a scalar or (m,) result is broadcast for d=1).
        """
        lo, hi = float(window[0]), float(window[1])
        sig = np.linspace(lo, hi, samples + 1)

        def points(s):
            s = np.asarray(s, dtype=float)
            pts = np.asarray(path(s), dtype=float)
            if self.dim == 1 and pts.shape != s.shape + (1,):
                return np.broadcast_to(pts, s.shape).reshape(s.shape + (1,))
            return np.broadcast_to(pts, s.shape + (self.dim,))

        lv = self.level(points(sig))
        inside = lv < 0.0
        idx = np.flatnonzero(inside[:-1] != inside[1:])
        if idx.size == 0:
            return []
        roots = bisect_brackets(lambda s: self.level(points(s)) < 0.0, sig[idx], sig[idx + 1], inside[idx])
        out = []
        for s in roots:
            x = self.project_to_boundary(points(np.array([s]))[0])
            out.append((float(s), BoundaryPoint(x=x, normal=self.outward_normal(x))))
        return out


def bisect_brackets(
    is_inside: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    inside_lo: np.ndarray,
    tol: float = BISECTION_TOL,
) -> np.ndarray:
    """Vectorized bisection of many brackets on a boolean inside/outside predicate.

    ``inside_lo`` is the predicate value at ``lo``; the value at ``hi`` is its negation.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    inside_lo = np.asarray(inside_lo, dtype=bool)
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        same = is_inside(mid) == inside_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)
