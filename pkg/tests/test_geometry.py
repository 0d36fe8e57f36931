import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transobs.geometry import GeometryError, Location, SpatialDomain


def test_contains_interval(interval):
    assert interval.contains(0.0) is Location.INTERIOR
    assert interval.contains(1.0) is Location.BOUNDARY
    assert interval.contains(-1.0) is Location.BOUNDARY
    assert interval.contains(1.5) is Location.EXTERIOR


def test_contains_disc(disc):
    assert disc.contains((3.0, 0.0)) is Location.EXTERIOR
    assert disc.contains((0.0, 1.0)) is Location.BOUNDARY
    assert disc.contains((0.2, -0.3)) is Location.INTERIOR


def test_normals(interval, disc):
    assert interval.outward_normal(1.0).tolist() == [1.0]
    assert interval.outward_normal(-1.0).tolist() == [-1.0]
    assert np.allclose(disc.outward_normal((0.0, 1.0)), (0.0, 1.0))
    with pytest.raises(GeometryError):
        disc.outward_normal((0.0, 0.5))


def test_box_corner_normal():
    box = SpatialDomain.box((-1.0, -1.0), (1.0, 2.0))
    assert np.allclose(box.outward_normal((1.0, 2.0)), np.array([1.0, 1.0]) / math.sqrt(2))
    assert not box.smooth_boundary
    assert SpatialDomain.interval(-1, 1).smooth_boundary


def test_diameter_and_distance(interval, disc):
    assert interval.diameter() == 2.0
    assert interval.exterior_distance(-19.0) == pytest.approx(18.0, rel=1e-15)
    assert disc.exterior_distance((-19.0, 0.0)) == pytest.approx(18.0, rel=1e-15)
    with pytest.raises(GeometryError):
        interval.exterior_distance(0.5)


def test_radius_extrema_examples(interval, disc):
    assert interval.radius_extrema(-19.0) == pytest.approx((324.0, 400.0), rel=1e-15)
    assert interval.radius_extrema(-18.9) == pytest.approx((320.41, 396.01), rel=1e-14)
    assert disc.radius_extrema((0.0, 19.0)) == pytest.approx((324.0, 400.0), rel=1e-15)


def test_crossing_examples(interval, disc):
    hits = interval.boundary_crossing(lambda s: s**2 / 2 - 0.5, (0.0, 3.0))
    assert len(hits) == 1
    s, bp = hits[0]
    assert s == pytest.approx(math.sqrt(3.0), abs=1e-9)
    assert bp.x.tolist() == [1.0] and bp.normal.tolist() == [1.0]
    assert interval.boundary_crossing(lambda s: np.zeros_like(s), (0.0, 3.0)) == []
    hits = disc.boundary_crossing(lambda s: np.stack([s, 0 * s], axis=-1), (0.0, 2.0))
    assert len(hits) == 1
    assert hits[0][0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(hits[0][1].x, (1.0, 0.0))


def test_crossings_are_ordered(interval):
    # 2 sin(s) leaves and re-enters (-1, 1) wherever sin(s) = +-1/2
    hits = interval.boundary_crossing(lambda s: 2 * np.sin(s), (0.0, 2 * math.pi))
    params = [s for s, _ in hits]
    assert params == sorted(params)
    expected = [math.pi / 6, 5 * math.pi / 6, 7 * math.pi / 6, 11 * math.pi / 6]
    assert np.allclose(params, expected, atol=1e-9)


@pytest.mark.parametrize("kind,dim,params", [
    ("interval", 1, (0.0, 1.0)),  # origin on the boundary
    ("interval", 1, (1.0, 2.0)),
    ("ball", 2, (0.0, 0.0, -1.0)),
    ("box", 2, (-1.0, 1.0)),
    ("torus", 2, (0.0, 1.0)),
])
def test_invalid_domains(kind, dim, params):
    with pytest.raises(GeometryError):
        SpatialDomain(kind, dim, params)


domains = st.one_of(
    st.tuples(st.floats(-5, -0.1), st.floats(0.1, 5)).map(lambda p: SpatialDomain.interval(*p)),
    st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(1.0, 3.0)).map(
        lambda p: SpatialDomain.ball(p[:2], p[2])),
    st.tuples(st.floats(-3, -0.1), st.floats(-3, -0.1), st.floats(0.1, 3), st.floats(0.1, 3)).map(
        lambda p: SpatialDomain.box(p[:2], p[2:])),
)


@given(domains)
def test_origin_is_interior(dom):
    assert dom.contains(np.zeros(dom.dim)) is Location.INTERIOR


@settings(max_examples=40, deadline=None)
@given(domains, st.floats(0, 2 * math.pi), st.floats(0.5, 30.0))
def test_radius_extrema_brute_force(dom, angle, gap):
    direction = np.array([math.cos(angle), math.sin(angle)])[: dom.dim]
    direction /= np.linalg.norm(direction)
    x0 = dom.center + (dom.diameter() + gap) * direction
    d_m, d_M = dom.radius_extrema(x0)
    pts = dom.sample_closure(4000)
    r2 = np.sum((pts - x0) ** 2, axis=-1)
    assert d_m <= r2.min() * (1 + 1e-12)
    assert d_M >= r2.max() * (1 - 1e-12)
    # the cloud gets close to both extrema
    assert r2.min() - d_m <= 0.1 * math.sqrt(d_m) * dom.diameter()
    assert d_M - r2.max() <= 0.1 * math.sqrt(d_M) * dom.diameter()
    assert dom.exterior_distance(x0) ** 2 == pytest.approx(d_m, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(domains, st.integers(0, 10_000))
def test_boundary_samples_lie_on_boundary(dom, k):
    pts = dom.sample_boundary(400)
    p = pts[k % len(pts)]
    assert dom.contains(p) is Location.BOUNDARY
    n = dom.outward_normal(p)
    assert np.linalg.norm(n) == pytest.approx(1.0)
    # stepping along the normal leaves the closed domain
    assert dom.contains(p + 1e-6 * n) is Location.EXTERIOR
