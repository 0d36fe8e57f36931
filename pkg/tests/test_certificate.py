import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import make_field
from transobs.certificate import (
    AdmissibilityError,
    build_certificate,
    combine_constants,
    diagnostic_weight_parameters,
    select_observation_point,
    verify_angle_bound,
)
from transobs.field import NONDEGENERATE
from transobs.geometry import SpatialDomain

# closed-form chains evaluated with mpmath at 50 digits
S1_CHAIN = dict(
    rho=1.0, t1=5.0, R=18.9, delta=5.012, d_m=320.41, d_M=396.01, T0=3.8837866680189276645,
    beta=4.018, kappa=24.85, eps=1.2434497365743255414,
)
S3_CHAIN = dict(
    rho=1.0, t1=16.0, R=18.9, delta=5.012, d_m=320.41, d_M=396.01, T0=15.083798882681564246,
    beta=7.3745, kappa=42.392, eps=2.8742287612719506407,
)


def test_observation_point_S1(interval):
    x0, R, theta0 = select_observation_point(interval, make_field("poly:0,1"), 0.8, eta=0.05)
    assert theta0.tolist() == [1.0]
    assert R == pytest.approx(18.9, rel=1e-15)
    assert x0.tolist() == pytest.approx([-18.9], rel=1e-15)


def test_observation_point_limit(interval):
    _, R, _ = select_observation_point(interval, make_field("poly:0,1"), 0.8, eta=1e-9)
    assert R > 18.0 and R == pytest.approx(18.0, rel=1e-8)
    with pytest.raises(AdmissibilityError):
        select_observation_point(interval, make_field("poly:0,1"), 0.8, eta=0.0)


def test_observation_point_disc(disc):
    x0, R, theta0 = select_observation_point(disc, make_field("poly:0,1", "poly:0,0,1"), 0.8)
    assert theta0.tolist() == [1.0, 0.0]
    assert x0 == pytest.approx([-18.9, 0.0], rel=1e-15)


def test_angle_bound_examples(interval, disc):
    f = make_field("poly:0,1")
    assert verify_angle_bound(interval, f, [-18.9], 0.8, (0.0, 5.0)) == pytest.approx(0.72, abs=1e-14)
    assert verify_angle_bound(interval, f, [18.9], 0.8, (0.0, 5.0)) == pytest.approx(-1.28, abs=1e-14)
    f2 = make_field("poly:0,1", "poly:0,0,1")
    assert verify_angle_bound(disc, f2, [-18.9, 0.0], 0.8, (0.0, 0.375)) >= 0.0
    with pytest.raises(AdmissibilityError):
        verify_angle_bound(interval, f, [0.5], 0.8, (0.0, 5.0))


@pytest.mark.parametrize("name,chain", [("S1", S1_CHAIN), ("S3", S3_CHAIN)])
def test_feasible_chains(name, chain, request):
    scn = request.getfixturevalue(name)
    cert = build_certificate(scn.domain, scn.field, scn.c0, scn.mode, scn.eta)
    assert cert.feasible
    for key, value in chain.items():
        assert getattr(cert, key) == pytest.approx(value, rel=1e-12), key
    assert cert.x0 == pytest.approx([-18.9], rel=1e-15)
    assert cert.decay_gap > 0


def test_margins(S1, S2, S3):
    margins = [build_certificate(s.domain, s.field, s.c0, s.mode, s.eta).margin for s in (S1, S2, S3)]
    assert margins[0] == pytest.approx(1.1162133319810723355, rel=1e-12)
    assert margins[1] == pytest.approx(0.375 - 3.8837866680189276645, abs=1e-8)
    assert margins[2] == pytest.approx(0.91620111731843575419, rel=1e-12)


def test_S2_infeasible(S2):
    cert = build_certificate(S2.domain, S2.field, S2.c0, S2.mode, S2.eta)
    assert not cert.feasible
    assert cert.beta is None and cert.kappa is None and cert.eps is None
    assert cert.T0 == pytest.approx(3.8837866680189276645, rel=1e-12)
    assert any("threshold" in d for d in cert.diagnostics)
    assert cert.decay_gap is None
    beta, tau = diagnostic_weight_parameters(cert)
    assert beta == pytest.approx(0.5 * cert.delta) and tau == 5.0


def test_beta_interval(S1, S3):
    c1 = build_certificate(S1.domain, S1.field, S1.c0, S1.mode, S1.eta)
    assert c1.beta_interval == pytest.approx((3.024, 5.012), rel=1e-12)
    c3 = build_certificate(S3.domain, S3.field, S3.c0, S3.mode, S3.eta)
    assert c3.beta_interval == pytest.approx((4.725, 10.024), rel=1e-12)
    assert diagnostic_weight_parameters(c3) == (c3.beta, c3.t1)


def test_rejections(interval):
    f = make_field("poly:0,1")
    with pytest.raises(AdmissibilityError, match="c0"):
        build_certificate(interval, f, 0.5)
    with pytest.raises(AdmissibilityError, match="H\\(0\\) = 0"):
        build_certificate(interval, make_field("poly:1,1"), 0.8)
    with pytest.raises(AdmissibilityError, match="mode"):
        build_certificate(interval, f, 0.8, "sideways")
    with pytest.raises(AdmissibilityError, match="positivity"):
        build_certificate(interval, make_field("poly:0,1,-1", T=2.0), 0.8)
    with pytest.raises(AdmissibilityError):
        build_certificate(interval, make_field("poly:0"), 0.8)


def test_box_flagged():
    box = SpatialDomain.box((-1.0, -1.0), (1.0, 1.0))
    cert = build_certificate(box, make_field("poly:0,1", "poly:0,0.1"), 0.8)
    assert cert.beyond_hypotheses
    assert any("box" in d for d in cert.diagnostics)


def test_non_degenerate_requires_moving_field(interval):
    with pytest.raises(AdmissibilityError):
        build_certificate(interval, make_field("poly:0,1"), 0.8, NONDEGENERATE)


def test_audit_catches_tampering(S1):
    cert = build_certificate(S1.domain, S1.field, S1.c0, S1.mode, S1.eta)
    cert.audit()
    with pytest.raises(AdmissibilityError, match="beta"):
        dataclasses.replace(cert, beta=6.0).audit()
    with pytest.raises(AdmissibilityError, match="x0"):
        dataclasses.replace(cert, x0=np.array([18.9])).audit()
    with pytest.raises(AdmissibilityError, match="eps"):
        dataclasses.replace(cert, eps=7.0).audit()


def test_as_dict(S1):
    d = build_certificate(S1.domain, S1.field, S1.c0, S1.mode, S1.eta).as_dict()
    assert d["x0_0"] == pytest.approx(-18.9) and d["feasible"] is True
    assert d["margin"] == pytest.approx(1.1162133319810723)


def test_combine_constants_examples():
    assert combine_constants(0.0, 0.0) == 0.0
    assert combine_constants(3.0, 16.0) == 5.0
    assert combine_constants(2.5, 0.0) == 2.5
    with pytest.raises(ValueError):
        combine_constants(-1.0, 1.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e3), st.floats(0, 1e3))
def test_combine_constants_monotone(c1, ce, d1, de):
    base = combine_constants(c1, ce)
    assert combine_constants(c1 + d1, ce) >= base
    assert combine_constants(c1, ce + de) >= base
    assert base >= c1 and base >= math.sqrt(ce) * (1 - 1e-15)
