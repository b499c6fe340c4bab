import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcondenser import RejectionError, VolumeGrowthProfile, classify_hyperbolicity, oned_weighted
from pcondenser.oracles import (green_constant, profile_from_graph,
                                radial_capacity_quadrature, radial_condenser_capacity,
                                rn_green, rn_green_level_radius, tail_exponent)
from pcondenser import RadialSpace, radial_graph


def test_spherical_condenser_r3():
    assert radial_condenser_capacity(3, 2.0, 1.0, 2.0) == pytest.approx(8 * math.pi, rel=1e-14)


@pytest.mark.parametrize("n, p", [(2, 1.5), (3, 2.0), (3, 2.5), (4, 3.0), (2, 3.0), (3, 3.0)])
def test_closed_form_matches_quadrature(n, p):
    a = radial_condenser_capacity(n, p, 0.5, 3.0)
    b = radial_capacity_quadrature(n, p, 0.5, 3.0)
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("n, p", [(3, 2.0), (4, 2.5), (2, 1.5)])
def test_exterior_capacity(n, p):
    a = radial_condenser_capacity(n, p, 1.0, math.inf)
    assert a == pytest.approx(radial_capacity_quadrature(n, p, 1.0, math.inf), rel=1e-9)
    assert a > 0


@pytest.mark.parametrize("n, p", [(2, 2.0), (3, 3.0), (2, 3.0)])
def test_exterior_capacity_vanishes_when_p_at_least_n(n, p):
    assert radial_condenser_capacity(n, p, 1.0, math.inf) == 0.0


def test_radial_capacity_rejections():
    with pytest.raises(RejectionError):
        radial_condenser_capacity(3, 2.0, 2.0, 1.0)
    with pytest.raises(RejectionError):
        radial_condenser_capacity(3, 1.0, 1.0, 2.0)


def test_green_constant_r3():
    assert green_constant(3, 2.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    with pytest.raises(RejectionError):
        green_constant(3, 3.0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 5), p=st.floats(1.1, 4.9), logb=st.floats(-3, 3))
def test_green_level_sets_have_unit_scaled_capacity(n, p, logb):
    if p >= n:
        return
    b = 10.0**logb
    r = rn_green_level_radius(n, p, b)
    assert rn_green(n, p, r) == pytest.approx(b, rel=1e-12)
    cap = radial_condenser_capacity(n, p, r, math.inf)
    assert cap * b ** (p - 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n, p", [(3, 2.0), (4, 2.5)])
@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
def test_green_level_audit_examples(n, p, b):
    r = rn_green_level_radius(n, p, b)
    assert radial_condenser_capacity(n, p, r, math.inf) * b ** (p - 1) == pytest.approx(
        1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 5), p=st.floats(1.2, 6.0), r=st.floats(0.1, 5.0),
       ratio=st.floats(1.1, 20.0))
def test_closed_form_matches_quadrature_random(n, p, r, ratio):
    a = radial_condenser_capacity(n, p, r, r * ratio)
    b = radial_capacity_quadrature(n, p, r, r * ratio)
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("n, p", [(3, 2.0), (3, 3.0), (2, 1.5)])
def test_degenerate_radius_limits(n, p):
    near = [radial_condenser_capacity(n, p, 1.0 - d, 1.0) for d in (1e-2, 1e-4, 1e-6)]
    assert near[0] < near[1] < near[2] and near[2] > 50 * near[0]
    if p < n:
        small = [radial_condenser_capacity(n, p, r, 1.0) for r in (1e-2, 1e-4, 1e-6)]
        assert small[0] > small[1] > small[2] and small[2] < 0.05 * small[0]


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("r", [0.0, 1.0, 2.5])
def test_oned_weighted_exponential(p, r):
    o = oned_weighted(lambda t: math.exp((p - 1) * t), r, p)
    assert o.alpha == pytest.approx(math.exp(-r), abs=1e-8)
    assert o.energy == pytest.approx(math.exp(r * (p - 1)), rel=1e-8)
    x = np.array([r, r + 1.0, r + 3.0])
    np.testing.assert_allclose(o(x), np.exp(-(x - r)), rtol=1e-8)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_oned_weighted_endpoint_values(p):
    o = oned_weighted(lambda t: (1 + t) ** 4, 0.5, p)
    assert o(0.5)[0] == 1.0
    assert o(1e6)[0] < 1e-2


def test_oned_weighted_rejects_divergent_tail():
    with pytest.raises(RejectionError):
        oned_weighted(lambda t: 1.0, 0.0, 2.0)


def test_tail_exponent_power():
    assert tail_exponent(lambda t: t**-2.0, 1.0) == pytest.approx(-2.0, abs=1e-2)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_classifier_follows_p_below_n(n, p):
    v = classify_hyperbolicity(VolumeGrowthProfile.euclidean(n), p)
    assert v.verdict == ("hyperbolic" if p < n else "parabolic")
    assert v.branch == "analytic"


def test_tabulated_profile_from_radial_graph():
    g = radial_graph(RadialSpace(3, 2.0), 0.25, 400.0, 0.25)
    prof = profile_from_graph(g, [0.0], np.geomspace(2, 380, 30))
    assert classify_hyperbolicity(prof, 2.0).verdict == "hyperbolic"
    assert classify_hyperbolicity(prof, 4.0).verdict == "parabolic"
    assert classify_hyperbolicity(prof, 3.0).verdict == "inconclusive"


def test_borderline_power_profile_is_parabolic():
    # (q - 1)/(p - 1) = 1: the integrand decays like 1/rho
    v = classify_hyperbolicity(VolumeGrowthProfile(c=2.0, q=3.0), 3.0)
    assert v.verdict == "parabolic" and v.branch == "analytic"


def test_weighted_half_line_profile_is_hyperbolic():
    from pcondenser import GridSpec, build_grid
    from pcondenser.model_space import halfline_exp_weight
    g = build_grid(GridSpec.interval(-30, 30, 1 / 8, 2.0, halfline_exp_weight(1.0)))
    prof = profile_from_graph(g, [0.0], np.linspace(2, 29, 28))
    assert classify_hyperbolicity(prof, 2.0).verdict == "hyperbolic"


@pytest.mark.parametrize("kw", [dict(c=-1.0, q=2.0), dict(), dict(rho=[1, 2], mu=[1, 2]),
                                dict(rho=[1, 2, 3, 4], mu=[1, 3, 2, 4])])
def test_profile_rejections(kw):
    with pytest.raises(RejectionError):
        VolumeGrowthProfile(**kw)
