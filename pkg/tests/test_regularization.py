import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_plap import (
    ConfigError,
    ConstantField,
    DomainViolation,
    Grid,
    InfConvolutionField,
    OperatorParams,
    PowerField,
    QuadraticField,
    RegularizationParams,
    RhsSpec,
    SampledField,
    SearchRadiusExceeded,
    SmoothBump,
    choose_q,
    envelope_search,
    f_eps,
    inf_convolution,
    mollify,
    r_eps,
    semiconcavity_audit,
    sup_convolution,
)


def huber(x, eps):
    ax = np.abs(x)
    return np.where(ax >= eps, ax - eps / 2, x * x / (2 * eps))


@pytest.mark.parametrize(
    "s,p,margin,q",
    [(0.5, 2.0, 0.5, 2.0), (0.5, 3.0, 0.5, 2.0), (0.7, 1.5, 0.5, 0.7 * 1.5 / 0.5 + 0.5), (0.9, 1.2, 0.25, 0.9 * 1.2 / 0.2 + 0.25)],
)
def test_choose_q(s, p, margin, q):
    assert choose_q(OperatorParams(1, s, p), margin) == pytest.approx(q, rel=1e-15)


@pytest.mark.parametrize("margin", [0.0, -1.0, math.inf])
def test_choose_q_margin_guard(margin):
    with pytest.raises(ConfigError):
        choose_q(OperatorParams(1, 0.7, 1.5), margin)


def test_q_rule_enforced():
    with pytest.raises(ConfigError):
        RegularizationParams(0.1, q=3.0).check_for(OperatorParams(1, 0.5, 2.0))
    with pytest.raises(ConfigError):
        RegularizationParams(0.1, q=2.0).check_for(OperatorParams(1, 0.7, 1.5))
    RegularizationParams(0.1, q=2.2).check_for(OperatorParams(1, 0.7, 1.5))
    with pytest.raises(ConfigError):
        RegularizationParams(0.0)


def test_r_eps_and_semiconcavity_constant():
    assert r_eps(1.0, 0.1, 2.0) == pytest.approx(math.sqrt(0.2), rel=1e-15)
    assert r_eps(2.0, 0.5, 3.0) == pytest.approx((3.0 * 2.0 * 0.25) ** (1 / 3), rel=1e-15)
    reg = RegularizationParams(0.1, 2.0, 0.3)
    # q = 2: C = 1/(2 eps)
    assert reg.semiconcavity == pytest.approx(5.0)


@pytest.mark.parametrize("eps", [0.4, 0.1])
def test_cone_envelope_is_huber(eps):
    cone = PowerField(1, radius=50.0, exponent=1.0)
    reg = RegularizationParams(eps, 2.0, 2.0 * eps + 0.1)
    xs = np.linspace(-1.0, 1.0, 41)
    vals, args = envelope_search(cone, xs[:, None], reg)
    assert np.allclose(vals, huber(xs, eps), atol=1e-12)
    assert np.all(np.abs(args[:, 0] - xs) <= eps + 1e-6)


def test_moreau_envelope_of_half_square():
    u = QuadraticField(1, radius=20.0, amplitude=0.5)
    reg = RegularizationParams(0.5, 2.0, 2.0)
    v = envelope_search(u, np.array([[1.0]]), reg)[0][0]
    assert v == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_sampled_envelope_semiconcave():
    cone = PowerField(1, radius=50.0, exponent=1.0)
    reg = RegularizationParams(0.2, 2.0, 0.5)
    ue = inf_convolution(cone, reg, Grid.uniform(-1.0, 1.0, 0.01))
    rep = semiconcavity_audit(ue, reg.semiconcavity)
    assert rep.passed
    assert rep.summary["max_second_difference"] <= 2 * reg.semiconcavity + 0.05


def test_search_radius_exceeded():
    cone = PowerField(1, radius=50.0, exponent=1.0)
    with pytest.raises(SearchRadiusExceeded) as ei:
        envelope_search(cone, np.array([[1.0]]), RegularizationParams(1.0, 2.0, 0.1))
    assert ei.value.code == "SEARCH_RADIUS_EXCEEDED"


def test_sampled_input_requires_shrunk_output_box():
    g = Grid.uniform(-1.0, 1.0, 0.05)
    u = SampledField(g, np.cos(g.nodes()[:, 0]))
    reg = RegularizationParams(0.1, 2.0, 0.2)
    with pytest.raises(DomainViolation):
        inf_convolution(u, reg, g)
    out = inf_convolution(u, reg, Grid.uniform(-0.7, 0.7, 0.05))
    assert np.all(out.values <= u(out.grid.nodes()) + 1e-15)


def test_sup_convolution_lies_above():
    u = SmoothBump(1)
    reg = RegularizationParams.for_field(u, OperatorParams(1, 0.5, 2.0), 0.05)
    g = Grid.uniform(-1.5, 1.5, 0.05)
    up = sup_convolution(u, reg, g)
    assert np.all(up.values >= u(g.nodes()) - 1e-15)


def test_mollify_reproduces_constants_and_stays_in_range():
    g = Grid.uniform(-1.0, 1.0, 0.02)
    c = mollify(ConstantField(1, amplitude=2.5), 0.1, g)
    assert np.allclose(c.values, 2.5, rtol=0, atol=1e-14)
    u = SampledField(g, np.abs(g.nodes()[:, 0]))
    m = mollify(u, 0.1, g)
    assert m.values.min() >= 0.0 and m.values.max() <= 1.0
    assert m.value([0.0]) > 0.0


def test_f_eps_infimum_over_ball():
    rhs = RhsSpec(f=lambda x, t, eta: abs(float(np.atleast_1d(x)[0])))
    assert f_eps(rhs, 1.0, 0.0, 0.0, 0.3) == pytest.approx(0.7, abs=1e-12)
    assert f_eps(rhs, 0.0, 0.0, 0.0, 0.3) == pytest.approx(0.0, abs=1e-12)


def test_f_eps_domain_violation():
    rhs = RhsSpec(f=lambda x, t, eta: 0.0, domain=((-1.0,), (1.0,)))
    with pytest.raises(DomainViolation):
        f_eps(rhs, 0.9, 0.0, 0.0, 0.3)


def test_lazy_field_matches_sampled():
    u = SmoothBump(1)
    reg = RegularizationParams.for_field(u, OperatorParams(1, 0.5, 2.0), 0.1)
    lazy = InfConvolutionField(u, reg)
    g = Grid.uniform(-1.5, 1.5, 0.1)
    assert np.allclose(lazy(g.nodes()), inf_convolution(u, reg, g).values, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-1.5, 1.5), e1=st.floats(0.02, 0.5), e2=st.floats(0.02, 0.5))
def test_envelope_below_u_and_monotone_in_eps(x, e1, e2):
    u = SmoothBump(1)
    P = OperatorParams(1, 0.5, 2.0)
    lo, hi = sorted((e1, e2))
    v_small = envelope_search(u, np.array([[x]]), RegularizationParams.for_field(u, P, lo))[0][0]
    v_big = envelope_search(u, np.array([[x]]), RegularizationParams.for_field(u, P, hi))[0][0]
    assert v_small <= u.value([x])
    assert v_big <= v_small + 1e-13
