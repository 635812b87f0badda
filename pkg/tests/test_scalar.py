import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_plap import ConfigError, OperatorParams, make_field
from nonlocal_plap.errors import CertificationFailed
from nonlocal_plap.scalar import (
    L_map,
    RhsSpec,
    c2beta_certify,
    chord_bound,
    chord_identity_check,
    chord_integral,
    growth_audit,
    rhs_from_terms,
)

from oracles import chord as mp_chord

PS = [1.3, 1.5, 2.0, 2.7, 4.0]


@pytest.mark.parametrize("p", PS)
def test_L_map_odd_and_homogeneous(p):
    g = np.array([-3.0, -0.5, 0.0, 0.25, 2.0])
    assert np.array_equal(L_map(-g, p), -L_map(g, p))
    assert np.allclose(L_map(2.0 * g, p), 2.0 ** (p - 1) * L_map(g, p), rtol=1e-14)
    assert L_map(0.0, p) == 0.0


@pytest.mark.parametrize("a,b", [(3.0, -2.0), (0.5, 4.0), (-1.0, -7.5), (2.0, 0.0)])
@pytest.mark.parametrize("p", PS)
def test_chord_integral_matches_mpmath(a, b, p):
    assert chord_integral(a, b, p) == pytest.approx(float(mp_chord(a, b, p)), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(-10, 10, allow_nan=False),
    b=st.floats(-10, 10, allow_nan=False),
    p=st.sampled_from(PS),
)
def test_chord_identity_property(a, b, p):
    if a == 0.0 and b == 0.0:
        return
    rep = chord_identity_check([a], [b], p)
    assert rep.passed, rep.records


@pytest.mark.parametrize("p", [1.3, 1.5])
def test_chord_bound_constant_below_two(p):
    # the integral is below 4/(p-1) |a-b|^(p-2) for p < 2
    rng = np.random.default_rng(1)
    for a, b in rng.uniform(-10, 10, size=(200, 2)):
        assert chord_integral(a, b, p) <= chord_bound(a, b, p) * (1 + 1e-12)


def test_chord_identity_sample_count_and_residual():
    rng = np.random.default_rng(0)
    ab = rng.uniform(-10, 10, size=(1000, 2))
    rep = chord_identity_check(ab[:, 0], ab[:, 1], 2.7)
    assert rep.passed
    assert len(rep.records) == 1000
    assert rep.summary["max_residual"] < 1e-9


def test_chord_identity_detects_sign_flip(monkeypatch):
    import nonlocal_plap.scalar as scalar

    orig = scalar.L_map
    monkeypatch.setattr(scalar, "L_map", lambda g, p: -orig(g, p))
    rep = chord_identity_check([3.0, -1.0], [1.0, 2.0], 1.5)
    assert not rep.passed


def test_rhs_from_terms_growth_audit_passes():
    rhs = rhs_from_terms([{"kind": "constant", "coef": 1.0}, {"kind": "minus_t", "coef": 0.5}, {"kind": "eta_power", "coef": 2.0}], p=2.0, t_max=2.0)
    rng = np.random.default_rng(3)
    samples = [(rng.uniform(-1, 1, 1), rng.uniform(-2, 2), rng.uniform(0, 5)) for _ in range(100)]
    rep = growth_audit(rhs, OperatorParams(1, 0.5, 2.0), samples)
    assert rep.passed
    assert rhs.monotone_t


def test_growth_audit_flags_false_monotonicity_claim():
    rhs = RhsSpec(f=lambda x, t, eta: t, phi_bound=lambda x: 10.0, monotone_t=True)
    rep = growth_audit(rhs, OperatorParams(1, 0.5, 2.0), [(np.zeros(1), 0.0, 1.0), (np.zeros(1), 1.0, 1.0)])
    assert not rep.passed
    assert rep.summary["first_violation"] == 0


def test_rhs_unknown_term_names_field():
    with pytest.raises(ConfigError, match=r"rhs.terms\[1\].kind"):
        rhs_from_terms([{"kind": "constant"}, {"kind": "bogus"}], p=2.0)


def test_rhs_domain_check():
    rhs = RhsSpec(f=lambda x, t, e: 0.0, domain=((-1.0,), (1.0,)))
    assert rhs.in_domain([0.5], 0.5)
    assert not rhs.in_domain([0.5], 0.6)


def test_c2beta_certificate_for_cubic_bump():
    u = make_field("power_bump", 1, exponent=3.0)
    cert = c2beta_certify(u, ((-0.5,), (0.5,)), beta=2.0)
    assert cert.valid
    assert cert.is_critical([0.0])
    assert cert.covers([0.2]) and not cert.covers([0.7])
    # beta must exceed sp/(p-1) to be usable in the singular range
    assert cert.admits(OperatorParams(1, 0.5, 1.3)) == (2.0 > 0.5 * 1.3 / 0.3)
    assert cert.admits(OperatorParams(1, 0.3, 1.5))


def test_c2beta_certification_fails_for_flat_quartic_with_large_beta():
    u = make_field("power", 1, radius=2.0, exponent=4.0)
    with pytest.raises(CertificationFailed):
        c2beta_certify(u, ((-0.5,), (0.5,)), beta=8.0, cap=1e3)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_chord_integral_equal_arguments(p):
    assert chord_integral(2.0, 2.0, p) == pytest.approx(2.0 ** (p - 2), rel=1e-14)
    assert math.isinf(chord_bound(2.0, 2.0, 1.5))


@pytest.mark.parametrize("a,b", [(2.220446049250313e-16, -2.0), (-2.0, 1e-300), (5e-324, 3.0), (-1e-17, -1.0)])
@pytest.mark.parametrize("p", [1.3, 2.7])
def test_chord_crossing_at_an_endpoint(a, b, p):
    rep = chord_identity_check([a], [b], p)
    assert rep.passed, rep.records
    assert chord_integral(a, b, p) == pytest.approx(float(mp_chord(a, b, p)), rel=1e-12)
