import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_plap import (
    ConstantField,
    KernelSpec,
    LinearCombination,
    OperatorParams,
    QuadratureScheme,
    SingularityUnresolved,
    SmoothBump,
    c2beta_certify,
    eval_ds,
    eval_pairing,
    eval_plap,
    gagliardo,
    make_field,
    weak_form,
    weak_pairing,
)
from nonlocal_plap.oracle import oracle_gagliardo_1d, oracle_plap_1d
from nonlocal_plap.quadrature import integrate_ball

from oracles import plap as mp_plap
from oracles import power_bump as mp_power_bump

# (field, exponent, x, s, p, (-Delta)_p^s u(x), D_s^p u(x)); 50-digit mpmath values
FROZEN = [
    ("power_bump", 1.0, 0.3, 0.3, 3.0, 2.6512849573572971, 2.1868589024071327),
    ("power_bump", 3.0, 0.5, 0.5, 2.5, -0.20746191268580684, 2.1019568130859095),
    ("smooth_bump", 1.0, 0.75, 0.7, 1.5, -0.24937507781849772, 9.0689147477776108),
    ("smooth_bump", 1.0, 0.4, 0.5, 2.0, 3.8723416437654905, 3.1365925552767371),
    ("cosine_bump", 1.0, 0.3, 0.5, 2.0, 3.8386840867767069, 3.2781089283848027),
    ("cosine_bump", 1.0, 0.6, 0.3, 1.5, 1.9793149886991459, 2.767704078673775),
    ("power_bump", 3.0, 0.2, 0.7, 3.0, 7.0239170945406331, 3.7489842698649169),
]


@pytest.mark.parametrize("kind,k,x,s,p,lap,ds", FROZEN)
def test_against_frozen_reference_values(kind, k, x, s, p, lap, ds):
    u = make_field(kind, 1, exponent=k)
    P = OperatorParams(1, s, p)
    a = eval_plap(u, x, P)
    b = eval_ds(u, x, P)
    assert a.value == pytest.approx(lap, rel=1e-9, abs=1e-12)
    assert b.value == pytest.approx(ds, rel=1e-9)
    # the reported bounds must cover the observed error
    assert abs(a.value - lap) <= a.error_bound + 1e-12 * abs(lap)


def test_parabola_closed_form():
    # (1 - x^2)_+ at 0 with s = 1/2, p = 2: int_{|y|<1} 1 dy + int_{|y|>1} y^-2 dy = 4
    u = make_field("power_bump", 1, exponent=1.0)
    P = OperatorParams(1, 0.5, 2.0)
    assert eval_plap(u, 0.0, P).value == pytest.approx(4.0, rel=1e-10)
    assert eval_ds(u, 0.0, P).value == pytest.approx(8.0 / 3.0, rel=1e-10)


def test_live_mpmath_point():
    u = make_field("power_bump", 1, exponent=1.0)
    ref = float(mp_plap(mp_power_bump(1), 0.55, 0.4, 1.7, extra=(1.1,)))
    assert eval_plap(u, 0.55, OperatorParams(1, 0.4, 1.7)).value == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s,p", [(0.3, 1.5), (0.7, 1.5), (0.5, 2.0), (0.5, 3.0)])
def test_constants_are_annihilated_exactly(n, s, p):
    u = ConstantField(n, amplitude=-3.25)
    assert eval_plap(u, np.full(n, 0.4), OperatorParams(n, s, p)).value == 0.0
    assert eval_ds(u, np.full(n, 0.4), OperatorParams(n, s, p)).value == 0.0


@settings(max_examples=15, deadline=None)
@given(c=st.floats(0.25, 4.0), x=st.floats(-0.9, 0.9).filter(lambda v: abs(v) > 0.05), p=st.sampled_from([1.7, 2.0, 3.0]))
def test_homogeneity(c, x, p):
    u = SmoothBump(1)
    P = OperatorParams(1, 0.5, p)
    base = eval_plap(u, x, P).value
    scaled = eval_plap(SmoothBump(1, amplitude=c), x, P).value
    assert scaled == pytest.approx(c ** (p - 1) * base, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("x", [0.2, 0.6])
def test_odd_under_negation_and_shift_invariant(x):
    P = OperatorParams(1, 0.5, 2.5)
    u = SmoothBump(1)
    v = eval_plap(u, x, P).value
    assert eval_plap(SmoothBump(1, amplitude=-1.0), x, P).value == pytest.approx(-v, rel=1e-12)
    assert eval_plap(LinearCombination.of(u) + 5.0, x, P).value == pytest.approx(v, rel=1e-9)
    assert eval_plap(SmoothBump(1, center=[0.7]), x + 0.7, P).value == pytest.approx(v, rel=1e-9)


def test_pairing_with_itself_is_ds():
    u = make_field("cosine_bump", 1)
    P = OperatorParams(1, 0.4, 2.5)
    assert eval_pairing(u, u, 0.3, P).value == pytest.approx(eval_ds(u, 0.3, P).value, rel=1e-9)


def test_general_kernel_scales_value():
    u = SmoothBump(1)
    P1 = OperatorParams(1, 0.5, 2.0)
    P2 = OperatorParams(1, 0.5, 2.0, KernelSpec("general", lam=2.0, scale=1.5))
    assert eval_plap(u, 0.3, P2).value == pytest.approx(1.5 * eval_plap(u, 0.3, P1).value, rel=1e-10)


def test_singular_range_critical_point_requires_certificate_or_smoothing():
    u = make_field("smooth_bump", 1)
    P = OperatorParams(1, 0.9, 1.2)
    with pytest.raises(SingularityUnresolved) as ei:
        eval_plap(u, 0.0, P)
    assert ei.value.code == "SINGULARITY_UNRESOLVED"
    smoothed = eval_plap(u, 0.0, P, QuadratureScheme(rho_smooth=1e-3))
    assert smoothed.value > 0


def test_certificate_unlocks_flat_critical_point():
    # a flat sixth-order well: beta = 6 > sp/(p-1) = 5.4 while 2(p-1) < sp
    u = make_field("power", 1, radius=2.0, amplitude=-1.0, exponent=6.0)
    P = OperatorParams(1, 0.9, 1.2)
    with pytest.raises(SingularityUnresolved):
        eval_plap(u, 0.0, P)
    cert = c2beta_certify(u, ((-0.5,), (0.5,)), beta=6.0)
    assert cert.admits(P)
    val = eval_plap(u, 0.0, P, certificate=cert)
    assert np.isfinite(val.value) and val.value > 0


def test_kink_with_small_p_is_rejected():
    u = make_field("power_bump", 1, exponent=1.0)
    with pytest.raises(SingularityUnresolved):
        eval_plap(u, 1.0, OperatorParams(1, 0.7, 1.5))


def test_two_dimensional_rotation_invariance():
    u = SmoothBump(2)
    P = OperatorParams(2, 0.5, 2.0)
    a = eval_plap(u, [0.4, 0.0], P).value
    b = eval_plap(u, [0.0, 0.4], P).value
    c = eval_plap(u, [0.4 / np.sqrt(2), 0.4 / np.sqrt(2)], P).value
    assert b == pytest.approx(a, rel=1e-6)
    assert c == pytest.approx(a, rel=1e-6)
    assert eval_plap(u, [0.0, 0.0], P).value > 0


def test_weak_pairing_is_half_the_double_integral_and_matches_pointwise():
    u = make_field("smooth_bump", 1)
    phi = SmoothBump(1, center=[0.3], radius=0.3)
    P = OperatorParams(1, 0.5, 2.0)
    wf = weak_form(u, phi, P)
    wp = weak_pairing(u, phi, P)
    assert wp == pytest.approx(0.5 * wf, rel=1e-15)
    direct = integrate_ball(lambda x: eval_plap(u, x, P).value * phi.value(x), np.array([0.3]), 0.3, 1)
    assert wp == pytest.approx(direct, rel=1e-6)


def test_gagliardo_against_oracle():
    u = make_field("cosine_bump", 1)
    P = OperatorParams(1, 0.4, 2.0)
    ref = oracle_gagliardo_1d(u, -0.5, 0.5, 0.4, 2.0, tol=1e-9)
    assert gagliardo(u, ((-0.5,), (0.5,)), P) == pytest.approx(ref, rel=1e-5)


def test_gk_oracle_agrees_at_a_regular_point():
    u = make_field("cosine_bump", 1)
    ref = oracle_plap_1d(u, 0.3, 0.5, 2.0)
    assert ref == pytest.approx(3.8386840867767069, rel=1e-9)
