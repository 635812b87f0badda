import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_plap import (
    CATALOG_KINDS,
    ConfigError,
    ConstantField,
    CutoffField,
    Grid,
    KernelSpec,
    LinearCombination,
    OperatorParams,
    PiecewiseField,
    PowerBump,
    SampledField,
    SmoothBump,
    TailModel,
    kernel_bounds_audit,
    make_field,
)


@pytest.mark.parametrize(
    "s,p,singular",
    [(0.5, 2.0, False), (0.5, 4.0 / 3.0, True), (0.5, 1.34, False), (0.7, 1.5, True), (0.9, 1.2, True), (0.3, 1.5, False)],
)
def test_singular_range_boundary(s, p, singular):
    assert OperatorParams(1, s, p).singular_range is singular


@pytest.mark.parametrize("kw,field", [({"s": 1.5}, "s"), ({"s": 0.0}, "s"), ({"p": 1.0}, "p"), ({"n": 3}, "n")])
def test_operator_params_guards(kw, field):
    args = {"n": 1, "s": 0.5, "p": 2.0, **kw}
    with pytest.raises(ConfigError) as ei:
        OperatorParams(**args)
    assert ei.value.field == field


def test_s_guard_message_cites_invariant():
    with pytest.raises(ConfigError, match=r"0 < s < 1"):
        OperatorParams(1, 1.5, 2.0)


def test_kernel_guards():
    with pytest.raises(ConfigError):
        KernelSpec("fractional", lam=2.0)
    with pytest.raises(ConfigError):
        KernelSpec("general", lam=0.5)
    with pytest.raises(ConfigError):
        KernelSpec("banana")


def test_kernel_bounds_audit_general_kernel():
    P = OperatorParams(1, 0.5, 2.0, KernelSpec("general", lam=2.0, scale=1.5))
    rng = np.random.default_rng(0)
    pairs = [(x, x + d) for x, d in zip(rng.uniform(-1, 1, (50, 1)), rng.uniform(0.1, 1, (50, 1)))]
    rep = kernel_bounds_audit(P.kernel, P, pairs)
    assert rep.passed
    assert rep.summary["max_ratio"] == pytest.approx(1.5)


def test_kernel_bounds_audit_flags_out_of_band_scale():
    P = OperatorParams(1, 0.5, 2.0, KernelSpec("general", lam=2.0, scale=3.0))
    rep = kernel_bounds_audit(P.kernel, P, [(np.zeros(1), np.ones(1))])
    assert not rep.passed


@pytest.mark.parametrize("kind", CATALOG_KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_catalog_delta_matches_values(kind, n):
    kw = {"exponent": 0.5} if kind == "cutoff" else {"exponent": 2.0}
    u = make_field(kind, n, center=[0.1] * n, radius=1.2, amplitude=1.7, **kw)
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, n)
    z = rng.uniform(-1.5, 1.5, (40, n))
    direct = u(x[None, :] + z) - u(x[None, :])[0]
    assert np.allclose(u.delta(x, z), direct, atol=1e-13, rtol=1e-12)


def test_unknown_catalog_id():
    with pytest.raises(ConfigError, match="field.kind"):
        make_field("triangle")


@pytest.mark.parametrize(
    "field,x,value",
    [
        (PowerBump(1, exponent=1.0), 0.5, 0.75),
        (PowerBump(1, exponent=3.0), 0.5, 0.421875),
        (SmoothBump(1), 0.0, 1.0),
        (SmoothBump(1), 0.5, math.exp(1 - 1 / 0.75)),
        (make_field("cosine_bump"), 0.5, 0.5),
        (make_field("power", radius=2.0, exponent=1.0), -3.0, 2.0),
        (ConstantField(1, amplitude=4.5), 10.0, 4.5),
    ],
)
def test_catalog_closed_forms(field, x, value):
    assert field.value([x]) == pytest.approx(value, rel=1e-15)


def test_smooth_bump_increment_is_finite_near_edge():
    u = SmoothBump(1)
    d = u.delta(np.array([0.999]), np.array([[-1.998], [1e-3], [-1e-9]]))
    assert np.all(np.isfinite(d))


def test_cutoff_field_is_one_inside_and_zero_outside():
    xi = CutoffField(1, radius=1.0, exponent=0.5)
    assert xi.value([0.3]) == 1.0
    assert xi.value([1.2]) == 0.0
    vals = xi(np.linspace(-1.5, 1.5, 301)[:, None])
    assert vals.min() >= 0.0 and vals.max() <= 1.0


def test_linear_combination_and_shift():
    u = SmoothBump(1)
    w = LinearCombination.of(u) * 2.0 + 3.0
    xs = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(w(xs), 2 * u(xs) + 3)
    assert w.osc == pytest.approx(2 * u.osc)


def test_piecewise_field_splices_inside_ball():
    u = SmoothBump(1)
    phi = ConstantField(1, amplitude=-1.0)
    w = PiecewiseField(phi, u, [0.0], 0.5)
    assert w.value([0.2]) == -1.0
    assert w.value([0.7]) == u.value([0.7])


def test_grid_uniform_and_guards():
    g = Grid.uniform(-1.0, 1.0, 0.25)
    assert g.shape == (9,)
    assert np.allclose(g.h, 0.25)
    with pytest.raises(ConfigError):
        Grid((0.0,), (0.0,), (5,))
    with pytest.raises(ConfigError):
        Grid((0.0,), (1.0,), (2,))


def test_sampled_field_interpolates_linear_exactly():
    g = Grid.uniform(-1.0, 1.0, 0.1)
    vals = 2.0 * g.nodes()[:, 0] + 1.0
    f = SampledField(g, vals, TailModel("nearest"))
    assert f.value([0.33]) == pytest.approx(1.66, abs=1e-14)
    assert f.value([5.0]) == pytest.approx(3.0)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(-5, 5), x=st.floats(-3, 3))
def test_constant_field_increments_vanish(c, x):
    u = ConstantField(1, amplitude=c)
    assert np.all(u.delta(np.array([x]), np.array([[0.3], [-2.0]])) == 0.0)
