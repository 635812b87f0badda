import numpy as np
import pytest

from nonlocal_plap import (
    ConfigError,
    ConstructedSolution,
    Grid,
    LinearCombination,
    MissingCertificate,
    OperatorParams,
    QuadraticField,
    RhsSpec,
    SmoothBump,
    SupportViolation,
    TouchViolation,
    bump_family,
    ds_perturbation_audit,
    eval_plap,
    moreau_quadratic_audit,
    viscosity_touch_audit,
    weak_supersolution_audit,
    weak_to_visc_perturbation,
)


def const_rhs(c):
    return RhsSpec(f=lambda x, t, eta: c, lip_eta=0.0)


def touching(u, x0, c=0.5, sign=-1.0):
    return LinearCombination.of(u) + LinearCombination.of(QuadraticField(1, center=[x0], radius=5.0, amplitude=c)) * sign


@pytest.mark.parametrize("x0", [0.3, -0.5])
def test_touch_from_below_passes(x0):
    u = SmoothBump(1)
    P = OperatorParams(1, 0.5, 2.0)
    rhs = const_rhs(eval_plap(u, x0, P).value)
    rep = viscosity_touch_audit(u, touching(u, x0), x0, rhs, P)
    assert rep.passed
    # a test function below u sees larger differences, so the margin is positive
    assert rep.summary["margin"] > 0


def test_touch_from_above_is_rejected():
    u = SmoothBump(1)
    P = OperatorParams(1, 0.5, 2.0)
    with pytest.raises(TouchViolation) as ei:
        viscosity_touch_audit(u, touching(u, 0.3, sign=1.0), 0.3, const_rhs(0.0), P)
    assert ei.value.code == "TOUCH_VIOLATION"


def test_touch_that_misses_the_point_is_rejected():
    u = SmoothBump(1)
    psi = LinearCombination.of(touching(u, 0.3)) + (-0.01)
    with pytest.raises(TouchViolation):
        viscosity_touch_audit(u, psi, 0.3, const_rhs(0.0), OperatorParams(1, 0.5, 2.0))


def test_singular_critical_touch_needs_certificate():
    u = SmoothBump(1)
    with pytest.raises(MissingCertificate) as ei:
        viscosity_touch_audit(u, touching(u, 0.0), 0.0, const_rhs(0.0), OperatorParams(1, 0.9, 1.2))
    assert ei.value.code == "MISSING_CERTIFICATE"


def test_weak_to_visc_perturbation_splices_and_bumps():
    u = SmoothBump(1)
    phi = touching(u, 0.2)
    w0 = weak_to_visc_perturbation(u, phi, 0.2, r=0.3, r2=0.2, theta=0.0)
    assert w0.value([0.3]) == phi.value([0.3])
    assert w0.value([0.8]) == u.value([0.8])
    w = weak_to_visc_perturbation(u, phi, 0.2, r=0.3, r2=0.2, theta=0.05)
    assert w.value([0.2]) == pytest.approx(phi.value([0.2]) + 0.05, rel=1e-14)
    assert w.value([0.8]) == u.value([0.8])


def test_weak_to_visc_perturbation_guards():
    u = SmoothBump(1)
    with pytest.raises(ConfigError):
        weak_to_visc_perturbation(u, touching(u, 0.2), 0.2, r=0.1, r2=0.5, theta=0.1)
    with pytest.raises(TouchViolation):
        weak_to_visc_perturbation(u, touching(u, 0.2, sign=1.0), 0.2, r=0.3, r2=0.2, theta=0.1)


def test_bump_family_layout():
    fam = bump_family(1, count=5, radius=0.3)
    assert len(fam) == 5
    centers = [f.support_ball()[0][0] for f in fam]
    assert np.allclose(centers, np.linspace(-0.6, 0.6, 5))
    assert all(f.inf >= 0 for f in fam)


@pytest.fixture(scope="module")
def coarse_solution():
    return ConstructedSolution.build(SmoothBump(1), OperatorParams(1, 0.5, 2.0), Grid.uniform(-1.2, 1.2, 0.025))


def test_weak_audit_exact_solution(coarse_solution):
    rep = weak_supersolution_audit(coarse_solution, bump_family(1, count=3), rel_tol=2e-2)
    assert rep.passed, rep.summary


def test_weak_audit_detects_strict_supersolution(coarse_solution):
    rep = weak_supersolution_audit(coarse_solution, bump_family(1, count=3), slack=0.5)
    assert rep.passed
    assert min(r["relative"] for r in rep.records) > 0.9


def test_weak_audit_support_violation(coarse_solution):
    with pytest.raises(SupportViolation) as ei:
        weak_supersolution_audit(coarse_solution, [SmoothBump(1, center=[1.0], radius=0.5)])
    assert ei.value.code == "SUPPORT_VIOLATION"


def test_shifted_solution_keeps_rhs(coarse_solution):
    sh = coarse_solution.shifted(3.0)
    assert sh.u.value([0.1]) == pytest.approx(coarse_solution.u.value([0.1]) + 3.0)
    assert sh.f_at([0.1]) == coarse_solution.f_at([0.1])


def test_moreau_audit_passes():
    rep = moreau_quadratic_audit([0.2, 0.1, 0.05], Grid.uniform(-1.0, 1.0, 0.05))
    assert rep.passed
    assert max(r["max_error"] for r in rep.records) < 1e-10


def test_ds_perturbation_decreases():
    F = SmoothBump(1)
    eta = SmoothBump(1, center=[0.3], radius=0.1)
    rep = ds_perturbation_audit(F, eta, [0.1, 0.01, 0.001], 0.05, OperatorParams(1, 0.5, 2.0))
    assert rep.passed
    assert rep.summary["strictly_decreasing"]


def test_ds_perturbation_rho_guard():
    with pytest.raises(ConfigError):
        ds_perturbation_audit(SmoothBump(1), SmoothBump(1, center=[0.3], radius=0.1), [0.1], 0.2, OperatorParams(1, 0.5, 2.0))
