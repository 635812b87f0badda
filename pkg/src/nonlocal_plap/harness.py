"""Numerical audits on manufactured solutions.

Every audit returns an :class:`AuditReport` with one record per checked
point (or per test function) and a pass flag decided by explicit tolerances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, MissingCertificate, SupportViolation, TouchViolation
from .fields import Field, Grid, LinearCombination, OperatorParams, PiecewiseField, SmoothBump, as_points
from .quadrature import DEFAULT_SCHEME, QuadratureScheme, eval_ds, eval_plap, integrate_ball, weak_pairing
from .regularization import (
    InfConvolutionField,
    RegularizationParams,
    critical_point_audit,
    envelope_search,
    f_eps,
    semiconcavity_audit,
)
from .report import AuditReport, stable_hash
from .scalar import RhsSpec


# manufactured solutions ------------------------------------------------------------------


@dataclass
class ConstructedSolution:
    """A field ``u`` with ``f := (-Delta)_p^s u`` tabulated on a grid.

    ``rhs`` interpolates the table (linear), has ``gamma = 0`` and
    ``phi = sup |f|``, and is declared on the grid box.
    """

    u: Field
    params: OperatorParams
    grid: Grid
    f_values: np.ndarray
    f_bounds: np.ndarray
    scheme: QuadratureScheme = DEFAULT_SCHEME
    rhs: RhsSpec = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.f_values, dtype=float).reshape(self.grid.shape)
        self.f_values = vals
        self.f_bounds = np.asarray(self.f_bounds, dtype=float).reshape(self.grid.shape)
        if self.grid.n == 1:
            ax = self.grid.axes()[0]
            fx = lambda x: float(np.interp(float(np.atleast_1d(x)[0]), ax, vals))
        else:
            interp = RegularGridInterpolator(self.grid.axes(), vals, method="linear")
            fx = lambda x: float(interp(np.atleast_2d(x))[0])
        self._fx = fx
        phi = float(np.max(np.abs(vals)))
        self.rhs = RhsSpec(
            f=lambda x, t, eta: fx(x),
            gamma=lambda t: 0.0,
            phi_bound=lambda x: phi,
            lip_eta=0.0,
            monotone_t=True,
            domain=(self.grid.lo, self.grid.hi),
            label="manufactured",
        )

    @classmethod
    def build(cls, u: Field, params: OperatorParams, grid: Grid, scheme: QuadratureScheme = DEFAULT_SCHEME) -> "ConstructedSolution":
        """Tabulate ``eval_plap(u)`` at every node of ``grid``."""
        vals, bounds = [], []
        for x in grid.nodes():
            v = eval_plap(u, x, params, scheme)
            vals.append(v.value)
            bounds.append(v.error_bound)
        return cls(u, params, grid, np.array(vals), np.array(bounds), scheme)

    def f_at(self, x) -> float:
        return self._fx(np.atleast_1d(np.asarray(x, dtype=float)))

    @property
    def table_bound(self) -> float:
        return float(np.max(self.f_bounds))

    def shifted(self, c: float) -> "ConstructedSolution":
        """Same right-hand side for ``u + c`` (the operator only sees increments)."""
        return ConstructedSolution(LinearCombination.of(self.u) + c, self.params, self.grid, self.f_values, self.f_bounds, self.scheme)

    def describe(self) -> dict:
        return {"u": repr(self.u), "grid": [list(self.grid.lo), list(self.grid.hi), list(self.grid.shape)], **self.params.describe()}


def _node_label(x) -> float:
    return float(np.atleast_1d(x)[0])


# pointwise transfer inequality ------------------------------------------------------


def pointwise_supersolution_audit(
    sol: ConstructedSolution,
    reg: RegularizationParams,
    params: OperatorParams | None = None,
    scheme: QuadratureScheme | None = None,
    budget: float = 2e-3,
) -> AuditReport:
    """Margins ``(-Delta)_p^s u_eps(x) - f_eps(x, u_eps(x), D_s^p u_eps(x))`` on grid nodes of ``Omega_r(eps)``.

    ``u_eps`` is evaluated lazily (exact envelope search at every quadrature
    point). A node passes when its margin is at least ``-(budget + quadrature
    bounds)``. Propagates ``SingularityUnresolved``.
    """
    t0 = time.perf_counter()
    params = params or sol.params
    scheme = scheme or sol.scheme
    reg.check_for(params)
    ue = InfConvolutionField(sol.u, reg)
    r = reg.r_eps
    rep = AuditReport(
        "pointwise_supersolution",
        params={**sol.describe(), **reg.describe(), "scheme": scheme.hash()},
        tolerances={"budget": budget, "table_bound": sol.table_bound},
    )
    worst = math.inf
    for x in sol.grid.nodes():
        if not sol.rhs.in_domain(x, r):
            continue
        lhs = eval_plap(ue, x, params, scheme)
        t = ue.value(x)
        eta = eval_ds(ue, x, params, scheme)
        rhs = f_eps(sol.rhs, x, t, eta.value, r)
        tol = budget + lhs.error_bound + sol.table_bound
        margin = lhs.value - rhs
        worst = min(worst, margin)
        rep.add(margin >= -tol, x=_node_label(x), lhs=lhs.value, rhs=rhs, margin=margin, tol=tol, u_eps=t, ds=eta.value)
    rep.summary = {"eps": reg.eps, "worst_margin": worst, "nodes": len(rep.records)}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


def pointwise_eps_study(
    sol: ConstructedSolution,
    eps_list,
    params: OperatorParams | None = None,
    scheme: QuadratureScheme | None = None,
    budget: float = 2e-3,
    margin_q: float = 0.5,
) -> AuditReport:
    """Pointwise audits for a decreasing ``eps`` sequence.

    Passes when every node passes and the worst margin moves monotonically
    toward zero, i.e. ``|worst margin|`` is non-increasing as ``eps`` shrinks.
    """
    t0 = time.perf_counter()
    params = params or sol.params
    rep = AuditReport("pointwise_eps_study", params={**sol.describe(), "eps": list(eps_list)}, tolerances={"budget": budget})
    worsts = []
    all_ok = True
    for eps in eps_list:
        reg = RegularizationParams.for_field(sol.u, params, eps, margin=margin_q)
        sub = pointwise_supersolution_audit(sol, reg, params, scheme, budget)
        all_ok &= sub.passed
        worsts.append(sub.summary["worst_margin"])
        for rec in sub.records:
            rep.add(rec["ok"], eps=eps, **{k: v for k, v in rec.items() if k != "ok"})
    mono = all(abs(b) <= abs(a) for a, b in zip(worsts, worsts[1:]))
    rep.summary = {"worst_margins": worsts, "monotone_toward_zero": mono}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize(all_ok and mono)


# weak form closure ----------------------------------------------------------------


def bump_family(n: int = 1, count: int = 5, lo: float = -0.6, hi: float = 0.6, radius: float = 0.3) -> list[Field]:
    """Smooth nonnegative test functions with centers spread over ``[lo, hi]``."""
    cs = np.linspace(lo, hi, count)
    if n == 1:
        return [SmoothBump(1, center=[c], radius=radius) for c in cs]
    return [SmoothBump(2, center=[c, 0.5 * c], radius=radius) for c in cs]


def weak_supersolution_audit(
    sol: ConstructedSolution,
    test_family,
    params: OperatorParams | None = None,
    scheme: QuadratureScheme | None = None,
    slack: float = 0.0,
    rel_tol: float = 5e-3,
    slack_fraction: float = 0.9,
) -> AuditReport:
    """Margins ``weak_pairing(u, phi) - int (f - slack) phi`` over a test family.

    The pairing is half the double integral of the weak formulation, the
    normalization under which a pointwise solution is also a weak solution
    for the same ``f``.

    With ``slack = 0`` (exact solution) a test function passes when
    ``|margin| <= rel_tol * int |f| phi``. With ``slack > 0`` ``u`` is a strict
    supersolution of ``f - slack`` and the margin must reach
    ``slack_fraction * slack * int phi``.
    """
    t0 = time.perf_counter()
    params = params or sol.params
    scheme = scheme or sol.scheme
    n = params.n
    rep = AuditReport(
        "weak_supersolution",
        params={**sol.describe(), "slack": slack, "family": len(test_family)},
        tolerances={"rel_tol": rel_tol, "slack_fraction": slack_fraction},
    )
    lo, hi = np.array(sol.grid.lo), np.array(sol.grid.hi)
    for j, phi in enumerate(test_family):
        sb = phi.support_ball()
        if sb is None or phi.inf < 0:
            raise SupportViolation(f"test function {j} is not a nonnegative compactly supported bump")
        c, R = sb
        if np.any(c - R <= lo) or np.any(c + R >= hi):
            raise SupportViolation(f"support of test function {j} is not interior to the tabulated box")
        lhs = weak_pairing(sol.u, phi, params, scheme)
        fphi = integrate_ball(lambda x: (sol.f_at(x) - slack) * phi.value(x), c, R, n)
        absf = integrate_ball(lambda x: abs(sol.f_at(x)) * phi.value(x), c, R, n)
        mass = integrate_ball(lambda x: phi.value(x), c, R, n)
        margin = lhs - fphi
        if slack == 0.0:
            ok = abs(margin) <= rel_tol * absf
            rel = abs(margin) / absf if absf > 0 else 0.0
        else:
            ok = margin >= slack_fraction * slack * mass
            rel = margin / (slack * mass)
        rep.add(ok, test=j, center=_node_label(c), radius=R, weak=lhs, rhs=fphi, margin=margin, abs_f_phi=absf, mass=mass, relative=rel)
    rep.summary = {"max_relative": max((abs(r["relative"]) for r in rep.records), default=0.0)}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


# Caccioppoli --------------------------------------------------------------------------


def gamma_infinity(rhs: RhsSpec, u: Field, samples: int = 201) -> float:
    """``max |gamma(t)|`` over ``|t| <= ||u||_inf`` by sampling."""
    m = max(abs(u.sup), abs(u.inf))
    return float(max(abs(rhs.gamma(t)) for t in np.linspace(-m, m, samples)))


def caccioppoli_audit(
    sol: ConstructedSolution,
    cutoffs,
    params: OperatorParams | None = None,
    scheme: QuadratureScheme | None = None,
    factor: float = 10.0,
    panels: int = 6,
) -> AuditReport:
    """Energy bound ``int_K xi^p D_s^p u <= C [osc^p (int_K D_s^p xi + gamma_inf^p) + osc]``.

    ``C`` is fitted as the largest ratio over the cutoff family; the audit
    passes when every left side is finite and the ratios agree within ``factor``.
    """
    t0 = time.perf_counter()
    params = params or sol.params
    scheme = scheme or sol.scheme
    u, p, n = sol.u, params.p, params.n
    osc = u.osc
    g_inf = gamma_infinity(sol.rhs, u)
    rep = AuditReport("caccioppoli", params={**sol.describe(), "cutoffs": len(cutoffs)}, tolerances={"factor": factor})
    ratios = []
    rows = []
    for j, xi in enumerate(cutoffs):
        sb = xi.support_ball()
        if sb is None or xi.inf < 0 or xi.sup > 1.0 + 1e-12:
            raise ConfigError(f"cutoffs[{j}]", "0 <= xi <= 1 with compact support", repr(xi))
        c, R = sb
        lhs = integrate_ball(lambda x: xi.value(x) ** p * eval_ds(u, x, params, scheme).value, c, R, n, panels=panels)
        energy = integrate_ball(lambda x: eval_ds(xi, x, params, scheme).value, c, R, n, panels=panels)
        bracket = osc**p * (energy + g_inf**p) + osc
        ratio = lhs / bracket if bracket > 0 else 0.0
        ratios.append(ratio)
        rows.append((j, R, lhs, energy, bracket, ratio))
    C = max(ratios) if ratios else 0.0
    positive = [r for r in ratios if r > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    for j, R, lhs, energy, bracket, ratio in rows:
        rep.add(math.isfinite(lhs) and lhs <= C * bracket * (1 + 1e-12), cutoff=j, radius=R, lhs=lhs, xi_energy=energy, bracket=bracket, ratio=ratio, rhs=C * bracket)
    rep.summary = {"C": C, "spread": spread, "osc": osc}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize(not rep.violations and spread <= factor)


# D_s^p continuity under small bumps ----------------------------------------------------


def ds_perturbation_audit(
    F: Field,
    eta_bump: Field,
    thetas,
    rho: float,
    params: OperatorParams,
    scheme: QuadratureScheme = DEFAULT_SCHEME,
    x0=None,
    delta: float | None = None,
    samples: int = 9,
    ratio_target: float = 0.1,
) -> AuditReport:
    """``sup_{B_rho(x0)} |D_s^p F - D_s^p (F + theta eta)|`` for a sequence of ``theta``.

    ``C`` is fitted on the first (largest) ``theta`` against the envelope
    ``delta^(p(1-s)) + theta delta^(-sp)``, with ``delta`` the support radius of
    ``eta`` unless given. Passes when the sequence strictly decreases, ends
    below ``ratio_target`` times its first value, and stays under the envelope.
    """
    t0 = time.perf_counter()
    sb = eta_bump.support_ball()
    if sb is None:
        raise ConfigError("eta_bump", "compactly supported bump", repr(eta_bump))
    c, r = sb
    x0 = c if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if not (0 < rho < r):
        raise ConfigError("rho", "0 < rho < support radius of eta", rho)
    F.certify_decay()
    delta = r if delta is None else float(delta)
    p, s, n = params.p, params.s, params.n
    t = np.linspace(-1.0, 1.0, samples)
    if n == 1:
        pts = x0[None, :] + rho * t[:, None]
    else:
        a, b = np.meshgrid(t, t, indexing="ij")
        off = np.stack([a.ravel(), b.ravel()], axis=1)
        pts = x0[None, :] + rho * off[np.linalg.norm(off, axis=1) <= 1.0]
    base = np.array([eval_ds(F, x, params, scheme).value for x in pts])
    rep = AuditReport(
        "ds_perturbation",
        params={"F": repr(F), "eta": repr(eta_bump), "thetas": list(thetas), "rho": rho, "delta": delta, **params.describe()},
        tolerances={"ratio_target": ratio_target},
    )
    sups = []
    for th in thetas:
        G = LinearCombination.of(F) + LinearCombination.of(eta_bump) * th
        diff = np.array([abs(eval_ds(G, x, params, scheme).value - b0) for x, b0 in zip(pts, base)])
        sups.append(float(diff.max()))
    env = lambda th: delta ** (p * (1 - s)) + th * delta ** (-s * p)
    C = sups[0] / env(thetas[0]) if sups else 0.0
    for th, sv in zip(thetas, sups):
        rep.add(sv <= C * env(th) * (1 + 1e-12), theta=th, sup_difference=sv, envelope=C * env(th))
    strict = all(b < a for a, b in zip(sups, sups[1:]))
    small = bool(sups) and sups[-1] < ratio_target * sups[0]
    rep.summary = {"C": C, "strictly_decreasing": strict, "final_over_initial": sups[-1] / sups[0] if sups and sups[0] > 0 else 0.0}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize(not rep.violations and strict and small)


# viscosity touching ----------------------------------------------------------------


def _dense_sample(x0: np.ndarray, radius: float, n: int, m: int) -> np.ndarray:
    t = np.linspace(-radius, radius, m)
    if n == 1:
        return x0[None, :] + t[:, None]
    a, b = np.meshgrid(t, t, indexing="ij")
    return x0[None, :] + np.stack([a.ravel(), b.ravel()], axis=1)


def check_touch(u: Field, psi: Field, x0, radius: float = 3.0, samples: int = 4001, tol: float = 1e-10) -> None:
    """Raise ``TouchViolation`` unless ``psi(x0) = u(x0)`` and ``psi <= u`` on a dense sample."""
    x0 = as_points(x0, u.n)[0]
    gap0 = abs(psi.value(x0) - u.value(x0))
    if gap0 > tol:
        raise TouchViolation(f"psi(x0) - u(x0) = {gap0!r} exceeds {tol!r}")
    m = samples if u.n == 1 else int(math.sqrt(samples)) | 1
    pts = _dense_sample(x0, radius, u.n, m)
    over = psi(pts) - u(pts)
    k = int(np.argmax(over))
    if over[k] > tol:
        raise TouchViolation(f"psi exceeds u by {over[k]!r} at {pts[k].tolist()}")


def viscosity_touch_audit(
    u: Field,
    psi: Field,
    x0,
    rhs: RhsSpec,
    params: OperatorParams,
    scheme: QuadratureScheme = DEFAULT_SCHEME,
    certificate=None,
    tol: float = 1e-6,
    touch_radius: float = 3.0,
) -> AuditReport:
    """Margin ``(-Delta)_p^s psi(x0) - f(x0, psi(x0), D_s^p psi(x0))`` for a test function touching from below.

    Raises
    ------
    TouchViolation
        When ``psi`` does not touch ``u`` from below at ``x0``.
    MissingCertificate
        In the singular range at a critical point of ``psi`` without an admissible certificate.
    """
    t0 = time.perf_counter()
    x0 = as_points(x0, params.n)[0]
    check_touch(u, psi, x0, touch_radius)
    g = float(np.linalg.norm(psi.grad(x0[None, :])[0]))
    critical = g <= 1e-9
    if params.singular_range and critical:
        if certificate is None or not certificate.admits(params) or not certificate.covers(x0) or not certificate.is_critical(x0):
            raise MissingCertificate(f"singular range p={params.p} <= 2/(2-s) at a critical point needs a C2-beta certificate with beta > sp/(p-1)")
    lhs = eval_plap(psi, x0, params, scheme, certificate=certificate if critical else None)
    ds = eval_ds(psi, x0, params, scheme)
    rv = rhs(x0, psi.value(x0), ds.value)
    margin = lhs.value - rv
    budget = tol + lhs.error_bound + ds.error_bound * rhs.lip_eta if math.isfinite(rhs.lip_eta) else math.inf
    rep = AuditReport("viscosity_touch", params={"u": repr(u), "psi": repr(psi), "x0": x0.tolist(), **params.describe()}, tolerances={"tol": budget})
    rep.add(margin >= -budget, x=_node_label(x0), lhs=lhs.value, rhs=rv, margin=margin, grad=g, ds=ds.value)
    rep.summary = {"margin": margin}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


def weak_to_visc_perturbation(u: Field, phi: Field, x0, r: float, r2: float, theta: float, eta: Field | None = None, check: bool = True) -> Field:
    """``psi_r + theta eta`` with ``psi_r = phi`` on ``B_r(x0)`` and ``u`` outside.

    ``eta`` defaults to a smooth bump of radius ``r2/2`` with ``eta(x0) = 1``.
    """
    x0 = as_points(x0, u.n)[0]
    if not (r > 0 and r2 > 0 and r2 / 2 <= r):
        raise ConfigError("r2", "0 < r2/2 <= r so the bump stays inside B_r(x0)", r2)
    if not theta >= 0:
        raise ConfigError("theta", "theta >= 0", theta)
    if check:
        pts = _dense_sample(x0, r, u.n, 2001 if u.n == 1 else 81)
        pts = pts[np.linalg.norm(pts - x0, axis=1) <= r]
        over = phi(pts) - u(pts)
        if abs(phi.value(x0) - u.value(x0)) > 1e-10 or over.max() > 1e-10:
            raise TouchViolation("phi must satisfy phi <= u on B_r(x0) with equality at x0")
    psi_r = PiecewiseField(phi, u, x0, r)
    if theta == 0:
        return psi_r
    eta = eta if eta is not None else SmoothBump(u.n, center=x0, radius=r2 / 2)
    return LinearCombination.of(psi_r) + LinearCombination.of(eta) * theta


# envelope properties ----------------------------------------------------------------


def envelope_audit(u: Field, eps_list, grid: Grid, params: OperatorParams, margin_q: float = 0.5, h_coef: float = 4.0, crit_val: float = 1e-6) -> AuditReport:
    """Structural properties of ``u_eps`` on grid nodes for a decreasing ``eps`` sequence.

    Checks per ``eps``: ``u_eps <= u``; minimizers inside ``B_r(eps)``; the
    discrete Lipschitz propagation bound; semiconcavity (second differences at
    most ``2C + h_coef h``); and ``|u_eps - u| < crit_val + Lip h`` at nodes with
    small centered gradient. Across ``eps``: nodewise monotonicity and a
    strictly decreasing sup-distance to ``u``.
    """
    from .fields import SampledField

    t0 = time.perf_counter()
    nodes = grid.nodes()
    uu = u(nodes)
    h = float(np.max(grid.h))
    lip_u = u.lipschitz if math.isfinite(u.lipschitz) else float(np.max(np.abs(np.diff(uu)))) / h
    rep = AuditReport("envelope_properties", params={"u": repr(u), "eps": list(eps_list), "grid": list(grid.shape), **params.describe()}, tolerances={"h_coef": h_coef, "crit_val": crit_val})
    prev = None
    dists = []
    for eps in eps_list:
        reg = RegularizationParams.for_field(u, params, eps, margin=margin_q)
        vals, args = envelope_search(u, nodes, reg)
        ue = SampledField(grid, vals.reshape(grid.shape))
        below = bool(np.all(vals <= uu))
        far = float(np.max(np.linalg.norm(args - nodes, axis=1)))
        mono = True if prev is None else bool(np.all(prev <= vals))
        lip_e = ue.lipschitz if ue.n == 1 else float(np.max(np.abs(np.diff(ue.values, axis=0)))) / h
        lip_bound = reg.r_eps ** (reg.q - 1) / eps ** (reg.q - 1) + lip_u
        semi = semiconcavity_audit(ue, reg.semiconcavity, h_coef)
        crit = critical_point_audit(u, ue, grad_tol=crit_val, val_tol=crit_val + lip_u * h)
        dist = float(np.max(uu - vals))
        dists.append(dist)
        ok = below and far <= reg.r_eps and mono and lip_e <= lip_bound * (1 + 1e-9) and semi.passed and crit.passed
        rep.add(
            ok,
            eps=eps,
            q=reg.q,
            r_eps=reg.r_eps,
            below=below,
            max_minimizer_distance=far,
            monotone=mono,
            lipschitz=lip_e,
            lipschitz_bound=lip_bound,
            max_second_difference=semi.summary["max_second_difference"],
            semiconcavity_bound=semi.summary["bound"],
            critical_nodes=crit.summary["critical_nodes"],
            critical_gap=crit.summary["max_gap"],
            sup_distance=dist,
        )
        prev = vals
    strict = all(b < a for a, b in zip(dists, dists[1:]))
    rep.summary = {"sup_distances": dists, "strictly_decreasing": strict}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize(not rep.violations and strict)


def moreau_quadratic_audit(eps_list, grid: Grid, coef: float = 2.0) -> AuditReport:
    """Envelope of ``|x|^2/2`` against the closed form ``|x|^2 / (2(1 + eps))`` within ``coef h^2``."""
    from .fields import QuadraticField

    t0 = time.perf_counter()
    nodes = grid.nodes()
    half = float(np.max(np.abs(np.concatenate([np.array(grid.lo), np.array(grid.hi)]))))
    R = 4.0 * half + 4.0
    u = QuadraticField(grid.n, radius=R, amplitude=0.5)
    h = float(np.max(grid.h))
    rep = AuditReport("moreau_quadratic", params={"eps": list(eps_list), "grid": list(grid.shape)}, tolerances={"per_node": coef * h * h})
    for eps in eps_list:
        reg = RegularizationParams(eps, 2.0, math.sqrt(2.0 * half**2 * eps) * 1.5 + 1e-9)
        vals = envelope_search(u, nodes, reg)[0]
        exact = np.sum(nodes**2, axis=1) / (2.0 * (1.0 + eps))
        err = float(np.max(np.abs(vals - exact)))
        rep.add(err <= coef * h * h, eps=eps, max_error=err, bound=coef * h * h)
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


# eps convergence of the increments -------------------------------------------------------


def eps_convergence_study(
    u: Field,
    K,
    eps_list,
    params: OperatorParams,
    scheme: QuadratureScheme = DEFAULT_SCHEME,
    margin_q: float = 0.5,
    panels: int = 8,
    order: int = 4,
    tol_ratio: float = 0.1,
) -> AuditReport:
    """``int_K int_{R^n} |w(x) - w(y)|^p K(x, y) dy dx`` with ``w = u_eps - u``.

    The inner integral is ``D_s^p w(x)`` evaluated with the lazy envelope.
    Passes when the sequence strictly decreases and its last value is below
    ``tol_ratio`` times the first. Also records ``sup_K |u - u_eps|``.
    """
    from .quadrature import _gl_on_edges

    t0 = time.perf_counter()
    lo = np.atleast_1d(np.asarray(K[0], dtype=float))
    hi = np.atleast_1d(np.asarray(K[1], dtype=float))
    n = params.n
    if lo.size != n or np.any(hi <= lo):
        raise ConfigError("K", "box with hi > lo in params.n dimensions", (lo.tolist(), hi.tolist()))
    axes = [_gl_on_edges(np.linspace(a, b, panels + 1), order) for a, b in zip(lo, hi)]
    if n == 1:
        pts, wts = axes[0][0][:, None], axes[0][1]
    else:
        (xa, wa), (xb, wb) = axes
        X, Y = np.meshgrid(xa, xb, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        wts = np.outer(wa, wb).ravel()
    rep = AuditReport("eps_convergence", params={"u": repr(u), "K": [lo.tolist(), hi.tolist()], "eps": list(eps_list), **params.describe()}, tolerances={"ratio": tol_ratio})
    vals = []
    for eps in eps_list:
        reg = RegularizationParams.for_field(u, params, eps, margin=margin_q)
        ue = InfConvolutionField(u, reg)
        w = LinearCombination([(1.0, ue), (-1.0, u)])
        dens = np.array([eval_ds(w, x, params, scheme).value for x in pts])
        integral = float(np.dot(wts, dens))
        sup_dist = float(np.max(u(pts) - ue(pts)))
        vals.append(integral)
        rep.add(True, eps=eps, integral=integral, sup_distance=sup_dist, q=reg.q, r_eps=reg.r_eps)
    strict = all(b < a for a, b in zip(vals, vals[1:]))
    small = bool(vals) and (vals[0] == 0.0 or vals[-1] < tol_ratio * vals[0])
    if all(v == 0.0 for v in vals):
        strict = True
    sd = [r["sup_distance"] for r in rep.records]
    rep.summary = {"integrals": vals, "strictly_decreasing": strict, "sup_distance_decreasing": all(b <= a for a, b in zip(sd, sd[1:]))}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize(strict and small)


def config_hash(*objs) -> str:
    return stable_hash([repr(o) for o in objs])
