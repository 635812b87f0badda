"""Scalar map L, its chord identity, growth-condition audits and C2-beta tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .errors import CertificationFailed, ConfigError
from .report import AuditReport


def L_map(gamma_val, p: float):
    """L(g) = |g|^(p-2) g, extended by L(0) = 0 for every p > 1."""
    g = np.asarray(gamma_val, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sign(g) * np.abs(g) ** (p - 1.0)
    if out.ndim == 0:
        return float(out)
    return out


# chord identity ---------------------------------------------------------------


@lru_cache(maxsize=64)
def _gauss_legendre01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _gauss_jacobi(m: int, beta: float):
    # weight (1 + x)^beta on [-1, 1]
    x, w = special.roots_jacobi(m, 0.0, beta)
    return x, w


def _power_from(length: float, e: float, m: int) -> float:
    """Integral of |t|^e over an interval of the given length starting at 0."""
    if length == 0.0:
        return 0.0
    x, w = _gauss_jacobi(m, e)
    # the remaining smooth factor is identically one; keep the generic form
    f = np.ones_like(x)
    return float((length / 2.0) ** (e + 1.0) * np.dot(w, f))


def chord_integral(a: float, b: float, p: float, quad_nodes: int = 24, split: bool = True) -> float:
    """Integral over t in [0,1] of |t a + (1-t) b|^(p-2).

    The integrand vanishes or blows up where ``t a + (1-t) b`` changes sign,
    at ``t* = b / (b - a)``. With ``split`` the integral is cut there and each
    piece uses a Gauss-Jacobi rule absorbing ``|t - t*|^(p-2)``.
    """
    e = p - 2.0
    if a == b:
        if a == 0.0:
            return math.inf if p < 2 else (1.0 if p == 2 else 0.0)
        return abs(a) ** e
    slope = abs(a - b)
    tstar = b / (b - a)
    if split and -0.5 < tstar < 1.5:
        # distances from t* to the endpoints, free of the rounding in t*
        d0, d1 = abs(b) / slope, abs(a) / slope
        # the signs of a and b, not the rounded t*, tell whether [0, 1] contains t*
        if a * b <= 0.0:
            val = _power_from(d1, e, quad_nodes) + _power_from(d0, e, quad_nodes)
        else:
            val = _power_from(max(d0, d1), e, quad_nodes) - _power_from(min(d0, d1), e, quad_nodes)
        return slope**e * val
    t, w = _gauss_legendre01(max(quad_nodes, 40))
    return float(np.dot(w, np.abs(t * a + (1.0 - t) * b) ** e))


def chord_bound(a: float, b: float, p: float) -> float:
    """Upper bound for the chord integral: 1*(|a|^(p-2)+|b|^(p-2)) or 4/(p-1)|a-b|^(p-2)."""
    if p >= 2:
        return abs(a) ** (p - 2) + abs(b) ** (p - 2)
    if a == b:
        return math.inf
    return 4.0 / (p - 1.0) * abs(a - b) ** (p - 2)


def chord_identity_check(a, b, p: float, quad_nodes: int = 24, split: bool = True, tol: float = 1e-9) -> AuditReport:
    """Verify L(a) - L(b) = (p-1)(a-b) * chord_integral(a, b) on sample pairs.

    Each record carries the residual, the integral, its bound and the
    monotone-difference margin (L(a)-L(b))(a-b) - (|a|-|b|)(|a|^(p-1)-|b|^(p-1)).
    """
    t0 = time.perf_counter()
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    rep = AuditReport(
        "chord_identity",
        params={"p": p, "quad_nodes": quad_nodes, "split": split, "count": int(a_arr.size)},
        tolerances={"residual": tol, "bound_slack": 1e-12},
    )
    worst = 0.0
    for ai, bi in zip(a_arr, b_arr):
        ai, bi = float(ai), float(bi)
        if ai == 0.0 and bi == 0.0:
            continue
        integral = chord_integral(ai, bi, p, quad_nodes, split)
        lhs = L_map(ai, p) - L_map(bi, p)
        rhs = (p - 1.0) * (ai - bi) * integral
        resid = abs(lhs - rhs)
        bound = chord_bound(ai, bi, p)
        mono = lhs * (ai - bi) - (abs(ai) - abs(bi)) * (abs(ai) ** (p - 1) - abs(bi) ** (p - 1))
        scale = max(1.0, abs(lhs))
        ok = resid < tol and integral <= bound * (1 + 1e-12) and mono >= -1e-12 * scale * max(1.0, abs(ai - bi))
        worst = max(worst, resid)
        rep.add(ok, a=ai, b=bi, lhs=lhs, rhs=rhs, residual=resid, integral=integral, bound=bound, monotone_margin=mono)
    rep.summary = {"max_residual": worst}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


# right-hand sides -----------------------------------------------------------


@dataclass(frozen=True)
class RhsSpec:
    """Right-hand side f(x, t, eta) with declared growth data.

    Parameters
    ----------
    f : callable
        ``f(x, t, eta)``; ``x`` is a point (array of shape (n,)).
    gamma : callable
        Nonnegative continuous function of ``|t|``.
    phi_bound : callable
        Locally bounded function of ``x``.
    lip_eta : float
        Lipschitz constant of ``f`` in ``eta``.
    monotone_t : bool
        Whether ``f`` is claimed non-increasing in ``t``.
    domain : tuple or None
        Box ``((lo...), (hi...))`` where ``f`` is declared.
    """

    f: Callable
    gamma: Callable = lambda t: 0.0
    phi_bound: Callable = lambda x: 0.0
    lip_eta: float = 0.0
    monotone_t: bool = True
    domain: tuple | None = None
    label: str = "custom"

    def __call__(self, x, t, eta) -> float:
        return float(self.f(np.atleast_1d(np.asarray(x, dtype=float)), float(t), float(eta)))

    def in_domain(self, x, radius: float = 0.0) -> bool:
        if self.domain is None:
            return True
        lo, hi = (np.asarray(v, dtype=float) for v in self.domain)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x - radius >= lo - 1e-15) and np.all(x + radius <= hi + 1e-15))


RHS_KINDS = ("constant", "minus_t", "abs_x", "eta_power")


def rhs_from_terms(terms: Sequence[dict], p: float, t_max: float = 1.0, domain=None) -> RhsSpec:
    """Build a catalog right-hand side as a sum of simple terms.

    Term kinds: ``constant`` (coef), ``minus_t`` (coef * -t), ``abs_x``
    (coef * |x|), ``eta_power`` (coef * |eta|^power). The growth data are
    derived conservatively; ``minus_t`` is absorbed into ``phi`` using the
    bounded sample range ``|t| <= t_max``.
    """
    parsed = []
    for i, term in enumerate(terms):
        kind = term.get("kind")
        if kind not in RHS_KINDS:
            raise ConfigError(f"rhs.terms[{i}].kind", f"one of {RHS_KINDS}", kind)
        parsed.append((kind, float(term.get("coef", 1.0)), float(term.get("power", (p - 1) / p))))
    e_growth = (p - 1.0) / p

    def f(x, t, eta):
        val = 0.0
        for kind, c, e in parsed:
            if kind == "constant":
                val += c
            elif kind == "minus_t":
                val -= c * t
            elif kind == "abs_x":
                val += c * float(np.linalg.norm(x))
            else:
                val += c * abs(eta) ** e
        return val

    gam = sum(abs(c) for k, c, e in parsed if k == "eta_power" and e == e_growth)
    phi_const = sum(abs(c) for k, c, _ in parsed if k == "constant") + sum(abs(c) * t_max for k, c, _ in parsed if k == "minus_t")
    phi_x = sum(abs(c) for k, c, _ in parsed if k == "abs_x")
    lip = math.inf if any(k == "eta_power" and e < 1 and c != 0 for k, c, e in parsed) else sum(
        abs(c) * max(e, 1.0) for k, c, e in parsed if k == "eta_power"
    )
    mono = all(c >= 0 for k, c, _ in parsed if k == "minus_t")
    return RhsSpec(
        f=f,
        gamma=lambda t, g=gam: g,
        phi_bound=lambda x, a=phi_const, b=phi_x: a + b * float(np.linalg.norm(x)),
        lip_eta=lip,
        monotone_t=mono,
        domain=domain,
        label="+".join(k for k, _, _ in parsed) or "zero",
    )


def growth_audit(rhs: RhsSpec, params, samples: Sequence, tol: float = 1e-12) -> AuditReport:
    """Check the declared growth, t-monotonicity and eta-Lipschitz bounds.

    ``samples`` is a list of ``(x, t, eta)`` triples. Monotonicity is tested
    on the pairs ``(t, t + 0.5)`` and the Lipschitz bound on ``(eta, eta + 0.5)``.
    """
    t0 = time.perf_counter()
    p = params.p
    e = (p - 1.0) / p
    rep = AuditReport("growth_audit", params={"p": p, "rhs": rhs.label, "count": len(samples)}, tolerances={"margin": tol})
    first_violation = None
    for i, (x, t, eta) in enumerate(samples):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        fv = rhs(x, t, eta)
        margin = rhs.gamma(abs(t)) * abs(eta) ** e + rhs.phi_bound(x) - abs(fv)
        ok_g = margin >= -tol
        mono_gap = 0.0
        if rhs.monotone_t:
            mono_gap = rhs(x, t + 0.5, eta) - fv
        ok_m = mono_gap <= tol
        lip_gap = 0.0
        if math.isfinite(rhs.lip_eta):
            lip_gap = abs(rhs(x, t, eta + 0.5) - fv) - rhs.lip_eta * 0.5
        ok_l = lip_gap <= tol * max(1.0, abs(fv))
        ok = ok_g and ok_m and ok_l
        if not ok and first_violation is None:
            first_violation = i
        rep.add(ok, index=i, x=float(x[0]), t=float(t), eta=float(eta), f=fv, margin=margin, monotone_gap=mono_gap, lip_gap=lip_gap)
    rep.summary = {"first_violation": -1 if first_violation is None else first_violation}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


# C2-beta certification -------------------------------------------------------------


@dataclass(frozen=True)
class C2BetaCertificate:
    """Outcome of a C2-beta membership test on a box."""

    beta: float
    sup_quotient: float
    critical_set_nodes: tuple = field(default_factory=tuple)
    region: tuple = ()

    @property
    def valid(self) -> bool:
        return math.isfinite(self.sup_quotient)

    def admits(self, params) -> bool:
        """Usable in the singular range iff finite and beta > sp/(p-1)."""
        return self.valid and self.beta > params.s * params.p / (params.p - 1.0)

    def covers(self, x) -> bool:
        lo, hi = (np.asarray(v, dtype=float) for v in self.region)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def is_critical(self, x, tol: float = 1e-9) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return any(np.linalg.norm(x - np.asarray(c)) <= tol for c in self.critical_set_nodes)


def _critical_points(u, lo, hi, density: int) -> list[np.ndarray]:
    n = lo.size
    if n == 1:
        xs = np.linspace(lo[0], hi[0], max(int(density * (hi[0] - lo[0])), 16) + 1)
        g = u.grad(xs[:, None])[:, 0]
        found = [xs[i] for i in np.flatnonzero(g == 0.0)]
        for i in np.flatnonzero(g[:-1] * g[1:] < 0):
            root = optimize.brentq(lambda t: float(u.grad(np.array([[t]]))[0, 0]), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
            found.append(root)
        pts = sorted(set(float(v) for v in found))
        return [np.array([v]) for v in pts]
    m = max(int(density * max(hi - lo)), 16) + 1
    ax = [np.linspace(lo[k], hi[k], m) for k in range(n)]
    mesh = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, n)
    gn = np.linalg.norm(u.grad(mesh), axis=1).reshape(m, m)
    cand = []
    for i in range(m):
        for j in range(m):
            nb = gn[max(i - 1, 0) : i + 2, max(j - 1, 0) : j + 2]
            if gn[i, j] <= nb.min() and gn[i, j] < 0.5 * (gn.max() + 1e-300):
                cand.append(mesh[i * m + j])
    found: list[np.ndarray] = []
    for c in cand:
        sol = optimize.root(lambda y: u.grad(y[None, :])[0], c, jac=lambda y: u.hess(y[None, :])[0], tol=1e-15)
        y = sol.x
        if np.linalg.norm(u.grad(y[None, :])[0]) < 1e-10 and np.all(y >= lo) and np.all(y <= hi):
            if not any(np.linalg.norm(y - f) < 1e-8 for f in found):
                found.append(y)
    return found


def c2beta_certify(u, region, beta: float, sample_density: int = 200, cap: float = 1e6) -> C2BetaCertificate:
    """Sample the C2-beta quotient of an analytic field on a box.

    The quotient is ``min(d,1)^(beta-1)/|grad u| + |D^2 u| / d^(beta-2)`` with
    ``d`` the distance to the located critical set. Samples combine a uniform
    grid with geometric sequences approaching each critical point down to
    ``1e-14``. Raises ``CertificationFailed`` when the sup exceeds ``cap``.
    """
    lo = np.atleast_1d(np.asarray(region[0], dtype=float))
    hi = np.atleast_1d(np.asarray(region[1], dtype=float))
    n = lo.size
    crit = _critical_points(u, lo, hi, sample_density)
    m = max(int(sample_density * max(hi - lo)), 16) + 1
    ax = [np.linspace(lo[k], hi[k], m) for k in range(n)]
    pts = [np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, n)]
    radii = np.geomspace(1e-14, 0.5, 200)
    dirs = np.eye(n) if n == 1 else np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [0.6, 0.8], [-0.8, 0.6]])
    for c in crit:
        for d in np.concatenate([dirs, -dirs]) if n == 1 else dirs:
            pts.append(c[None, :] + radii[:, None] * d[None, :])
    pts = np.concatenate(pts)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    pts = pts[inside]
    if crit:
        cset = np.array(crit)
        dist = np.min(np.linalg.norm(pts[:, None, :] - cset[None, :, :], axis=2), axis=1)
    else:
        dist = np.full(len(pts), float(np.linalg.norm(hi - lo)))
    keep = dist > 0
    pts, dist = pts[keep], dist[keep]
    g = np.linalg.norm(u.grad(pts), axis=1)
    H = np.linalg.norm(u.hess(pts), ord=2, axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = np.where(g > 0, np.minimum(dist, 1.0) ** (beta - 1.0) / g, np.inf)
        q2 = H / dist ** (beta - 2.0)
    q = np.nan_to_num(q1 + q2, nan=np.inf)
    sup_q = float(np.max(q)) if q.size else 0.0
    if not sup_q <= cap:
        raise CertificationFailed(f"C2-beta quotient {sup_q:.3e} exceeds cap {cap:.1e} (beta={beta})")
    return C2BetaCertificate(beta=float(beta), sup_quotient=sup_q, critical_set_nodes=tuple(tuple(map(float, c)) for c in crit), region=(tuple(lo), tuple(hi)))
