"""Principal-value quadrature for the fractional p-Laplacian and related integrals.

Pointwise operators are written in polar form around ``x``. In 1D there is a
single direction; in 2D the half circle [0, pi) is sampled at midpoints, and
each direction carries the symmetrized pair ``x + r w`` / ``x - r w``. Along a
ray, radii between an inner radius ``rho`` and a truncation radius ``R`` are
integrated with Gauss-Legendre rules on geometric shells. Breakpoints where
the field has kinks are inserted as extra shell edges. The ball of radius
``rho`` is discarded, with a rigorous bound recorded. Beyond ``R`` the field
is constant along rays, so that part is added in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DecayUncertified, SingularityUnresolved, SupportViolation
from .fields import Field, OperatorParams, SampledField, as_points, sphere_measure
from .report import stable_hash
from .scalar import L_map


@dataclass(frozen=True)
class QuadratureScheme:
    """Discretization knobs for the pointwise operators.

    ``rho_inner`` and ``R_trunc`` equal to 0 mean "choose automatically from
    ``tol_target``"; a positive ``rho_inner`` caps the automatic inner radius.
    ``shells`` fixes the number of geometric shells (otherwise the ratio is
    ``2**0.25``).
    """

    rho_inner: float = 0.0
    rho_smooth: float = 0.0
    R_trunc: float = 0.0
    shells: int | None = None
    angular_nodes: int = 32
    gl_nodes: int = 8
    tol_target: float = 1e-9
    rho_cap: float = 0.05

    def __post_init__(self):
        if not self.rho_inner >= 0:
            raise ConfigError("scheme.rho_inner", "rho_inner >= 0", self.rho_inner)
        if not self.rho_smooth >= 0:
            raise ConfigError("scheme.rho_smooth", "rho_smooth >= 0", self.rho_smooth)
        if not self.R_trunc >= 0:
            raise ConfigError("scheme.R_trunc", "R_trunc >= 0", self.R_trunc)
        if self.R_trunc > 0 and not self.rho_inner < self.R_trunc:
            raise ConfigError("scheme.rho_inner", "0 <= rho_inner < R_trunc", self.rho_inner)
        if self.shells is not None and not self.shells >= 8:
            raise ConfigError("scheme.shells", "shells >= 8", self.shells)
        if not self.angular_nodes >= 4:
            raise ConfigError("scheme.angular_nodes", "angular_nodes >= 4", self.angular_nodes)
        if not self.gl_nodes >= 2:
            raise ConfigError("scheme.gl_nodes", "gl_nodes >= 2", self.gl_nodes)
        if not self.tol_target > 0:
            raise ConfigError("scheme.tol_target", "tol_target > 0", self.tol_target)

    def hash(self) -> str:
        return stable_hash(asdict(self))

    def refined(self) -> "QuadratureScheme":
        """Twice the shells (or half the log-ratio) and twice the angular nodes."""
        d = asdict(self)
        d["angular_nodes"] = 2 * self.angular_nodes
        d["gl_nodes"] = self.gl_nodes + 4
        if self.shells is not None:
            d["shells"] = 2 * self.shells
        return QuadratureScheme(**d)


DEFAULT_SCHEME = QuadratureScheme()


@dataclass(frozen=True)
class PvValue:
    """A quadrature value with bounds on the discarded inner and far parts."""

    value: float
    inner_bound: float
    tail_bound: float
    rho_inner: float = 0.0
    R_trunc: float = 0.0

    @property
    def error_bound(self) -> float:
        return self.inner_bound + self.tail_bound

    def accepted(self, tol: float) -> bool:
        return self.inner_bound <= tol and self.tail_bound <= tol

    def __float__(self):
        return float(self.value)

    def row(self) -> dict:
        return {"value": self.value, "inner_bound": self.inner_bound, "tail_bound": self.tail_bound}


# nodes ------------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _gl01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _edges(r0: float, r1: float, breaks, scheme: QuadratureScheme) -> np.ndarray:
    if scheme.shells is not None:
        k = scheme.shells
    else:
        k = max(8, int(math.ceil(math.log(r1 / r0) / math.log(2.0**0.25))))
    e = r0 * (r1 / r0) ** (np.arange(k + 1) / k)
    e[0], e[-1] = r0, r1
    b = np.asarray(breaks, dtype=float)
    b = b[(b > r0) & (b < r1)]
    if b.size:
        e = np.unique(np.concatenate([e, b]))
    return e


def radial_nodes(r0: float, r1: float, breaks, scheme: QuadratureScheme) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on geometric shells of [r0, r1]."""
    e = _edges(r0, r1, breaks, scheme)
    t, w = _gl01(scheme.gl_nodes)
    a, b = e[:-1], e[1:]
    r = (a[:, None] + (b - a)[:, None] * t[None, :]).ravel()
    wr = ((b - a)[:, None] * w[None, :]).ravel()
    return r, wr


def _sign_roots(fun, r: np.ndarray, vals: np.ndarray) -> list[float]:
    """Roots of a ray increment between consecutive nodes with a sign change."""
    idx = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    out = []
    for i in idx:
        a, b = float(r[i]), float(r[i + 1])
        try:
            out.append(brentq(lambda t: float(fun(t)), a, b, xtol=1e-300, rtol=1e-15))
        except ValueError:
            continue
    return out


def _graded_breaks(roots, r0: float, r1: float, levels: int = 48) -> np.ndarray:
    """Breakpoints accumulating geometrically at interior roots of L(delta)."""
    if not roots:
        return np.empty(0)
    fr = 2.0 ** -np.arange(1, levels + 1)
    pts = [z0 * (1.0 + sgn * fr) for z0 in roots for sgn in (-1.0, 1.0)]
    pts.append(np.asarray(roots))
    b = np.concatenate(pts)
    return b[(b > r0) & (b < r1)]


def half_directions(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions covering half the sphere with weights summing to |S|/2."""
    if n == 1:
        return np.array([[1.0]]), np.array([1.0])
    th = (np.arange(m) + 0.5) * math.pi / m
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, math.pi / m)


def full_directions(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    th = (np.arange(2 * m) + 0.5) * math.pi / m
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(2 * m, math.pi / m)


def radial_kernel(r: np.ndarray, omega: np.ndarray, params: OperatorParams, rho_s: float) -> np.ndarray:
    """``g(r w) r^(n-1) (r + rho_s)^(-n-sp)`` along one ray (g symmetrized)."""
    n, a = params.n, params.sp
    k = r ** (n - 1) * (r + rho_s) ** (-(n + a))
    if params.kernel.kind == "fractional":
        return k
    z = r[:, None] * omega[None, :]
    g = 0.5 * (params.kernel.ratio(z) + params.kernel.ratio(-z))
    return g * k


def far_weight(R: float, omega: np.ndarray, params: OperatorParams, rho_s: float, m: int = 32) -> float:
    """``int_R^inf g(r w) r^(n-1) (r + rho_s)^(-n-sp) dr`` via ``v = (r/R)^(-sp)``."""
    n, a = params.n, params.sp
    base = R ** (-a) / a
    if rho_s == 0.0 and params.kernel.kind == "fractional":
        return base
    if rho_s == 0.0 and params.kernel.constant_ratio:
        return base * params.kernel.scale
    v, w = _gl01(m)
    r = R * v ** (-1.0 / a)
    fac = (r / (r + rho_s)) ** (n + a)
    if params.kernel.kind != "fractional":
        z = r[:, None] * omega[None, :]
        fac = fac * 0.5 * (params.kernel.ratio(z) + params.kernel.ratio(-z))
    return base * float(np.dot(w, fac))


# inner-ball planning ---------------------------------------------------------------


def _solve_rho(C: float, kappa: float, tau: float) -> float:
    """Largest rho with ``C rho^kappa <= tau``."""
    if C <= 0:
        return math.inf
    return (tau / C) ** (1.0 / kappa)


@dataclass
class _InnerPlan:
    rho: float
    bound: float
    extra: float = 0.0


def _candidates_to_plan(cands, params, rho_s, rho_max, rho_floor, tau) -> _InnerPlan:
    """Pick rho from power-law bounds ``C r^beta`` on the angular-integrated integrand.

    Each candidate ``(C, beta, rmax)`` states that the symmetrized integrand,
    integrated over half the sphere, is at most ``C r^beta`` for ``r <= rmax``.
    Against the kernel ``r^(-1-sp)`` this gives ``C rho^(beta-sp)/(beta-sp)``; smoothing by ``rho_s``
    offers the alternative ``C r^(beta + n - 1) rho_s^(-n-sp)``. Bounds are
    multiplied by the ellipticity constant.
    """
    n, a = params.n, params.sp
    lam = params.lam
    best_rho, best_bound = 0.0, math.inf

    def bound_at(C, beta, rho):
        vals = []
        if beta > a:
            vals.append(C * rho ** (beta - a) / (beta - a))
        if rho_s > 0:
            vals.append(C * rho_s ** (-(n + a)) * rho ** (beta + n) / (beta + n))
        return lam * min(vals) if vals else math.inf

    for C, beta, rmax in cands:
        lim = min(rho_max, rmax)
        opts = []
        if beta > a:
            opts.append(_solve_rho(lam * C / (beta - a), beta - a, tau))
        if rho_s > 0:
            opts.append(_solve_rho(lam * C * rho_s ** (-(n + a)) / (beta + n), beta + n, tau))
        if not opts:
            continue
        rho = min(max(opts), lim)
        if rho <= 0:
            continue
        rho = max(rho, min(rho_floor, lim))
        b = bound_at(C, beta, rho)
        if b < best_bound or (b == best_bound and rho > best_rho):
            best_rho, best_bound = rho, b
    return _InnerPlan(best_rho, best_bound)


def _sampled_node_plan(u: SampledField, x, params, scheme, rho_s, kind, v=None) -> _InnerPlan | None:
    """Exact inner treatment for 1D sampled fields (piecewise linear)."""
    if u.n != 1 or kind != "plap":
        return None
    h = float(u.grid.h[0])
    xs = float(x[0])
    lo, hi = u._lo[0], u._hi[0]
    if not (lo < xs < hi):
        return None
    slopes = u.node_slopes(x)
    if slopes is None:
        # inside a cell: odd symmetric increments cancel exactly
        t = (xs - lo) / h
        d = min(t - math.floor(t), math.ceil(t) - t) * h
        if d <= 0:
            return None
        return _InnerPlan(d, 0.0)
    gl, gr = slopes
    p, a = params.p, params.sp
    c = float(L_map(gl, p) - L_map(gr, p))
    rho = 0.5 * h
    if not params.kernel.constant_ratio:
        return None
    g = 1.0 if params.kernel.kind == "fractional" else params.kernel.scale
    if c == 0.0:
        return _InnerPlan(rho, 0.0)
    if rho_s == 0.0:
        if p - 1.0 <= a:
            raise SingularityUnresolved(f"kink at sampled node x={xs} with p-1 <= sp and no kernel smoothing")
        return _InnerPlan(rho, 0.0, g * c * rho ** (p - 1 - a) / (p - 1 - a))
    t, w = _gl01(24)
    z = rho * t**4
    wz = rho * 4 * t**3 * w
    val = float(np.dot(wz, c * z ** (p - 1) * (z + rho_s) ** (-1 - a)))
    return _InnerPlan(rho, 0.0, g * val)


def _plan_inner(u: Field, x, params, scheme, kind, v=None, certificate=None) -> _InnerPlan:
    n, p, a = params.n, params.p, params.sp
    rho_s = scheme.rho_smooth
    tau = scheme.tol_target / 10.0
    cap = scheme.rho_cap * u.scale if scheme.rho_inner == 0 else scheme.rho_inner
    if v is not None:
        cap = min(cap, scheme.rho_cap * v.scale) if scheme.rho_inner == 0 else cap
    floor = 1e-250 if (u.exact_delta and (v is None or v.exact_delta)) else 1e-6 * min(u.scale, v.scale if v is not None else u.scale)
    floor = min(floor, cap)
    hs = 1.0 if n == 1 else math.pi  # half-sphere measure

    if isinstance(u, SampledField) and v is None:
        plan = _sampled_node_plan(u, x, params, scheme, rho_s, kind)
        if plan is not None:
            return plan

    kd_u = u.kink_distance(x)
    kd = kd_u if v is None else min(kd_u, v.kink_distance(x))
    smooth_r = min(kd, cap)

    if kind in ("ds", "pair"):
        # Lipschitz bounds suffice: |du| <= M r on both sides
        if kd_u > 0:
            M1u, _, _ = u.local_bounds(x, smooth_r if kd_u > 0 else cap)
        else:
            M1u = u.lipschitz
        if kind == "ds":
            C = 2.0 * hs * M1u**p
        else:
            kv = v.kink_distance(x)
            M1v = v.local_bounds(x, min(kv, cap))[0] if kv > 0 else v.lipschitz
            C = 2.0 * hs * M1u ** (p - 1) * M1v
        if not math.isfinite(C):
            raise SingularityUnresolved("no Lipschitz bound near x for the inner ball")
        return _candidates_to_plan([(C, p, cap)], params, rho_s, cap, floor, tau)

    # plap
    cands = []
    if kd == 0.0:
        Lip = u.lipschitz
        if not math.isfinite(Lip):
            raise SingularityUnresolved("x sits on a kink of a field without a Lipschitz bound")
        # |L(u(x)-u(x+z)) + L(u(x)-u(x-z))| <= 2 (Lip r)^(p-1)
        Ck = 2.0 * Lip ** (p - 1)
        beta = p - 1.0
        if beta <= a and rho_s == 0.0:
            raise SingularityUnresolved(f"x on a kink with p-1 <= sp (p={p}, sp={a}); smoothing required")
        cands.append((hs * Ck, beta, cap))
        return _candidates_to_plan(cands, params, rho_s, cap, floor, tau)

    M1, M2, g = u.local_bounds(x, smooth_r)
    if M1 == 0.0 and M2 == 0.0:
        # locally constant: the symmetrized integrand vanishes on the ball
        return _InnerPlan(smooth_r, 0.0)
    crit_tol = 1e-12 * max(M1, 1e-300)
    if n == 1 and g > crit_tol and rho_s == 0.0 and u.has_closed_derivatives and params.kernel.constant_ratio:
        model = _regular_point_model(u, x, params, min(smooth_r, g / M2 if M2 > 0 else smooth_r), tau)
        if model is not None:
            return model
    if p >= 2:
        cands.append((hs * (p - 1) * M2 * M1 ** (p - 2), p, smooth_r))
    else:
        generic_ok = 2.0 * (p - 1) > a
        if generic_ok or rho_s > 0:
            cands.append((hs * 4.0 * M2 ** (p - 1), 2.0 * (p - 1), smooth_r))
        if g > crit_tol and M2 > 0:
            if n == 1:
                cands.append(((p - 1) * M2 * (g / 2.0) ** (p - 2), p, min(smooth_r, g / M2)))
            else:
                A2 = _cos_power_integral(p - 2)
                # directions nearly orthogonal to the gradient use the generic bound
                c1 = (p - 1) * M2 * (g / 2.0) ** (p - 2) * A2
                c2 = 4.0 * math.pi * M2**p / g
                cands.append(("two", c1, c2, smooth_r))
        elif g > crit_tol and M2 == 0:
            cands.append((0.0, p, smooth_r))
        if g <= crit_tol and certificate is not None and certificate.admits(params) and certificate.covers(x):
            beta = certificate.beta
            Q = certificate.sup_quotient
            C = hs * 2.0 * (Q / (beta * (beta - 1.0))) ** (p - 1)
            cands.append((C, beta * (p - 1), min(smooth_r, 1.0)))
        if not cands:
            raise SingularityUnresolved(
                f"singular range p={p} <= 2/(2-s) at a critical point without C2-beta certificate and rho_smooth = 0"
            )
    plain = [c for c in cands if c[0] != "two"]
    plan = _candidates_to_plan(plain, params, rho_s, smooth_r, floor, tau) if plain else _InnerPlan(0.0, math.inf)
    for c in cands:
        if c[0] == "two":
            _, c1, c2, rmax = c
            sub = [(c1, p, rmax), (c2, 2 * p - 1, rmax)]
            # split the budget between the two terms
            rs = []
            for C, beta, _ in sub:
                pl = _candidates_to_plan([(C, beta, rmax)], params, rho_s, smooth_r, floor, tau / 2)
                rs.append(pl.rho)
            rho = max(min(rs), min(floor, rmax))
            bound = sum(_candidates_to_plan([(C, beta, rho)], params, rho_s, rho, rho, math.inf).bound for C, beta, _ in sub)
            if bound < plan.bound:
                plan = _InnerPlan(rho, bound)
    if plan.rho <= 0 or not math.isfinite(plan.bound):
        raise SingularityUnresolved("could not bound the inner ball contribution")
    return plan


def _regular_point_model(u: Field, x, params, ell: float, tau: float) -> _InnerPlan | None:
    """Inner ball of a 1D regular point from the leading Taylor term.

    With ``g = u'(x) != 0`` and ``h = u''(x)`` the folded integrand is
    ``-(p-1) |g|^(p-2) h z^p (1 + O(z^2))``, so the ball ``[0, rho]`` contributes
    ``-(p-1) |g|^(p-2) h rho^(p-sp) / (p-sp)`` up to a relative ``O(rho^2)``.
    In floating point the folded sum cancels to a relative accuracy of about
    ``eps g / (h z)``, so integrating the raw increments toward 0 loses digits;
    the model keeps the numerical part at ``rho >= 1e-7 ell``. The remainder is
    bounded from the model mismatch at ``rho``, assuming it decays at least
    like ``(z/rho)^p``.
    """
    p, a = params.p, params.sp
    xx = x[None, :]
    g = float(u.grad(xx)[0, 0])
    h = float(u.hess(xx)[0, 0, 0])
    kfac = 1.0 if params.kernel.kind == "fractional" else params.kernel.scale
    c = -(p - 1.0) * abs(g) ** (p - 2.0) * h
    best = None
    for k in range(4, 8):
        rho = 10.0 ** (-k) * ell
        z = np.array([[rho], [-rho]])
        d = u.delta(x, z)
        folded = float(L_map(-d[0], p) + L_map(-d[1], p))
        gap = abs(folded - c * rho**p)
        bound = 2.0 * kfac * params.lam * gap * rho ** (-a) / (p - a)
        plan = _InnerPlan(rho, bound, kfac * c * rho ** (p - a) / (p - a))
        if best is None or bound < best.bound:
            best = plan
        if bound <= tau:
            return plan
    return best


@lru_cache(maxsize=64)
def _cos_power_integral(e: float) -> float:
    """Integral of |cos t|^e over [0, pi] (e > -1)."""
    return math.sqrt(math.pi) * math.gamma((e + 1) / 2) / math.gamma(e / 2 + 1)


# truncation -------------------------------------------------------------------------


def _truncation(fields, x, params, scheme, scale_fn, rho) -> tuple[float, bool, float]:
    """Return (R, far_model_available, tail_bound)."""
    xnorm = float(np.linalg.norm(x))
    radii = [f.far_radius for f in fields]
    if all(r is not None for r in radii):
        R = max(max(radii) + xnorm, 2.0 * rho, scheme.R_trunc) * (1 + 1e-12) + 1e-12
        return R, True, 0.0
    # far model unknown: discard beyond R with a sup bound on the integrand
    tau = scheme.tol_target / 10.0
    smax = scale_fn()
    a = params.sp
    meas = sphere_measure(params.n)
    R = (meas * params.lam * smax / (a * tau)) ** (1.0 / a)
    R = max(R, scheme.R_trunc, 4.0 * rho, max((r for r in radii if r is not None), default=0.0) + xnorm)
    return R, False, meas * params.lam * smax * R ** (-a) / a


def _check(u: Field):
    if not isinstance(u, Field):
        raise TypeError("expected a Field")
    u.certify_decay()


# pointwise operators ----------------------------------------------------------------


def _ray_breaks(fields, x, omega):
    parts = []
    for f in fields:
        parts.append(f.ray_breaks(x, omega))
        parts.append(f.ray_breaks(x, -omega))
    return np.concatenate(parts) if parts else np.empty(0)


def _eval_generic(kind, u, x, params, scheme, v=None, certificate=None) -> PvValue:
    _check(u)
    if v is not None:
        _check(v)
    if u.n != params.n or (v is not None and v.n != params.n):
        raise ConfigError("params.n", "field dimension equal to params.n", params.n)
    x = as_points(x, params.n)[0]
    if not np.all(np.isfinite(x)):
        raise ConfigError("x", "finite point", x.tolist())
    p = params.p
    rho_s = scheme.rho_smooth
    fields = [u] if v is None else [u, v]
    plan = _plan_inner(u, x, params, scheme, kind, v=v, certificate=certificate)

    if kind == "plap":
        scale_fn = lambda: 2.0 * u.osc ** (p - 1)
    elif kind == "ds":
        scale_fn = lambda: 2.0 * u.osc**p
    else:
        scale_fn = lambda: 2.0 * u.osc ** (p - 1) * v.osc
    R, far_ok, tail_bound = _truncation(fields, x, params, scheme, scale_fn, plan.rho)

    dirs, dw = half_directions(params.n, scheme.angular_nodes)
    total = plan.extra
    for omega, w in zip(dirs, dw):
        breaks = _ray_breaks(fields, x, omega)
        r, wr = radial_nodes(plan.rho, R, breaks, scheme)
        z = r[:, None] * omega[None, :]
        du_p = u.delta(x, z)
        du_m = u.delta(x, -z)
        # L(delta) has a cusp where the increment changes sign; grade toward it
        roots = _sign_roots(lambda t: u.delta(x, t * omega[None, :])[0], r, du_p)
        roots += _sign_roots(lambda t: u.delta(x, -t * omega[None, :])[0], r, du_m)
        # kinks of u may also put L(delta) through a one-sided cusp
        roots += [float(b) for b in breaks if plan.rho < b < R]
        if roots:
            r, wr = radial_nodes(plan.rho, R, np.concatenate([breaks, _graded_breaks(roots, plan.rho, R)]), scheme)
            z = r[:, None] * omega[None, :]
            du_p = u.delta(x, z)
            du_m = u.delta(x, -z)
        if kind == "plap":
            integ = L_map(-du_p, p) + L_map(-du_m, p)
        elif kind == "ds":
            integ = np.abs(du_p) ** p + np.abs(du_m) ** p
        else:
            integ = L_map(-du_p, p) * (-v.delta(x, z)) + L_map(-du_m, p) * (-v.delta(x, -z))
        kern = radial_kernel(r, omega, params, rho_s)
        total += w * float(np.dot(wr, kern * integ))
        if far_ok:
            pm = np.stack([omega, -omega])
            fu = u.far_delta(x, pm)
            if kind == "plap":
                fint = L_map(-fu, p)
            elif kind == "ds":
                fint = np.abs(fu) ** p
            else:
                fint = L_map(-fu, p) * (-v.far_delta(x, pm))
            if params.kernel.kind == "fractional" or params.kernel.constant_ratio:
                total += w * far_weight(R, omega, params, rho_s) * float(np.sum(fint))
            else:
                total += w * sum(far_weight(R, d, params, rho_s) * fi for d, fi in zip(pm, fint))
    return PvValue(float(total), float(plan.bound), float(tail_bound), float(plan.rho), float(R))


def eval_plap(u: Field, x, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME, certificate=None) -> PvValue:
    """Principal value of ``int L(u(x) - u(y)) K(x, y) dy``.

    Raises ``SingularityUnresolved`` in the singular range at a critical
    point unless a C2-beta ``certificate`` covers ``x`` or ``rho_smooth > 0``.
    """
    return _eval_generic("plap", u, x, params, scheme, certificate=certificate)


def eval_ds(u: Field, x, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME) -> PvValue:
    """``int |u(x) - u(y)|^p K(x, y) dy`` (no principal value needed)."""
    return _eval_generic("ds", u, x, params, scheme)


def eval_pairing(u: Field, v: Field, x, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME) -> PvValue:
    """``int L(u(x) - u(y)) (v(x) - v(y)) K(x, y) dy``."""
    return _eval_generic("pair", u, x, params, scheme, v=v)


def batch_rows(op, u: Field, points, params, scheme=DEFAULT_SCHEME, **kw) -> list[dict]:
    """Evaluate ``op`` at many points; rows ``x, value, inner_bound, tail_bound, scheme``."""
    rows = []
    h = scheme.hash()
    for x in as_points(points, params.n):
        res = op(u, x, params, scheme, **kw)
        row = {f"x{k}": float(x[k]) for k in range(params.n)}
        row.update(res.row())
        row["scheme"] = h
        rows.append(row)
    return rows


# double integrals ------------------------------------------------------------------


def _graded_panels(a: float, b: float, levels: int = 12, interior: int = 8) -> np.ndarray:
    """Panel edges on [a, b] graded geometrically toward both endpoints."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fr = np.concatenate([0.5 ** np.arange(levels, 0, -1), np.linspace(0.5, 1.0, interior + 1)[1:]])
    left = mid - half * fr[::-1]
    right = mid + half * fr
    e = np.unique(np.concatenate([[a], a + half * 2.0 ** -np.arange(levels, 0, -1), left, [mid], right, [b]]))
    return e


def _gl_on_edges(e: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = _gl01(m)
    a, b = e[:-1], e[1:]
    return (a[:, None] + (b - a)[:, None] * t[None, :]).ravel(), ((b - a)[:, None] * w[None, :]).ravel()


def _ray_integral_from(u, x, omega, t0, params, scheme, fn, rho_s=0.0) -> float:
    """``int_{t0}^inf fn(delta) g r^(n-1) k dr`` along one ray, with far model."""
    R = u.far_radius
    if R is None:
        raise DecayUncertified("exterior integral needs a far model")
    # rounding can put a boundary-adjacent point on the sphere itself
    t0 = max(t0, 1e-12 * u.scale)
    R = max(R + float(np.linalg.norm(x)), 2.0 * t0) * (1 + 1e-12) + 1e-12
    r, wr = radial_nodes(t0, R, u.ray_breaks(x, omega), scheme)
    z = r[:, None] * omega[None, :]
    val = float(np.dot(wr, radial_kernel(r, omega, params, rho_s) * fn(u.delta(x, z))))
    fd = u.far_delta(x, omega[None, :])
    return val + far_weight(R, omega, params, rho_s) * float(fn(fd)[0])


def _exit_distance_ball(x, omega, c, R) -> float:
    """Positive root of ``|x + t omega - c| = R`` for ``x`` inside the ball."""
    d = x - c
    b = float(np.dot(omega, d))
    dn = float(np.linalg.norm(d))
    gap = (R - dn) * (R + dn)
    root = math.sqrt(max(b * b + gap, 0.0))
    if b <= 0:
        return -b + root
    return gap / (b + root) if b + root > 0 else 0.0


def weak_form(u: Field, phi: Field, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME, panels: int = 12, angular: int | None = None) -> float:
    """Double integral of ``L(u(x)-u(y)) (phi(x)-phi(y)) K(x,y)`` over R^n x R^n.

    With ``K = supp(phi)``, the integral equals the pairing integrated over
    ``K`` plus the exterior interaction ``int_K phi(x) int_{R^n \\ K} L(u(x)-u(y)) K dy dx``.
    Both pieces are computed with panels graded toward the boundary of ``K``.
    """
    _check(u)
    _check(phi)
    sb = phi.support_ball()
    if sb is None:
        raise SupportViolation("phi must be a nonnegative compactly supported catalog bump")
    c, Rk = sb
    if phi.inf < 0:
        raise SupportViolation("phi must be nonnegative")
    grid = getattr(u, "grid", None)
    if grid is not None:
        lo, hi = np.array(grid.lo), np.array(grid.hi)
        if np.any(c - Rk <= lo) or np.any(c + Rk >= hi):
            raise SupportViolation("phi support touches the box boundary of u")
    p = params.p
    n = params.n
    fn = lambda d: L_map(-d, p)
    if n == 1:
        xs, wx = _gl_on_edges(_graded_panels(c[0] - Rk, c[0] + Rk, levels=panels), 8)
        total = 0.0
        for xv, w in zip(xs, wx):
            x = np.array([xv])
            pair = eval_pairing(u, phi, x, params, scheme).value
            if phi.value(x) == 0.0:
                total += w * pair
                continue
            ext = sum(_ray_integral_from(u, x, np.array([d]), _exit_distance_ball(x, np.array([d]), c, Rk), params, scheme, fn) for d in (1.0, -1.0))
            total += w * (pair + phi.value(x) * ext)
        return float(total)
    m = angular or max(16, scheme.angular_nodes)
    rs, wr = _gl_on_edges(np.concatenate([np.linspace(0, 0.5 * Rk, 5)[:-1], Rk - 0.5 * Rk * 0.5 ** np.arange(0, panels)[::-1] * 1.0, [Rk]]), 6)
    th = (np.arange(2 * m) + 0.5) * math.pi / m
    dirs, dwts = full_directions(2, m)
    total = 0.0
    for r, w in zip(rs, wr):
        for t in th:
            x = c + r * np.array([math.cos(t), math.sin(t)])
            pair = eval_pairing(u, phi, x, params, scheme).value
            ext = 0.0
            for om, dw in zip(dirs, dwts):
                ext += dw * _ray_integral_from(u, x, om, _exit_distance_ball(x, om, c, Rk), params, scheme, fn)
            total += w * r * (math.pi / m) * (pair + phi.value(x) * ext)
    return float(total)


def weak_pairing(u: Field, phi: Field, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME, panels: int = 12, angular: int | None = None) -> float:
    """Half of :func:`weak_form`, the normalization that pairs with :func:`eval_plap`.

    The double integral visits every pair ``(x, y)`` twice, so for smooth ``u``
    it equals ``2 int eval_plap(u, x) phi(x) dx``; this function returns that
    integral itself.
    """
    return 0.5 * weak_form(u, phi, params, scheme, panels, angular)


def integrate_ball(fn, center, radius: float, n: int, panels: int = 12, order: int = 8, angular: int = 32) -> float:
    """Integrate ``fn(x) -> float`` over a ball with boundary-graded panels."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if n == 1:
        xs, wx = _gl_on_edges(_graded_panels(c[0] - radius, c[0] + radius, levels=panels), order)
        return float(sum(w * fn(np.array([xv])) for xv, w in zip(xs, wx)))
    rs, wr = _gl_on_edges(np.linspace(0.0, radius, panels + 1), order // 2 + 2)
    th = (np.arange(angular) + 0.5) * 2 * math.pi / angular
    tot = 0.0
    for r, w in zip(rs, wr):
        for t in th:
            tot += w * r * (2 * math.pi / angular) * fn(c + r * np.array([math.cos(t), math.sin(t)]))
    return float(tot)


def gagliardo(u: Field, domain, params: OperatorParams, scheme: QuadratureScheme = DEFAULT_SCHEME, panels: int = 24) -> float:
    """Gagliardo energy ``int_O int_O |u(x)-u(y)|^p K(x,y) dx dy`` on a box ``O``."""
    _check(u)
    lo = np.atleast_1d(np.asarray(domain[0], dtype=float))
    hi = np.atleast_1d(np.asarray(domain[1], dtype=float))
    n, p, a = params.n, params.p, params.sp
    if lo.size != n or np.any(hi <= lo):
        raise ConfigError("domain", "box with hi > lo in params.n dimensions", (lo.tolist(), hi.tolist()))
    rho_s = scheme.rho_smooth

    lip = u.lipschitz
    tau = scheme.tol_target / 10.0
    if math.isfinite(lip) and lip > 0:
        # one-sided inner piece is at most lam Lip^p r0^(p-sp) / (p-sp) per direction
        r0_default = (tau * (p - a) / (params.lam * lip**p)) ** (1.0 / (p - a))
    else:
        r0_default = 1e-12 * u.scale
    r0_default = max(r0_default, 1e-250 if u.exact_delta else 1e-9 * u.scale)

    def along(x, omega, t1):
        r0 = min(r0_default, 0.5 * t1)
        if t1 <= 0 or r0 <= 0:
            return 0.0
        r, wr = radial_nodes(r0, t1, u.ray_breaks(x, omega), scheme)
        z = r[:, None] * omega[None, :]
        return float(np.dot(wr, radial_kernel(r, omega, params, rho_s) * np.abs(u.delta(x, z)) ** p))

    def exit_dist(x, om):
        with np.errstate(divide="ignore"):
            t = np.where(om > 0, (hi - x) / np.where(om > 0, om, 1), np.where(om < 0, (lo - x) / np.where(om < 0, om, 1), np.inf))
        return float(np.min(t))

    if n == 1:
        xs, wx = _gl_on_edges(_graded_panels(lo[0], hi[0], levels=panels // 2), 8)
        tot = 0.0
        for xv, w in zip(xs, wx):
            x = np.array([xv])
            tot += w * (along(x, np.array([1.0]), hi[0] - xv) + along(x, np.array([-1.0]), xv - lo[0]))
        return float(tot)
    ex = _graded_panels(lo[0], hi[0], levels=4, interior=max(panels // 4, 2))
    ey = _graded_panels(lo[1], hi[1], levels=4, interior=max(panels // 4, 2))
    xs, wx = _gl_on_edges(ex, 4)
    ys, wy = _gl_on_edges(ey, 4)
    m = scheme.angular_nodes
    dirs, dw = full_directions(2, m)
    tot = 0.0
    for xv, w1 in zip(xs, wx):
        for yv, w2 in zip(ys, wy):
            x = np.array([xv, yv])
            tot += w1 * w2 * sum(d * along(x, om, exit_dist(x, om)) for om, d in zip(dirs, dw))
    return float(tot)
