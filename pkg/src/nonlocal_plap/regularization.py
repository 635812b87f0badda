"""Infimal convolution, exponent selection, mollification and perturbed data."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainViolation, SearchRadiusExceeded
from .fields import Field, Grid, OperatorParams, SampledField, TailModel, as_points
from .report import AuditReport
from .scalar import RhsSpec


def choose_q(params: OperatorParams, margin: float = 0.5) -> float:
    """Envelope exponent: 2 in the regular range, ``sp/(p-1) + margin`` otherwise."""
    if not (margin > 0.0) or not math.isfinite(margin):
        raise ConfigError("margin", "margin > 0", margin)
    if params.singular_range:
        return params.sp / (params.p - 1.0) + margin
    return 2.0


def r_eps(osc: float, eps: float, q: float) -> float:
    """Search radius ``(q osc eps^(q-1))^(1/q)`` bounding every minimizer."""
    return (q * osc * eps ** (q - 1.0)) ** (1.0 / q)


@dataclass(frozen=True)
class RegularizationParams:
    """Envelope parameter ``eps``, exponent ``q``, radius ``r_eps`` and mollifier radius."""

    eps: float
    q: float = 2.0
    r_eps: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (self.eps > 0.0) or not math.isfinite(self.eps):
            raise ConfigError("eps", "eps > 0", self.eps)
        if not (self.q >= 2.0) or not math.isfinite(self.q):
            raise ConfigError("q", "q >= 2", self.q)
        if not (self.r_eps >= 0.0) or not math.isfinite(self.r_eps):
            raise ConfigError("r_eps", "r_eps >= 0", self.r_eps)
        if not (self.delta >= 0.0) or not math.isfinite(self.delta):
            raise ConfigError("delta", "delta >= 0", self.delta)

    @classmethod
    def for_field(cls, u: Field, params: OperatorParams, eps: float, margin: float = 0.5, delta: float = 0.0) -> "RegularizationParams":
        """Parameters with ``q`` from the operator range and ``r_eps`` from ``osc(u)``."""
        q = choose_q(params, margin)
        return cls(eps=eps, q=q, r_eps=r_eps(u.osc, eps, q), delta=delta)

    def check_for(self, params: OperatorParams) -> None:
        """Reject an exponent that breaks the rule for ``params``."""
        if params.singular_range:
            need = params.sp / (params.p - 1.0)
            if not self.q > need:
                raise ConfigError("q", f"q > sp/(p-1) = {need!r} in the singular range", self.q)
        elif self.q != 2.0:
            raise ConfigError("q", "q = 2 when p > 2/(2-s)", self.q)

    @property
    def penalty_scale(self) -> float:
        return self.q * self.eps ** (self.q - 1.0)

    @property
    def semiconcavity(self) -> float:
        """Constant ``C`` with ``u_eps - C|x|^2`` concave on the search ball."""
        return (self.q - 1.0) * self.r_eps ** (self.q - 2.0) / (2.0 * self.eps ** (self.q - 1.0))

    def describe(self) -> dict:
        return {"eps": self.eps, "q": self.q, "r_eps": self.r_eps, "delta": self.delta}


# envelope search ------------------------------------------------------------------------


def _offsets(n: int, m: int) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, m)
    if n == 1:
        return t[:, None]
    gx, gy = np.meshgrid(t, t, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def envelope_search(
    u: Field,
    pts: np.ndarray,
    reg: RegularizationParams,
    coarse: int = 33,
    window: int = 9,
    min_levels: int = 3,
    max_levels: int = 40,
    tol: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ``u(y) + |x-y|^q / (q eps^(q-1))`` over the closed ball ``B(x, r_eps)``.

    Coarse-to-fine grid search: a full grid on the ball, then windows of
    ``window`` nodes around the incumbent, each level 4x finer, until the
    minimum is stable within ``tol`` on a lattice finer than ``1e-8 r_eps``
    (and after at least ``min_levels`` levels).
    ``y = x`` is always a candidate and wins ties. Returns ``(values, minimizers)``.

    Raises
    ------
    SearchRadiusExceeded
        When a minimizer lands on the search boundary.
    """
    pts = as_points(pts, u.n)
    npts, n = pts.shape
    r = reg.r_eps
    scale = reg.penalty_scale
    best = u(pts).astype(float)
    arg = pts.copy()
    if r <= 0.0 or npts == 0:
        return best, arg

    def objective(y, x):
        d = np.linalg.norm(y - x[:, None, :], axis=2)
        vals = u(y.reshape(-1, n)).reshape(d.shape) + d**reg.q / scale
        return np.where(d <= r, vals, np.inf)

    def take(y, vals):
        k = np.argmin(vals, axis=1)
        v = vals[np.arange(npts), k]
        better = v < best
        best[better] = v[better]
        arg[better] = y[np.arange(npts), k][better]

    off = _offsets(n, coarse) * r
    y = pts[:, None, :] + off[None, :, :]
    take(y, objective(y, pts))
    step = 2.0 * r / (coarse - 1)
    step_floor = 1e-8 * r
    prev = best.copy()
    local = _offsets(n, window) * ((window - 1) / 2)
    for level in range(max_levels):
        step /= 4.0
        y = arg[:, None, :] + step * local[None, :, :]
        take(y, objective(y, pts))
        change = float(np.max(prev - best))
        prev = best.copy()
        # an unchanged level only means the incumbent is the best lattice node,
        # so stability counts once the lattice is fine enough to resolve tol
        if level + 1 >= min_levels and step <= step_floor and change <= tol * max(1.0, float(np.max(np.abs(best)))):
            break
    dist = np.linalg.norm(arg - pts, axis=1)
    bad = dist >= r * (1.0 - 1e-9)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SearchRadiusExceeded(f"minimizer for x={pts[i].tolist()} at distance {dist[i]!r} reaches r_eps={r!r}")
    return best, arg


class InfConvolutionField(Field):
    """Lazily evaluated infimal convolution of ``u`` (exact search at any point)."""

    exact_delta = False

    def __init__(self, u: Field, reg: RegularizationParams, **search):
        self.u = u
        self.reg = reg
        self.n = u.n
        self.scale = u.scale
        self.search = search

    def _eval(self, pts):
        return envelope_search(self.u, pts, self.reg, **self.search)[0]

    def minimizers(self, x) -> np.ndarray:
        return envelope_search(self.u, as_points(x, self.n), self.reg, **self.search)[1]

    @property
    def sup(self):
        return self.u.sup

    @property
    def inf(self):
        return self.u.inf

    @property
    def far_radius(self):
        fr = self.u.far_radius
        return None if fr is None else fr + self.reg.r_eps

    def far_value(self, dirs):
        return self.u.far_value(dirs)

    def support_ball(self):
        return self.u.support_ball()


def _tail_of(u: Field) -> TailModel:
    if isinstance(u, SampledField):
        return u.tail
    fv = u.far_value(np.eye(u.n)[:1])
    if fv is not None and float(fv[0]) != 0.0:
        return TailModel("constant", float(fv[0]))
    return TailModel()


def inf_convolution(u: Field, reg: RegularizationParams, out_grid: Grid, chunk: int = 512, **search) -> SampledField:
    """Sampled infimal convolution of ``u`` on ``out_grid``.

    For a sampled ``u`` the output grid must sit inside its box shrunk by
    ``r_eps``. The tail of the result is the tail of ``u``.
    """
    if out_grid.n != u.n:
        raise ConfigError("out_grid", f"dimension n = {u.n}", out_grid.n)
    if isinstance(u, SampledField):
        lo = np.array(u.grid.lo) + reg.r_eps
        hi = np.array(u.grid.hi) - reg.r_eps
        if np.any(np.array(out_grid.lo) < lo - 1e-12) or np.any(np.array(out_grid.hi) > hi + 1e-12):
            raise DomainViolation(f"output grid must lie inside the input box shrunk by r_eps={reg.r_eps!r}")
    nodes = out_grid.nodes()
    vals = np.empty(nodes.shape[0])
    for i in range(0, nodes.shape[0], chunk):
        vals[i : i + chunk] = envelope_search(u, nodes[i : i + chunk], reg, **search)[0]
    return SampledField(out_grid, vals.reshape(out_grid.shape), _tail_of(u))


def sup_convolution(u: Field, reg: RegularizationParams, out_grid: Grid, **search) -> SampledField:
    """Mirror image ``-inf_convolution(-u)`` for subsolution-side experiments."""
    neg = inf_convolution(-1.0 * u if not isinstance(u, SampledField) else SampledField(u.grid, -u.values, _neg_tail(u.tail)), reg, out_grid, **search)
    return SampledField(out_grid, -neg.values, _neg_tail(neg.tail))


def _neg_tail(t: TailModel) -> TailModel:
    return t if t.kind != "constant" else TailModel("constant", -t.c)


# audits ---------------------------------------------------------------------------


def _stencils(n: int) -> list[tuple[int, ...]]:
    return [(1,)] if n == 1 else [(1, 0), (0, 1), (1, 1), (1, -1)]


def second_differences(u: SampledField) -> list[tuple[tuple, np.ndarray, float]]:
    """Centered second differences ``(u(x+e) - 2u(x) + u(x-e)) / |e|^2`` at interior nodes.

    Returns a list of ``(direction, array over interior nodes, |e|)``.
    """
    v = u.values
    h = u.grid.h
    out = []
    for d in _stencils(u.n):
        e2 = float(sum((di * hi) ** 2 for di, hi in zip(d, h)))
        if u.n == 1:
            sd = (v[2:] - 2 * v[1:-1] + v[:-2]) / e2
        else:
            sl = lambda a, b: v[1 + a : v.shape[0] - 1 + a, 1 + b : v.shape[1] - 1 + b]
            sd = (sl(*d) - 2 * sl(0, 0) + sl(-d[0], -d[1])) / e2
        out.append((d, sd, math.sqrt(e2)))
    return out


def semiconcavity_audit(u_eps: SampledField, C_bound: float, h_coef: float = 4.0) -> AuditReport:
    """Check second differences ``<= 2 C_bound + h_coef * h`` at every interior node."""
    t0 = time.perf_counter()
    h = float(np.max(u_eps.grid.h))
    bound = 2.0 * C_bound + h_coef * h
    rep = AuditReport("semiconcavity", params={"C_bound": C_bound, "h": h, "grid": list(u_eps.grid.shape)}, tolerances={"bound": bound})
    worst = -math.inf
    shape = tuple(m - 2 for m in u_eps.grid.shape)
    for d, sd, _ in second_differences(u_eps):
        flat = sd.ravel()
        worst = max(worst, float(flat.max()))
        for k in np.flatnonzero(flat > bound):
            rep.violations.append(len(rep.records))
            rep.records.append({"direction": "x".join(map(str, d)), "node": int(np.ravel_multi_index(np.unravel_index(k, shape), shape)), "second_difference": float(flat[k]), "bound": bound, "ok": False})
        rep.add(True, direction="x".join(map(str, d)), node=-1, second_difference=float(flat.max()), bound=bound)
    rep.summary = {"max_second_difference": worst, "bound": bound}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


def _centered_gradient(u: SampledField) -> np.ndarray:
    grads = np.gradient(u.values, *u.grid.h) if u.n == 2 else [np.gradient(u.values, u.grid.h[0])]
    return np.sqrt(sum(g**2 for g in grads)).ravel()


def critical_point_audit(u: Field, u_eps: SampledField, grad_tol: float, val_tol: float) -> AuditReport:
    """At nodes where the centered gradient of ``u_eps`` is small, require ``|u_eps - u| < val_tol``."""
    t0 = time.perf_counter()
    rep = AuditReport("critical_points", params={"grad_tol": grad_tol, "val_tol": val_tol, "grid": list(u_eps.grid.shape)}, tolerances={"value": val_tol})
    nodes = u_eps.grid.nodes()
    g = _centered_gradient(u_eps)
    ue = u_eps.values.ravel()
    uu = u(nodes)
    # one-sided differences at the box edge are not centered; skip them
    interior = u_eps.grid.contains(nodes, margin=0.5 * float(np.min(u_eps.grid.h)))
    worst = 0.0
    for k in np.flatnonzero((g < grad_tol) & interior):
        gap = abs(ue[k] - uu[k])
        worst = max(worst, gap)
        rep.add(gap < val_tol, node=int(k), x=float(nodes[k, 0]), grad=float(g[k]), u=float(uu[k]), u_eps=float(ue[k]), gap=float(gap))
    rep.summary = {"critical_nodes": len(rep.records), "max_gap": worst}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


# mollification ----------------------------------------------------------------------


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    m = t < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def mollifier_stencil(n: int, delta: float, h) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets and discretely normalized weights of the standard mollifier."""
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    ks = [np.arange(-int(math.floor(delta / hk)), int(math.floor(delta / hk)) + 1) for hk in h]
    if n == 1:
        offs = ks[0][:, None]
    else:
        a, b = np.meshgrid(ks[0], ks[1], indexing="ij")
        offs = np.stack([a.ravel(), b.ravel()], axis=1)
    w = _bump(np.linalg.norm(offs * h, axis=1) / delta)
    keep = w > 0
    offs, w = offs[keep], w[keep]
    if offs.shape[0] == 0:
        return np.zeros((1, n), dtype=int), np.ones(1)
    return offs, w / w.sum()


def mollify(u_eps: Field, delta: float, out_grid: Grid, domain=None, h=None) -> SampledField:
    """Convolution with the standard mollifier of radius ``delta``.

    Stencil nodes lie on a lattice of spacing ``h`` (default: ``out_grid.h``).
    At output nodes whose ``delta``-ball leaves ``domain`` (default: the box of
    ``u_eps`` if sampled, else ``out_grid``) the value of ``u_eps`` is kept.
    Weights are positive and sum to one, so constants are reproduced exactly
    and the result stays between the stencil extrema.
    """
    if not (delta > 0.0):
        raise ConfigError("delta", "delta > 0", delta)
    hh = out_grid.h if h is None else np.broadcast_to(np.asarray(h, dtype=float), (out_grid.n,))
    offs, w = mollifier_stencil(out_grid.n, delta, hh)
    disp = offs * hh
    if domain is None:
        domain = (u_eps.grid.lo, u_eps.grid.hi) if isinstance(u_eps, SampledField) else (out_grid.lo, out_grid.hi)
    lo, hi = (np.asarray(v, dtype=float) for v in domain)
    nodes = out_grid.nodes()
    u0 = u_eps(nodes)
    inside = np.all((nodes - delta >= lo - 1e-12) & (nodes + delta <= hi + 1e-12), axis=1)
    out = u0.copy()
    idx = np.flatnonzero(inside)
    if idx.size:
        pts = nodes[idx][:, None, :] + disp[None, :, :]
        vals = u_eps(pts.reshape(-1, out_grid.n)).reshape(idx.size, -1)
        conv = u0[idx] + (vals - u0[idx][:, None]) @ w
        out[idx] = np.clip(conv, vals.min(axis=1), vals.max(axis=1))
    tail = u_eps.tail if isinstance(u_eps, SampledField) else _tail_of(u_eps)
    return SampledField(out_grid, out.reshape(out_grid.shape), tail)


# perturbed right-hand side ----------------------------------------------------------


def _ball_samples(x: np.ndarray, r: float, m: int) -> np.ndarray:
    n = x.size
    off = _offsets(n, m) * r
    if n == 2:
        off = off[np.linalg.norm(off, axis=1) <= r]
        ang = np.linspace(0.0, 2 * np.pi, 4 * m, endpoint=False)
        off = np.vstack([off, r * np.stack([np.cos(ang), np.sin(ang)], axis=1)])
    return x[None, :] + off


def f_eps(rhs: RhsSpec, x, t: float, eta: float, r_eps: float, samples: int = 257, levels: int = 30) -> float:
    """``inf`` of ``f(., t, eta)`` over the closed ball ``B(x, r_eps)``.

    The ball is sampled on a grid and the incumbent refined coarse-to-fine,
    clipped to the ball.

    Raises
    ------
    DomainViolation
        When the ball leaves the declared domain of ``rhs``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not rhs.in_domain(x, r_eps):
        raise DomainViolation(f"ball B({x.tolist()}, {r_eps!r}) leaves the rhs domain {rhs.domain!r}")
    best = rhs(x, t, eta)
    if r_eps <= 0.0:
        return best
    pts = _ball_samples(x, r_eps, samples)
    vals = np.array([rhs(y, t, eta) for y in pts])
    k = int(np.argmin(vals))
    arg = pts[k] if vals[k] < best else x
    best = min(best, float(vals[k]))
    step = 2.0 * r_eps / (samples - 1)
    local = _offsets(x.size, 5) * 2
    for _ in range(levels):
        step /= 4.0
        cand = arg[None, :] + step * local
        d = np.linalg.norm(cand - x[None, :], axis=1)
        cand = np.where((d > r_eps)[:, None], x[None, :] + (cand - x[None, :]) * (r_eps / np.maximum(d, 1e-300))[:, None], cand)
        cv = np.array([rhs(y, t, eta) for y in cand])
        k = int(np.argmin(cv))
        if cv[k] < best:
            best, arg = float(cv[k]), cand[k]
    return best
