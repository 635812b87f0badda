"""Independent brute-force reference integrators (1D).

These routines share no integration code with :mod:`quadrature`: they use
adaptive Gauss-Kronrod (7/15) bisection with their own substitutions, and only
touch a field through its increment method ``delta``.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

# Gauss-Kronrod 15-point nodes and weights on [-1, 1]
_XK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WKF = np.concatenate([_WK[:-1], _WK[::-1]])
_GIDX = np.array([1, 3, 5, 7, 9, 11, 13])
_WGF = np.concatenate([_WG[:-1], _WG[::-1]])


def gk_adaptive(f, a: float, b: float, abstol: float = 1e-12, reltol: float = 1e-12, max_intervals: int = 20000) -> tuple[float, float]:
    """Globally adaptive GK15 on [a, b]; ``f`` is vectorized.

    The panel with the largest error estimate is bisected until the summed
    estimate drops below ``max(abstol, reltol * |value|)``. Panels too narrow
    to split in floating point are retired. Returns ``(value, error_estimate)``.
    """

    def panel(lo, hi):
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        y = f(c + h * _NODES)
        k = h * float(np.dot(_WKF, y))
        g = h * float(np.dot(_WGF, y[_GIDX]))
        return k, abs(k - g)

    k, e = panel(a, b)
    heap = [(-e, a, b, k)]
    done = []
    total, err = k, e
    count = 1
    while heap and err > max(abstol, reltol * abs(total)) and count < max_intervals:
        ne0, lo, hi, k0 = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or (hi - lo) <= 1e-14 * max(abs(lo), abs(hi)):
            done.append((-ne0, k0))
            continue
        k1, e1 = panel(lo, mid)
        k2, e2 = panel(mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, k1))
        heapq.heappush(heap, (-e2, mid, hi, k2))
        total += k1 + k2 - k0
        err += e1 + e2 + ne0
        count += 1
    total = math.fsum([pk for _, _, _, pk in heap] + [pk for _, pk in done])
    err = sum(-ne for ne, _, _, _ in heap) + sum(pe for pe, _ in done)
    return total, err


def _Lm(g, p):
    return np.sign(g) * np.abs(g) ** (p - 1.0)


def _half_line(integrand, a: float, tol: float) -> float:
    """int_0^inf integrand(z) dz for a z^(-1-a) type weight.

    [0, 1] uses z = t^8; [1, inf) uses z = t^(-2/a).
    """
    m = 8.0

    def near(t):
        z = t**m
        with np.errstate(all="ignore"):
            out = integrand(z) * m * t ** (m - 1)
        return np.where(t > 0, out, 0.0)

    k = 2.0 / a

    def far(t):
        z = t ** (-k)
        with np.errstate(all="ignore"):
            out = integrand(z) * k * t ** (-k - 1)
        return np.where(t > 0, np.nan_to_num(out), 0.0)

    cuts = [0.0, 0.25, 0.5, 0.75, 1.0]
    v1 = sum(gk_adaptive(near, cuts[i], cuts[i + 1], tol / 8, 1e-13)[0] for i in range(4))
    v2 = sum(gk_adaptive(far, cuts[i], cuts[i + 1], tol / 8, 1e-13)[0] for i in range(4))
    return v1 + v2


def oracle_plap_1d(u, x: float, s: float, p: float, tol: float = 1e-11) -> float:
    """p.v. int L(u(x) - u(y)) |x - y|^(-1-sp) dy by symmetric folding."""
    a = s * p
    xx = np.array([float(x)])

    def integrand(z):
        z = np.atleast_1d(z)
        dp = u.delta(xx, z[:, None])
        dm = u.delta(xx, -z[:, None])
        return (_Lm(-dp, p) + _Lm(-dm, p)) * z ** (-1.0 - a)

    return _half_line(integrand, a, tol)


def oracle_ds_1d(u, x: float, s: float, p: float, tol: float = 1e-11) -> float:
    a = s * p
    xx = np.array([float(x)])

    def integrand(z):
        z = np.atleast_1d(z)
        dp = u.delta(xx, z[:, None])
        dm = u.delta(xx, -z[:, None])
        return (np.abs(dp) ** p + np.abs(dm) ** p) * z ** (-1.0 - a)

    return _half_line(integrand, a, tol)


def oracle_pairing_1d(u, v, x: float, s: float, p: float, tol: float = 1e-11) -> float:
    a = s * p
    xx = np.array([float(x)])

    def integrand(z):
        z = np.atleast_1d(z)
        zp, zm = z[:, None], -z[:, None]
        return (_Lm(-u.delta(xx, zp), p) * (-v.delta(xx, zp)) + _Lm(-u.delta(xx, zm), p) * (-v.delta(xx, zm))) * z ** (-1.0 - a)

    return _half_line(integrand, a, tol)


def _outer(fun, a: float, b: float, tol: float) -> float:
    """Adaptive integral of a scalar (non-vectorized) function."""
    vec = lambda xs: np.array([fun(float(t)) for t in np.atleast_1d(xs)])
    return gk_adaptive(vec, a, b, tol, 1e-10)[0]


def oracle_weak_1d(u, phi, support: tuple, s: float, p: float, tol: float = 1e-9) -> float:
    """Double integral of L(u(x)-u(y))(phi(x)-phi(y))|x-y|^(-1-sp) over R^2.

    Splits the outer variable into ``x in K`` (inner integral over all of R)
    and ``x outside K`` (inner integral over K only), with no symmetry swap.
    """
    lo, hi = support
    a = s * p

    def inside(x):
        return oracle_pairing_1d(u, phi, x, s, p, tol)

    def outside_point(x):
        # integral over y in K of L(u(x)-u(y)) (0 - phi(y)) |x-y|^(-1-a)
        xx = np.array([x])

        def g(y):
            y = np.atleast_1d(y)
            uy = u(y[:, None])
            ux = u(xx)[0]
            return _Lm(ux - uy, p) * (-phi(y[:, None])) * np.abs(x - y) ** (-1.0 - a)

        return gk_adaptive(g, lo, hi, tol, 1e-10)[0]

    part_in = _outer(inside, lo, hi, tol)

    def right(w):
        return np.array([outside_point(hi + float(t)) for t in np.atleast_1d(w)])

    def left(w):
        return np.array([outside_point(lo - float(t)) for t in np.atleast_1d(w)])

    part_out = _half_line(right, a, tol) + _half_line(left, a, tol)
    return part_in + part_out


def oracle_gagliardo_1d(u, lo: float, hi: float, s: float, p: float, tol: float = 1e-9) -> float:
    """int_lo^hi int_lo^hi |u(x)-u(y)|^p |x-y|^(-1-sp) dy dx by nested adaptivity."""
    a = s * p

    def inner(x):
        xx = np.array([x])
        tot = 0.0
        for d, sign in ((hi - x, 1.0), (x - lo, -1.0)):
            if d <= 0:
                continue

            def g(t):
                z = d * t**4
                with np.errstate(all="ignore"):
                    val = np.abs(u.delta(xx, sign * z[:, None])) ** p * z ** (-1.0 - a) * 4 * d * t**3
                return np.where(t > 0, np.nan_to_num(val), 0.0)

            tot += gk_adaptive(g, 0.0, 1.0, tol, 1e-11)[0]
        return tot

    return _outer(inner, lo, hi, tol)
