"""Arbitrary-precision reference integrals (mpmath), independent of the package.

Fields are given as plain mpmath callables; the singular integral is folded
symmetrically and split at every point where the integrand loses smoothness.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50
Z_MIN = mp.mpf("1e-12")


def L(g, p):
    return mp.sign(g) * abs(g) ** (p - 1)


def power_bump(k=1, R=1):
    return lambda y: (1 - (y / R) ** 2) ** k if abs(y) < R else mp.mpf(0)


def smooth_bump(R=1):
    return lambda y: mp.e * mp.exp(-1 / (1 - (y / R) ** 2)) if abs(y) < R else mp.mpf(0)


def cosine_bump(R=1):
    return lambda y: (1 + mp.cos(mp.pi * y / R)) / 2 if abs(y) < R else mp.mpf(0)


def _breaks(x, edges, extra=()):
    """Radial breakpoints from ``Z_MIN`` up, one per decade."""
    pts = {Z_MIN * 10**k for k in range(13)}
    for e in edges:
        for z in (e - x, x - e):
            if z > 0:
                pts.add(mp.mpf(z))
    pts.update(mp.mpf(z) for z in extra if z > 0)
    out = sorted(pts)
    return out + [mp.inf]


def _head(f, e):
    """``int_0^Z_MIN f`` from the leading power ``f ~ c z^e`` at a regular point.

    Starting above zero keeps the folded integrand clear of the cancellation
    between the two half-line terms.
    """
    return f(Z_MIN) * Z_MIN / (e + 1)


def plap(u, x, s, p, edges=(-1, 1), extra=()):
    """p.v. int L(u(x) - u(y)) |x - y|^(-1-sp) dy in 1D."""
    x, s, p = mp.mpf(x), mp.mpf(s), mp.mpf(p)
    ux = u(x)
    f = lambda z: (L(ux - u(x + z), p) + L(ux - u(x - z), p)) * z ** (-1 - s * p)
    return mp.quad(f, _breaks(x, edges, extra)) + _head(f, p - 1 - s * p)


def ds(u, x, s, p, edges=(-1, 1), extra=()):
    x, s, p = mp.mpf(x), mp.mpf(s), mp.mpf(p)
    ux = u(x)
    f = lambda z: (abs(ux - u(x + z)) ** p + abs(ux - u(x - z)) ** p) * z ** (-1 - s * p)
    return mp.quad(f, _breaks(x, edges, extra)) + _head(f, p - 1 - s * p)


def chord(a, b, p):
    """int_0^1 |b + t (a - b)|^(p-2) dt.

    Integrated in w = b + t (a - b) and split at w = 0, so a crossing next to
    an endpoint never puts quadrature nodes on the singularity.
    """
    a, b, p = mp.mpf(a), mp.mpf(b), mp.mpf(p)
    if a == b:
        return abs(a) ** (p - 2)
    f = lambda w: abs(w) ** (p - 2)
    lo, hi = min(a, b), max(a, b)
    pts = [lo, 0, hi] if lo < 0 < hi else [lo, hi]
    return mp.quad(f, pts) / (hi - lo)
