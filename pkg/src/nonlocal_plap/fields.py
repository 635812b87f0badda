"""Function fields on R^n (n = 1, 2), kernels, grids, tails and parameters.

A field is a bounded function that can be evaluated at many points at once
and that also knows how to compute increments ``u(x + z) - u(x)`` without
catastrophic cancellation for tiny ``z``. The increment method is what the
singular quadrature consumes, so catalog entries implement it with
``expm1``/``log1p``-style formulas.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, DecayUncertified
from .report import AuditReport


def as_points(x, n: int) -> np.ndarray:
    """Coerce scalars, points or point lists to an ``(m, n)`` float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if n == 1 else a.reshape(1, n)
    if a.shape[-1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {a.shape}")
    return a


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 points for n = 1)."""
    return 2.0 if n == 1 else 2.0 * math.pi


# parameters -------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Interaction kernel ``K(x, y) = g(x - y) |x - y|^(-n-sp)``.

    ``kind`` is ``"fractional"`` (g = 1) or ``"general"``. For general kernels
    the ratio ``g`` is ``scale`` times an optional even ``profile(z)``; the
    ellipticity constant ``lam`` must satisfy ``1/lam <= g <= lam``.
    """

    kind: str = "fractional"
    lam: float = 1.0
    scale: float = 1.0
    profile: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("fractional", "general"):
            raise ConfigError("kernel.kind", "one of ('fractional', 'general')", self.kind)
        if not (self.lam >= 1.0):
            raise ConfigError("kernel.lambda", "lambda >= 1", self.lam)
        if self.kind == "fractional" and (self.lam != 1.0 or self.scale != 1.0 or self.profile is not None):
            raise ConfigError("kernel.kind", "fractional kernel has lambda = 1 and unit ratio", self.lam)

    @property
    def constant_ratio(self) -> bool:
        return self.profile is None

    def ratio(self, z: np.ndarray) -> np.ndarray:
        """Ratio ``K(x, x+z) |z|^(n+sp)`` for displacements ``z`` of shape (m, n)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "fractional":
            return np.ones(z.shape[0])
        if self.profile is None:
            return np.full(z.shape[0], float(self.scale))
        return self.scale * np.asarray(self.profile(z), dtype=float)

    def __call__(self, x, y, params: "OperatorParams") -> np.ndarray:
        x = as_points(x, params.n)
        y = as_points(y, params.n)
        z = y - x
        r = np.linalg.norm(z, axis=1)
        # symmetrize the ratio so K(x, y) = K(y, x) holds by construction
        g = 0.5 * (self.ratio(z) + self.ratio(-z))
        with np.errstate(divide="ignore"):
            return g * r ** (-(params.n + params.s * params.p))


@dataclass(frozen=True)
class OperatorParams:
    """Dimension, fractional order, integrability exponent and kernel.

    ``singular_range`` and ``subcritical`` (n > sp) are derived properties.
    """

    n: int = 1
    s: float = 0.5
    p: float = 2.0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigError("n", "n in {1, 2}", self.n)
        if not (0.0 < self.s < 1.0):
            raise ConfigError("s", "0 < s < 1", self.s)
        if not (self.p > 1.0) or not math.isfinite(self.p):
            raise ConfigError("p", "1 < p < inf", self.p)

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def singular_range(self) -> bool:
        return self.p <= 2.0 / (2.0 - self.s)

    @property
    def subcritical(self) -> bool:
        return self.n > self.s * self.p

    @property
    def lam(self) -> float:
        return self.kernel.lam

    def describe(self) -> dict:
        return {"n": self.n, "s": self.s, "p": self.p, "kernel": self.kernel.kind, "lambda": self.kernel.lam, "scale": self.kernel.scale}


# base field -------------------------------------------------------------------


class Field:
    """Bounded scalar function on R^n.

    Subclasses implement ``_eval``. Everything else has a generic fallback:
    increments by direct differencing, derivatives by central differences,
    and no kinks or far-field model.
    """

    n: int = 1
    exact_delta: bool = False
    has_closed_derivatives: bool = False
    #: a length scale used to cap inner-ball radii and difference steps
    scale: float = 1.0

    # evaluation
    def _eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self._eval(as_points(x, self.n))

    def value(self, x) -> float:
        return float(self(x)[0])

    def delta(self, x, z) -> np.ndarray:
        """``u(x + z) - u(x)`` for one point ``x`` and displacements ``z``."""
        x = as_points(x, self.n)[0]
        z = as_points(z, self.n)
        return self._eval(x[None, :] + z) - self._eval(x[None, :])[0]

    # global data
    @property
    def sup(self) -> float:
        raise NotImplementedError

    @property
    def inf(self) -> float:
        raise NotImplementedError

    @property
    def osc(self) -> float:
        return self.sup - self.inf

    @property
    def lipschitz(self) -> float:
        return math.inf

    # far model: beyond |y| > far_radius the field is constant along rays
    far_radius: float | None = None

    def far_value(self, dirs: np.ndarray) -> np.ndarray | None:
        return None

    def far_delta(self, x, dirs: np.ndarray) -> np.ndarray | None:
        """``far_value(dir) - u(x)`` or None when no far model exists."""
        fv = self.far_value(dirs)
        if fv is None:
            return None
        return fv - self.value(x)

    # smoothness data
    def kink_distance(self, x) -> float:
        """Distance from ``x`` to the set where the field is not C^2."""
        return math.inf

    def ray_breaks(self, x, omega) -> np.ndarray:
        """Radii ``r > 0`` where ``x + r omega`` crosses a kink."""
        return np.empty(0)

    # derivatives
    def grad(self, x) -> np.ndarray:
        pts = as_points(x, self.n)
        h = 1e-5 * self.scale
        out = np.empty_like(pts)
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = h
            out[:, k] = (self._eval(pts + e) - self._eval(pts - e)) / (2 * h)
        return out

    def hess(self, x) -> np.ndarray:
        pts = as_points(x, self.n)
        h = 1e-4 * self.scale
        m = pts.shape[0]
        out = np.empty((m, self.n, self.n))
        f0 = self._eval(pts)
        for i in range(self.n):
            ei = np.zeros(self.n)
            ei[i] = h
            out[:, i, i] = (self._eval(pts + ei) - 2 * f0 + self._eval(pts - ei)) / h**2
            for j in range(i + 1, self.n):
                ej = np.zeros(self.n)
                ej[j] = h
                v = (self._eval(pts + ei + ej) - self._eval(pts + ei - ej) - self._eval(pts - ei + ej) + self._eval(pts - ei - ej)) / (4 * h * h)
                out[:, i, j] = out[:, j, i] = v
        return out

    def local_bounds(self, x, radius: float, samples: int = 17) -> tuple[float, float, float]:
        """Sampled ``(max |grad|, max |hess|, |grad u(x)|)`` on the ball B(x, radius)."""
        x = as_points(x, self.n)[0]
        t = np.linspace(-1.0, 1.0, samples)
        if self.n == 1:
            pts = x[None, :] + radius * t[:, None]
        else:
            gx, gy = np.meshgrid(t, t, indexing="ij")
            offs = np.stack([gx.ravel(), gy.ravel()], axis=1)
            offs = offs[np.linalg.norm(offs, axis=1) <= 1.0]
            pts = x[None, :] + radius * offs
        g = np.linalg.norm(self.grad(pts), axis=1)
        H = np.linalg.norm(self.hess(pts), ord=2, axis=(1, 2))
        g0 = float(np.linalg.norm(self.grad(x[None, :])[0]))
        slack = 1.0 + 0.25 * min(1.0, radius / self.scale) + 1e-12
        return float(g.max()) * slack, float(H.max()) * slack, g0

    # support of compactly supported entries: (center, radius) or None
    def support_ball(self):
        return None

    def certify_decay(self) -> None:
        """Every bounded field with a far model or finite bounds decays properly."""
        if not (math.isfinite(self.sup) and math.isfinite(self.inf)):
            raise DecayUncertified("field is not certified bounded")

    # arithmetic
    def __add__(self, other):
        return LinearCombination.of(self) + other

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return LinearCombination.of(self) - other

    def __rsub__(self, other):
        return (-1.0) * LinearCombination.of(self) + other

    def __mul__(self, a):
        return LinearCombination.of(self) * a

    def __rmul__(self, a):
        return self.__mul__(a)

    def __neg__(self):
        return LinearCombination.of(self) * -1.0


# analytic catalog -------------------------------------------------------------

CATALOG_KINDS = ("constant", "affine", "quadratic", "power", "power_bump", "smooth_bump", "cosine_bump", "cutoff")


def _sphere_breaks(x, omega, c, R) -> list[float]:
    d = x - c
    b = float(np.dot(omega, d))
    cc = float(np.dot(d, d)) - R * R
    disc = b * b - cc
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    return [r for r in (-b - sq, -b + sq) if r > 0]


class RadialField(Field):
    """Field ``A * prof(|x - c| / R)`` with closed-form profile derivatives."""

    exact_delta = True
    has_closed_derivatives = True
    kind = "radial"

    def __init__(self, n: int = 1, center=None, radius: float = 1.0, amplitude: float = 1.0, exponent: float = 1.0):
        if n not in (1, 2):
            raise ConfigError("field.n", "n in {1, 2}", n)
        if not (radius > 0 and math.isfinite(radius)):
            raise ConfigError("field.radius", "radius > 0", radius)
        if not math.isfinite(amplitude):
            raise ConfigError("field.amplitude", "finite amplitude", amplitude)
        self.n = n
        self.c = np.zeros(n) if center is None else np.atleast_1d(np.asarray(center, dtype=float)).copy()
        if self.c.size != n:
            raise ConfigError("field.center", f"{n} coordinates", center)
        self.R = float(radius)
        self.A = float(amplitude)
        self.k = float(exponent)
        self.scale = self.R

    def config(self) -> dict:
        return {"kind": self.kind, "n": self.n, "center": [float(v) for v in self.c], "radius": self.R, "amplitude": self.A, "exponent": self.k}

    def __repr__(self):
        return f"{type(self).__name__}({self.config()})"

    # profile in terms of w = r^2 / R^2 plus derivatives in r
    def prof(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dprof(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ddprof(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval(self, pts):
        r = np.linalg.norm(pts - self.c, axis=1)
        return self.A * self.prof(r)

    def delta(self, x, z):
        x = as_points(x, self.n)[0]
        z = as_points(z, self.n)
        d = x - self.c
        r0sq = float(np.dot(d, d))
        # exact increment of the squared radius
        dsq = 2.0 * (z @ d) + np.einsum("ij,ij->i", z, z)
        r1sq = np.maximum(r0sq + dsq, 0.0)
        return self.A * self._pdelta(r0sq, r1sq, dsq)

    def _pdelta(self, r0sq: float, r1sq: np.ndarray, dsq: np.ndarray) -> np.ndarray:
        r0 = math.sqrt(r0sq)
        return self.prof(np.sqrt(r1sq)) - self.prof(np.array([r0]))[0]

    def grad(self, x):
        pts = as_points(x, self.n)
        d = pts - self.c
        r = np.linalg.norm(d, axis=1)
        dp = self.dprof(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(r[:, None] > 0, d / np.where(r > 0, r, 1.0)[:, None], 0.0)
        return self.A * dp[:, None] * e

    def hess(self, x):
        pts = as_points(x, self.n)
        d = pts - self.c
        r = np.linalg.norm(d, axis=1)
        safe = np.where(r > 0, r, 1.0)
        e = d / safe[:, None]
        dd = self.ddprof(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            over = np.where(r > 0, self.dprof(r) / safe, dd)
        eye = np.eye(self.n)[None, :, :]
        ee = e[:, :, None] * e[:, None, :]
        if self.n == 1:
            return self.A * dd[:, None, None] * np.ones((1, 1, 1))
        return self.A * (dd[:, None, None] * ee + over[:, None, None] * (eye - ee))

    # kinks on the sphere |x - c| = R (and at the center for some entries)
    kink_on_sphere = True
    kink_at_center = False
    #: C-infinity but very flat transitions that quadrature should still split at
    soft_spheres: tuple = ()

    def kink_distance(self, x):
        x = as_points(x, self.n)[0]
        r = float(np.linalg.norm(x - self.c))
        d = math.inf
        if self.kink_on_sphere:
            d = min(d, abs(r - self.R))
        if self.kink_at_center:
            d = min(d, r)
        return d

    def ray_breaks(self, x, omega):
        x = as_points(x, self.n)[0]
        omega = np.asarray(omega, dtype=float)
        out = []
        if self.kink_on_sphere:
            out += _sphere_breaks(x, omega, self.c, self.R)
        for frac in self.soft_spheres:
            out += _sphere_breaks(x, omega, self.c, frac * self.R)
        if self.kink_at_center:
            r = float(np.dot(self.c - x, omega))
            if r > 0:
                out.append(r)
        return np.array(sorted(out))

    far_value_const = 0.0

    @property
    def far_radius(self):
        return float(np.linalg.norm(self.c)) + self.R

    def far_value(self, dirs):
        return np.full(np.atleast_2d(dirs).shape[0], self.A * self.far_value_const)

    def support_ball(self):
        return (self.c.copy(), self.R) if self.far_value_const == 0.0 else None

    @property
    def sup(self):
        return max(self.A * self._pmax, self.A * self._pmin)

    @property
    def inf(self):
        return min(self.A * self._pmax, self.A * self._pmin)

    _pmax = 1.0
    _pmin = 0.0

    @property
    def lipschitz(self):
        r = np.linspace(0.0, self.R, 20001)
        return float(np.max(np.abs(self.A * self.dprof(r)))) * (1 + 1e-6) + 1e-300


class PowerBump(RadialField):
    """``A (1 - |x-c|^2/R^2)_+^k``; C^infinity inside, kink on the sphere."""

    kind = "power_bump"

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        if not self.k > 0:
            raise ConfigError("field.exponent", "exponent > 0", self.k)

    def prof(self, r):
        w = 1.0 - (np.asarray(r) / self.R) ** 2
        return np.where(w > 0, np.maximum(w, 0.0) ** self.k, 0.0)

    def dprof(self, r):
        r = np.asarray(r, dtype=float)
        w = 1.0 - (r / self.R) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.k * np.maximum(w, 0.0) ** (self.k - 1) * (-2 * r / self.R**2)
        return np.where(w > 0, v, 0.0)

    def ddprof(self, r):
        r = np.asarray(r, dtype=float)
        w = 1.0 - (r / self.R) ** 2
        wp = np.maximum(w, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = self.k * (self.k - 1) * wp ** (self.k - 2) * (2 * r / self.R**2) ** 2 if self.k != 1 else 0.0 * r
            t2 = self.k * wp ** (self.k - 1) * (-2 / self.R**2)
        return np.where(w > 0, np.nan_to_num(t1 + t2, nan=0.0, posinf=np.inf, neginf=-np.inf), 0.0)

    def _pdelta(self, r0sq, r1sq, dsq):
        R2 = self.R * self.R
        w0 = 1.0 - r0sq / R2
        w1 = 1.0 - r1sq / R2
        dw = -dsq / R2
        out = np.where(w1 > 0, np.maximum(w1, 0.0) ** self.k, 0.0) - (max(w0, 0.0) ** self.k if w0 > 0 else 0.0)
        if w0 > 0:
            both = w1 > 0
            if np.any(both):
                ratio = dw[both] / w0
                out[both] = w0**self.k * np.expm1(self.k * np.log1p(ratio))
        return out

    @property
    def lipschitz(self):
        k, R, A = self.k, self.R, abs(self.A)
        if k < 1:
            return math.inf
        if k == 1:
            return 2 * A / R
        rho2 = 1.0 / (2 * k - 1)
        return A * 2 * k * math.sqrt(rho2) * (1 - rho2) ** (k - 1) / R * (1 + 1e-12)


class SmoothBump(RadialField):
    """``A exp(1 - 1/(1 - |x-c|^2/R^2))``; C^infinity everywhere."""

    kind = "smooth_bump"
    kink_on_sphere = False
    soft_spheres = (1.0,)

    def prof(self, r):
        w = 1.0 - (np.asarray(r, dtype=float) / self.R) ** 2
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(w > 0, np.exp(1.0 - 1.0 / np.where(w > 0, w, 1.0)), 0.0)

    def dprof(self, r):
        r = np.asarray(r, dtype=float)
        w = 1.0 - (r / self.R) ** 2
        ws = np.where(w > 0, w, 1.0)
        e = np.exp(1.0 - 1.0 / ws)
        return np.where(w > 0, e * (-2 * r / self.R**2) / ws**2, 0.0)

    def ddprof(self, r):
        r = np.asarray(r, dtype=float)
        R2 = self.R**2
        w = 1.0 - r**2 / R2
        ws = np.where(w > 0, w, 1.0)
        e = np.exp(1.0 - 1.0 / ws)
        wr = -2 * r / R2
        # d/dr [e * wr / w^2] with de/dr = e * wr / w^2
        val = e * (wr**2 / ws**4 + (-2 / R2) / ws**2 - 2 * wr**2 / ws**3)
        return np.where(w > 0, val, 0.0)

    def _pdelta(self, r0sq, r1sq, dsq):
        R2 = self.R * self.R
        w0 = 1.0 - r0sq / R2
        w1 = 1.0 - r1sq / R2
        f0 = math.exp(1.0 - 1.0 / w0) if w0 > 0 else 0.0
        with np.errstate(divide="ignore", over="ignore"):
            f1 = np.where(w1 > 0, np.exp(1.0 - 1.0 / np.where(w1 > 0, w1, 1.0)), 0.0)
        out = f1 - f0
        if w0 > 0:
            both = w1 > 0
            if np.any(both):
                arg = (-dsq[both] / R2) / (w0 * w1[both])
                # expm1 only where cancellation matters; large arguments would overflow
                small = arg <= 1.0
                vals = out[both]
                vals[small] = f0 * np.expm1(arg[small])
                out[both] = vals
        return out

    @property
    def lipschitz(self):
        r = np.linspace(0.0, self.R, 200001)
        return float(np.max(np.abs(self.A * self.dprof(r)))) * (1 + 1e-4)


class CosineBump(RadialField):
    """``A (1 + cos(pi |x-c|/R)) / 2`` inside the ball, 0 outside; C^1 with a C^2 kink on the sphere."""

    kind = "cosine_bump"

    def prof(self, r):
        rho = np.minimum(np.asarray(r, dtype=float) / self.R, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * rho))

    def dprof(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R, -0.5 * np.pi / self.R * np.sin(np.pi * r / self.R), 0.0)

    def ddprof(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.R, -0.5 * (np.pi / self.R) ** 2 * np.cos(np.pi * r / self.R), 0.0)

    def _pdelta(self, r0sq, r1sq, dsq):
        R = self.R
        rho0 = math.sqrt(r0sq) / R
        rho1 = np.sqrt(r1sq) / R
        c0 = min(rho0, 1.0)
        c1 = np.minimum(rho1, 1.0)
        both = (rho1 < 1.0) & (rho0 < 1.0) & (rho0 + rho1 > 0)
        diff = c1 - c0
        diff = np.where(both, (dsq / (R * R)) / np.where(both, rho0 + rho1, 1.0), diff)
        return -np.sin(0.5 * np.pi * (c1 + c0)) * np.sin(0.5 * np.pi * diff)

    @property
    def lipschitz(self):
        return abs(self.A) * 0.5 * math.pi / self.R


class PowerField(RadialField):
    """``A min(|x-c|, R)^k`` (capped radial power); ``quadratic`` is k = 2."""

    kind = "power"

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        if not self.k > 0:
            raise ConfigError("field.exponent", "exponent > 0", self.k)
        self.far_value_const = self.R**self.k
        self._pmax = self.R**self.k
        self._pmin = 0.0
        even_int = self.k == int(self.k) and int(self.k) % 2 == 0
        self.kink_at_center = not even_int

    def prof(self, r):
        return np.minimum(np.asarray(r, dtype=float), self.R) ** self.k

    def dprof(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.k * r ** (self.k - 1)
        return np.where(r < self.R, np.nan_to_num(v, posinf=np.inf), 0.0)

    def ddprof(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.k * (self.k - 1) * r ** (self.k - 2) if self.k != 1 else 0.0 * r
        return np.where(r < self.R, np.nan_to_num(v, nan=0.0, posinf=np.inf), 0.0)

    def _pdelta(self, r0sq, r1sq, dsq):
        R2 = self.R * self.R
        c0 = min(r0sq, R2)
        c1 = np.minimum(r1sq, R2)
        out = c1 ** (0.5 * self.k) - c0 ** (0.5 * self.k)
        if 0 < r0sq < R2:
            both = r1sq < R2
            if np.any(both):
                out[both] = c0 ** (0.5 * self.k) * np.expm1(0.5 * self.k * np.log1p(dsq[both] / r0sq))
        return out

    @property
    def lipschitz(self):
        if self.k < 1:
            return math.inf
        return abs(self.A) * self.k * self.R ** (self.k - 1)


class QuadraticField(PowerField):
    kind = "quadratic"

    def __init__(self, n=1, center=None, radius=1.0, amplitude=1.0, exponent=2.0):
        super().__init__(n, center, radius, amplitude, 2.0)


def _smoothstep(t):
    """C^infinity step 0 -> 1 on [0, 1] with its first two derivatives."""
    t = np.asarray(t, dtype=float)
    S = np.zeros_like(t)
    S1 = np.zeros_like(t)
    S2 = np.zeros_like(t)
    S[t >= 1] = 1.0
    m = (t > 0) & (t < 1)
    if np.any(m):
        tm = t[m]
        with np.errstate(over="ignore"):
            h = 1.0 / tm - 1.0 / (1.0 - tm)
            Sm = 1.0 / (1.0 + np.exp(h))
        h1 = -1.0 / tm**2 - 1.0 / (1.0 - tm) ** 2
        h2 = 2.0 / tm**3 - 2.0 / (1.0 - tm) ** 3
        q = Sm * (1.0 - Sm)
        d1 = -q * h1
        S[m] = Sm
        S1[m] = d1
        S2[m] = -(d1 * (1.0 - 2.0 * Sm)) * h1 - q * h2
    return S, S1, S2


class CutoffField(RadialField):
    """Smooth cutoff: 1 on B(c, inner), 0 outside B(c, R), C^infinity, values in [0, 1] times A."""

    kind = "cutoff"
    kink_on_sphere = False
    exact_delta = False

    @property
    def soft_spheres(self):
        return (self.k, 1.0)

    def __init__(self, n=1, center=None, radius=1.0, amplitude=1.0, exponent=0.5):
        super().__init__(n, center, radius, amplitude, exponent)
        if not (0.0 < self.k < 1.0):
            raise ConfigError("field.exponent", "cutoff inner fraction in (0, 1)", self.k)
        self.inner = self.k * self.R

    def _t(self, r):
        return (self.R - np.asarray(r, dtype=float)) / (self.R - self.inner)

    def prof(self, r):
        return _smoothstep(self._t(r))[0]

    def dprof(self, r):
        return _smoothstep(self._t(r))[1] * (-1.0 / (self.R - self.inner))

    def ddprof(self, r):
        return _smoothstep(self._t(r))[2] / (self.R - self.inner) ** 2

    def _pdelta(self, r0sq, r1sq, dsq):
        return self.prof(np.sqrt(r1sq)) - self.prof(np.array([math.sqrt(r0sq)]))[0]

    @property
    def lipschitz(self):
        r = np.linspace(self.inner, self.R, 20001)
        return float(np.max(np.abs(self.A * self.dprof(r)))) * (1 + 1e-4)


class ConstantField(Field):
    exact_delta = True
    has_closed_derivatives = True
    kind = "constant"

    def __init__(self, n: int = 1, amplitude: float = 0.0, **_):
        if n not in (1, 2):
            raise ConfigError("field.n", "n in {1, 2}", n)
        self.n = n
        self.A = float(amplitude)

    def config(self):
        return {"kind": "constant", "n": self.n, "amplitude": self.A}

    def _eval(self, pts):
        return np.full(pts.shape[0], self.A)

    def delta(self, x, z):
        return np.zeros(as_points(z, self.n).shape[0])

    sup = property(lambda self: self.A)
    inf = property(lambda self: self.A)
    lipschitz = property(lambda self: 0.0)
    far_radius = 0.0

    def far_value(self, dirs):
        return np.full(np.atleast_2d(dirs).shape[0], self.A)

    def far_delta(self, x, dirs):
        return np.zeros(np.atleast_2d(dirs).shape[0])

    def grad(self, x):
        return np.zeros_like(as_points(x, self.n))

    def hess(self, x):
        m = as_points(x, self.n).shape[0]
        return np.zeros((m, self.n, self.n))


class AffineField(Field):
    """Affine ramp on a slab: ``A clip(d . (x - c) / R, -1, 1)`` with unit ``d``."""

    exact_delta = True
    has_closed_derivatives = True
    kind = "affine"

    def __init__(self, n=1, center=None, radius=1.0, amplitude=1.0, exponent=0.0, direction=None):
        if n not in (1, 2):
            raise ConfigError("field.n", "n in {1, 2}", n)
        if not radius > 0:
            raise ConfigError("field.radius", "radius > 0", radius)
        self.n = n
        self.c = np.zeros(n) if center is None else np.atleast_1d(np.asarray(center, dtype=float)).copy()
        self.R = float(radius)
        self.A = float(amplitude)
        self.k = float(exponent)
        if direction is None:
            # exponent doubles as the direction angle in 2D
            direction = [1.0] if n == 1 else [math.cos(self.k), math.sin(self.k)]
        d = np.asarray(direction, dtype=float)
        self.d = d / np.linalg.norm(d)
        self.scale = self.R

    def config(self):
        return {"kind": "affine", "n": self.n, "center": [float(v) for v in self.c], "radius": self.R, "amplitude": self.A, "exponent": self.k}

    def _ell(self, pts):
        return (pts - self.c) @ self.d / self.R

    def _eval(self, pts):
        return self.A * np.clip(self._ell(pts), -1.0, 1.0)

    def delta(self, x, z):
        x = as_points(x, self.n)[0]
        z = as_points(z, self.n)
        l0 = float(self._ell(x[None, :])[0])
        dl = z @ self.d / self.R
        l1 = l0 + dl
        out = np.clip(l1, -1, 1) - min(max(l0, -1.0), 1.0)
        inside = (np.abs(l1) < 1) & (abs(l0) < 1)
        out = np.where(inside, dl, out)
        return self.A * out

    sup = property(lambda self: abs(self.A))
    inf = property(lambda self: -abs(self.A))
    lipschitz = property(lambda self: abs(self.A) / self.R)

    @property
    def far_radius(self):
        return float(np.linalg.norm(self.c)) + self.R if self.n == 1 else None

    def far_value(self, dirs):
        if self.n != 1:
            return None
        dirs = np.atleast_2d(dirs)
        return self.A * np.sign(dirs[:, 0] * self.d[0])

    def grad(self, x):
        pts = as_points(x, self.n)
        inside = np.abs(self._ell(pts)) < 1
        return np.where(inside[:, None], self.A / self.R * self.d[None, :], 0.0)

    def hess(self, x):
        m = as_points(x, self.n).shape[0]
        return np.zeros((m, self.n, self.n))

    def kink_distance(self, x):
        x = as_points(x, self.n)[0]
        l0 = float(self._ell(x[None, :])[0])
        return min(abs(l0 - 1.0), abs(l0 + 1.0)) * self.R

    def ray_breaks(self, x, omega):
        x = as_points(x, self.n)[0]
        l0 = float(self._ell(x[None, :])[0])
        rate = float(np.dot(omega, self.d)) / self.R
        if rate == 0:
            return np.empty(0)
        out = [(t - l0) / rate for t in (-1.0, 1.0)]
        return np.array(sorted(r for r in out if r > 0))


_CATALOG = {
    "constant": ConstantField,
    "affine": AffineField,
    "quadratic": QuadraticField,
    "power": PowerField,
    "power_bump": PowerBump,
    "smooth_bump": SmoothBump,
    "cosine_bump": CosineBump,
    "cutoff": CutoffField,
}


def make_field(kind: str, n: int = 1, center=None, radius: float = 1.0, amplitude: float = 1.0, exponent: float = 1.0) -> Field:
    """Build a catalog field from a declarative record."""
    if kind not in _CATALOG:
        raise ConfigError("field.kind", f"one of {CATALOG_KINDS}", kind)
    cls = _CATALOG[kind]
    if kind == "constant":
        return cls(n=n, amplitude=amplitude)
    return cls(n=n, center=center, radius=radius, amplitude=amplitude, exponent=exponent)


def field_from_config(rec: dict) -> Field:
    rec = dict(rec)
    kind = rec.pop("kind", None)
    allowed = {"n", "center", "radius", "amplitude", "exponent"}
    extra = set(rec) - allowed
    if extra:
        raise ConfigError("field", f"keys within {sorted(allowed)}", sorted(extra))
    return make_field(kind, **rec)


# composite fields -----------------------------------------------------------------


class LinearCombination(Field):
    """``const + sum_i c_i u_i``; increments and far models combine termwise."""

    def __init__(self, terms: Sequence[tuple[float, Field]], const: float = 0.0):
        terms = [(float(c), f) for c, f in terms]
        if not terms:
            raise ValueError("need at least one term")
        self.terms = terms
        self.const = float(const)
        self.n = terms[0][1].n
        if any(f.n != self.n for _, f in terms):
            raise ValueError("dimension mismatch")
        self.exact_delta = all(f.exact_delta for _, f in terms)
        self.has_closed_derivatives = all(f.has_closed_derivatives for _, f in terms)
        self.scale = min(f.scale for _, f in terms)

    @classmethod
    def of(cls, f: Field) -> "LinearCombination":
        if isinstance(f, LinearCombination):
            return f
        return cls([(1.0, f)])

    def __add__(self, other):
        if isinstance(other, Field):
            o = LinearCombination.of(other)
            return LinearCombination(self.terms + o.terms, self.const + o.const)
        return LinearCombination(self.terms, self.const + float(other))

    def __sub__(self, other):
        if isinstance(other, Field):
            return self + LinearCombination.of(other) * -1.0
        return LinearCombination(self.terms, self.const - float(other))

    def __mul__(self, a):
        a = float(a)
        return LinearCombination([(a * c, f) for c, f in self.terms], a * self.const)

    def _eval(self, pts):
        out = np.full(pts.shape[0], self.const)
        for c, f in self.terms:
            out = out + c * f._eval(pts)
        return out

    def delta(self, x, z):
        out = None
        for c, f in self.terms:
            d = c * f.delta(x, z)
            out = d if out is None else out + d
        return out

    @property
    def sup(self):
        if len(self.terms) == 1:
            c, f = self.terms[0]
            return (c * f.sup if c >= 0 else c * f.inf) + self.const
        return self.const + sum(c * f.sup if c >= 0 else c * f.inf for c, f in self.terms)

    @property
    def inf(self):
        if len(self.terms) == 1:
            c, f = self.terms[0]
            return (c * f.inf if c >= 0 else c * f.sup) + self.const
        return self.const + sum(c * f.inf if c >= 0 else c * f.sup for c, f in self.terms)

    @property
    def osc(self):
        # shift invariant by construction
        return sum(abs(c) * f.osc for c, f in self.terms)

    @property
    def lipschitz(self):
        return sum(abs(c) * f.lipschitz for c, f in self.terms if c != 0)

    @property
    def far_radius(self):
        radii = [f.far_radius for _, f in self.terms]
        if any(r is None for r in radii):
            return None
        return max(radii)

    def far_value(self, dirs):
        out = np.full(np.atleast_2d(dirs).shape[0], self.const)
        for c, f in self.terms:
            v = f.far_value(dirs)
            if v is None:
                return None
            out = out + c * v
        return out

    def far_delta(self, x, dirs):
        out = None
        for c, f in self.terms:
            v = f.far_delta(x, dirs)
            if v is None:
                return None
            out = c * v if out is None else out + c * v
        return out

    def kink_distance(self, x):
        return min(f.kink_distance(x) for c, f in self.terms if c != 0) if any(c != 0 for c, _ in self.terms) else math.inf

    def ray_breaks(self, x, omega):
        parts = [f.ray_breaks(x, omega) for c, f in self.terms if c != 0]
        return np.unique(np.concatenate(parts)) if parts else np.empty(0)

    def grad(self, x):
        return sum(c * f.grad(x) for c, f in self.terms)

    def hess(self, x):
        return sum(c * f.hess(x) for c, f in self.terms)

    def local_bounds(self, x, radius, samples=17):
        if self.has_closed_derivatives:
            return super().local_bounds(x, radius, samples)
        # combine termwise so lazily evaluated terms keep their own estimates
        M1 = M2 = 0.0
        g = np.zeros(self.n)
        x0 = as_points(x, self.n)
        for c, f in self.terms:
            m1, m2, _ = f.local_bounds(x, radius, samples)
            M1 += abs(c) * m1
            M2 += abs(c) * m2
            g = g + c * f.grad(x0)[0]
        return M1, M2, float(np.linalg.norm(g))

    def support_ball(self):
        if self.const != 0.0 or len(self.terms) != 1:
            return None
        c, f = self.terms[0]
        return f.support_ball() if c > 0 else None


class PiecewiseField(Field):
    """``inner`` on the closed ball B(center, radius), ``outer`` elsewhere."""

    def __init__(self, inner: Field, outer: Field, center, radius: float):
        self.inner_f = inner
        self.outer_f = outer
        self.n = inner.n
        self.c = np.atleast_1d(np.asarray(center, dtype=float))
        self.r = float(radius)
        self.exact_delta = inner.exact_delta and outer.exact_delta
        self.scale = min(inner.scale, outer.scale, self.r)

    def _inside(self, pts):
        return np.linalg.norm(pts - self.c, axis=1) <= self.r

    def _eval(self, pts):
        ins = self._inside(pts)
        out = np.empty(pts.shape[0])
        if np.any(ins):
            out[ins] = self.inner_f._eval(pts[ins])
        if np.any(~ins):
            out[~ins] = self.outer_f._eval(pts[~ins])
        return out

    def delta(self, x, z):
        x = as_points(x, self.n)[0]
        z = as_points(z, self.n)
        y = x[None, :] + z
        x_in = bool(self._inside(x[None, :])[0])
        y_in = self._inside(y)
        own = self.inner_f if x_in else self.outer_f
        same = y_in == x_in
        out = np.empty(z.shape[0])
        if np.any(same):
            out[same] = own.delta(x, z[same])
        if np.any(~same):
            other = self.outer_f if x_in else self.inner_f
            out[~same] = other._eval(y[~same]) - own._eval(x[None, :])[0]
        return out

    sup = property(lambda self: max(self.inner_f.sup, self.outer_f.sup))
    inf = property(lambda self: min(self.inner_f.inf, self.outer_f.inf))
    lipschitz = property(lambda self: math.inf)

    @property
    def far_radius(self):
        fr = self.outer_f.far_radius
        return None if fr is None else max(fr, float(np.linalg.norm(self.c)) + self.r)

    def far_value(self, dirs):
        return self.outer_f.far_value(dirs)

    def kink_distance(self, x):
        x = as_points(x, self.n)[0]
        d = abs(float(np.linalg.norm(x - self.c)) - self.r)
        own = self.inner_f if self._inside(x[None, :])[0] else self.outer_f
        return min(d, own.kink_distance(x))

    def ray_breaks(self, x, omega):
        x = as_points(x, self.n)[0]
        parts = [np.array(_sphere_breaks(x, np.asarray(omega, float), self.c, self.r)), self.inner_f.ray_breaks(x, omega), self.outer_f.ray_breaks(x, omega)]
        return np.unique(np.concatenate(parts))

    def grad(self, x):
        pts = as_points(x, self.n)
        ins = self._inside(pts)
        return np.where(ins[:, None], self.inner_f.grad(pts), self.outer_f.grad(pts))

    def hess(self, x):
        pts = as_points(x, self.n)
        ins = self._inside(pts)
        return np.where(ins[:, None, None], self.inner_f.hess(pts), self.outer_f.hess(pts))


# grids, tails and sampled fields ---------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on an axis-aligned box with ``shape`` nodes per axis."""

    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        shape = tuple(int(v) for v in np.atleast_1d(self.shape))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        if not (len(lo) == len(hi) == len(shape)) or len(lo) not in (1, 2):
            raise ConfigError("grid", "matching 1D or 2D bounds and shape", (lo, hi, shape))
        if any(m < 3 for m in shape):
            raise ConfigError("grid.shape", "at least 3 nodes per axis", shape)
        if any(not (b > a) for a, b in zip(lo, hi)):
            raise ConfigError("grid.box", "hi > lo on every axis so h > 0", (lo, hi))

    @classmethod
    def uniform(cls, lo, hi, h) -> "Grid":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        h = np.broadcast_to(np.asarray(h, dtype=float), lo.shape)
        shape = np.rint((hi - lo) / h).astype(int) + 1
        return cls(tuple(lo), tuple(lo + (shape - 1) * h), tuple(shape))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def h(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.shape) - 1)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, m) for a, b, m in zip(self.lo, self.hi, self.shape)]

    def nodes(self) -> np.ndarray:
        """Node coordinates in lexicographic (row-major) order, shape (N, n)."""
        ax = self.axes()
        if self.n == 1:
            return ax[0][:, None]
        X, Y = np.meshgrid(ax[0], ax[1], indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        pts = as_points(pts, self.n)
        return np.all((pts >= np.array(self.lo) + margin) & (pts <= np.array(self.hi) - margin), axis=1)


@dataclass(frozen=True)
class TailModel:
    """Field values outside the sampled box: zero, constant, or clamped to the box."""

    kind: str = "zero"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "nearest"):
            raise ConfigError("tail.kind", "one of ('zero', 'constant', 'nearest')", self.kind)
        if self.kind == "zero" and self.c != 0.0:
            raise ConfigError("tail.c", "c = 0 for a zero tail", self.c)


class SampledField(Field):
    """Multilinear interpolation of node values plus a tail outside the box."""

    exact_delta = False

    def __init__(self, grid: Grid, values, tail: TailModel = TailModel()):
        vals = np.asarray(values, dtype=float).reshape(grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ConfigError("values", "finite node values", "non-finite")
        self.grid = grid
        self.values = vals
        self.tail = tail
        self.n = grid.n
        self.scale = float(np.min(grid.h))
        self._lo = np.array(grid.lo)
        self._hi = np.array(grid.hi)
        if self.n == 2:
            self._interp = RegularGridInterpolator(grid.axes(), vals, method="linear", bounds_error=False, fill_value=None)
        self._ax = grid.axes()

    def _tail_value(self):
        return 0.0 if self.tail.kind == "zero" else self.tail.c

    def _eval(self, pts):
        inside = np.all((pts >= self._lo) & (pts <= self._hi), axis=1)
        q = np.clip(pts, self._lo, self._hi)
        if self.n == 1:
            v = np.interp(q[:, 0], self._ax[0], self.values)
        else:
            v = self._interp(q)
        if self.tail.kind != "nearest":
            v = np.where(inside, v, self._tail_value())
        return v

    @property
    def sup(self):
        m = float(self.values.max())
        return m if self.tail.kind == "nearest" else max(m, self._tail_value())

    @property
    def inf(self):
        m = float(self.values.min())
        return m if self.tail.kind == "nearest" else min(m, self._tail_value())

    @property
    def lipschitz(self):
        h = self.grid.h
        slopes = [np.max(np.abs(np.diff(self.values, axis=k))) / h[k] for k in range(self.n)]
        lip = float(np.sqrt(np.sum(np.square(slopes)))) if self.n == 2 else float(slopes[0])
        if self.tail.kind != "nearest":
            edge = np.concatenate([np.atleast_1d(self.values[0]).ravel(), np.atleast_1d(self.values[-1]).ravel()])
            if np.any(edge != self._tail_value()):
                return math.inf
        return lip

    @property
    def far_radius(self):
        return float(np.linalg.norm(np.maximum(np.abs(self._lo), np.abs(self._hi))))

    def far_value(self, dirs):
        dirs = np.atleast_2d(dirs)
        if self.tail.kind != "nearest":
            return np.full(dirs.shape[0], self._tail_value())
        if self.n == 1:
            return np.where(dirs[:, 0] > 0, self.values[-1], self.values[0])
        return None

    def grad(self, x):
        pts = as_points(x, self.n)
        h = self.grid.h
        out = np.zeros_like(pts)
        inside = np.all((pts >= self._lo) & (pts <= self._hi), axis=1)
        if self.n == 1:
            idx = np.clip(np.floor((pts[:, 0] - self._lo[0]) / h[0]).astype(int), 0, self.grid.shape[0] - 2)
            out[:, 0] = (self.values[idx + 1] - self.values[idx]) / h[0]
        else:
            i = np.clip(np.floor((pts[:, 0] - self._lo[0]) / h[0]).astype(int), 0, self.grid.shape[0] - 2)
            j = np.clip(np.floor((pts[:, 1] - self._lo[1]) / h[1]).astype(int), 0, self.grid.shape[1] - 2)
            tx = (pts[:, 0] - self._lo[0]) / h[0] - i
            ty = (pts[:, 1] - self._lo[1]) / h[1] - j
            v = self.values
            out[:, 0] = ((v[i + 1, j] - v[i, j]) * (1 - ty) + (v[i + 1, j + 1] - v[i, j + 1]) * ty) / h[0]
            out[:, 1] = ((v[i, j + 1] - v[i, j]) * (1 - tx) + (v[i + 1, j + 1] - v[i + 1, j]) * tx) / h[1]
        return np.where(inside[:, None], out, 0.0)

    def hess(self, x):
        pts = as_points(x, self.n)
        m = pts.shape[0]
        out = np.zeros((m, self.n, self.n))
        if self.n == 2:
            h = self.grid.h
            i = np.clip(np.floor((pts[:, 0] - self._lo[0]) / h[0]).astype(int), 0, self.grid.shape[0] - 2)
            j = np.clip(np.floor((pts[:, 1] - self._lo[1]) / h[1]).astype(int), 0, self.grid.shape[1] - 2)
            v = self.values
            cxy = (v[i + 1, j + 1] - v[i + 1, j] - v[i, j + 1] + v[i, j]) / (h[0] * h[1])
            out[:, 0, 1] = out[:, 1, 0] = cxy
        return out

    def kink_distance(self, x):
        x = as_points(x, self.n)[0]
        h = self.grid.h
        d = math.inf
        for k in range(self.n):
            t = (x[k] - self._lo[k]) / h[k]
            d = min(d, abs(t - round(t)) * h[k]) if self._lo[k] - h[k] <= x[k] <= self._hi[k] + h[k] else d
            d = min(d, abs(x[k] - self._lo[k]), abs(x[k] - self._hi[k]))
        return d

    def ray_breaks(self, x, omega):
        x = as_points(x, self.n)[0]
        omega = np.asarray(omega, dtype=float)
        out = []
        for k in range(self.n):
            if omega[k] == 0:
                continue
            lines = self._ax[k]
            r = (lines - x[k]) / omega[k]
            out.append(r[r > 0])
        return np.unique(np.concatenate(out)) if out else np.empty(0)

    def node_slopes(self, x) -> tuple[float, float] | None:
        """One-sided slopes at a 1D node ``x`` (left, right), or None off-node."""
        if self.n != 1:
            return None
        x0 = float(as_points(x, 1)[0, 0])
        h = float(self.grid.h[0])
        t = (x0 - self._lo[0]) / h
        i = int(round(t))
        if abs(t - i) > 1e-12 or i <= 0 or i >= self.grid.shape[0] - 1:
            return None
        v = self.values
        return (v[i] - v[i - 1]) / h, (v[i + 1] - v[i]) / h

    # serialization
    def to_csv(self, path) -> None:
        save_grid_csv(path, self.grid, self.values)

    def to_binary(self, path) -> None:
        save_grid_binary(path, self.grid, self.values)


def sample_field(f: Field, grid: Grid, tail: TailModel = TailModel()) -> SampledField:
    return SampledField(grid, f(grid.nodes()).reshape(grid.shape), tail)


def save_grid_csv(path, grid: Grid, values) -> None:
    """Header ``dims,lo...,hi...,h...`` then one node value per row, row-major."""
    vals = np.asarray(values, dtype=float).ravel()
    head = [str(grid.n)] + [repr(v) for v in grid.lo] + [repr(v) for v in grid.hi] + [repr(float(v)) for v in grid.h] + [str(m) for m in grid.shape]
    lines = ["dims,box_lo,box_hi,h,shape", ",".join(head)] + [repr(float(v)) for v in vals]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_grid_csv(path) -> tuple[Grid, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[1].split(",")
    n = int(head[0])
    lo = tuple(float(v) for v in head[1 : 1 + n])
    hi = tuple(float(v) for v in head[1 + n : 1 + 2 * n])
    shape = tuple(int(v) for v in head[1 + 3 * n : 1 + 4 * n])
    grid = Grid(lo, hi, shape)
    vals = np.array([float(v) for v in lines[2:]]).reshape(shape)
    return grid, vals


_MAGIC = b"NLPG"


def save_grid_binary(path, grid: Grid, values) -> None:
    """Little-endian layout: magic, dims, lo, hi, h, shape, then float64 values."""
    vals = np.ascontiguousarray(np.asarray(values, dtype="<f8").ravel())
    n = grid.n
    head = _MAGIC + struct.pack("<i", n) + struct.pack(f"<{3 * n}d", *grid.lo, *grid.hi, *map(float, grid.h)) + struct.pack(f"<{n}q", *grid.shape)
    Path(path).write_bytes(head + vals.tobytes())


def load_grid_binary(path) -> tuple[Grid, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError("not a grid file")
    n = struct.unpack_from("<i", raw, 4)[0]
    off = 8
    nums = struct.unpack_from(f"<{3 * n}d", raw, off)
    off += 24 * n
    shape = struct.unpack_from(f"<{n}q", raw, off)
    off += 8 * n
    grid = Grid(nums[:n], nums[n : 2 * n], shape)
    vals = np.frombuffer(raw[off:], dtype="<f8").reshape(shape).copy()
    return grid, vals


# decay and kernel audits ---------------------------------------------------------


def _tail_weight_integral(n: int, a: float, R: float) -> float:
    """Integral of (1 + |x|)^(-n-a) over |x| > R."""
    if n == 1:
        return 2.0 * (1.0 + R) ** (-a) / a
    return 2.0 * math.pi * ((1.0 + R) ** (-a) / a - (1.0 + R) ** (-1.0 - a) / (1.0 + a))


def decay_norm(u: Field, params: OperatorParams, R_max: float = 50.0, panels: int = 400) -> tuple[float, float]:
    """Weighted norm of ``|u|^(p-1) / (1+|x|)^(n+sp)`` truncated at ``R_max``.

    Returns ``(value, remainder_bound)``. The truncated part is integrated
    with Gauss-Legendre panels graded geometrically in ``|x|``; the remainder
    uses ``sup |u|^(p-1)`` times the closed-form weight integral.
    """
    n, a, e = params.n, params.sp, params.p - 1.0
    box = getattr(u, "grid", None)
    if box is not None and not R_max > float(np.linalg.norm(np.maximum(np.abs(u._lo), np.abs(u._hi)))):
        raise ConfigError("R_max", "R_max larger than the sampled box", R_max)
    bound = max(abs(u.sup), abs(u.inf))
    if not math.isfinite(bound):
        raise DecayUncertified("unbounded field")
    xg, wg = np.polynomial.legendre.leggauss(8)
    edges = np.concatenate([[0.0], np.geomspace(1e-3, R_max, panels)])
    extra = []
    for d in (1.0, -1.0) if n == 1 else (1.0,):
        if n == 1:
            extra += list(u.ray_breaks(np.zeros(1), np.array([d])))
    edges = np.unique(np.concatenate([edges, [b for b in extra if 0 < b < R_max]]))
    a_, b_ = edges[:-1], edges[1:]
    r = (0.5 * (b_ - a_)[:, None] * (xg[None, :] + 1) + a_[:, None]).ravel()
    wr = (0.5 * (b_ - a_)[:, None] * wg[None, :]).ravel()
    if n == 1:
        vals = (np.abs(u(r[:, None])) ** e + np.abs(u(-r[:, None])) ** e) * (1 + r) ** (-1 - a)
        total = float(np.dot(wr, vals))
    else:
        m = 64
        th = (np.arange(m) + 0.5) * 2 * math.pi / m
        total = 0.0
        for t in th:
            pts = r[:, None] * np.array([math.cos(t), math.sin(t)])[None, :]
            total += (2 * math.pi / m) * float(np.dot(wr, np.abs(u(pts)) ** e * (1 + r) ** (-2 - a) * r))
    remainder = bound**e * _tail_weight_integral(n, a, R_max)
    if not (math.isfinite(total) and math.isfinite(remainder)):
        raise DecayUncertified("decay norm diverged")
    return total, remainder


def kernel_bounds_audit(kernel: KernelSpec, params: OperatorParams, sample_pairs) -> AuditReport:
    """Check symmetry and the ellipticity sandwich on sample pairs."""
    import time

    t0 = time.perf_counter()
    lam = kernel.lam
    rep = AuditReport("kernel_bounds", params={**params.describe(), "kernel_kind": kernel.kind, "kernel_lambda": lam}, tolerances={"symmetry": 1e-12})
    a = params.n + params.sp
    for i, (x, y) in enumerate(sample_pairs):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        r = float(np.linalg.norm(x - y))
        if r == 0:
            raise ConfigError("sample_pairs", "x != y", (x.tolist(), y.tolist()))
        kxy = float(kernel(x, y, params)[0])
        kyx = float(kernel(y, x, params)[0])
        ratio = kxy * r**a
        sym = abs(kxy - kyx) / max(abs(kxy), 1e-300)
        ok = (1.0 / lam) * (1 - 1e-12) <= ratio <= lam * (1 + 1e-12) and sym <= 1e-12
        rep.add(ok, index=i, distance=r, ratio=ratio, symmetry_defect=sym)
    rep.summary = {"max_ratio": max((rec["ratio"] for rec in rep.records), default=0.0)}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()
