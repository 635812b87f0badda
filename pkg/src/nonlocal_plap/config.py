"""Flat, sectioned experiment configs with bit-exact text round-tripping."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .fields import CATALOG_KINDS, KernelSpec, OperatorParams, make_field
from .quadrature import QuadratureScheme

EXPERIMENT_KINDS = (
    "eval-plap",
    "eval-ds",
    "inf-conv",
    "lemma-chord",
    "growth-audit",
    "caccioppoli",
    "ds-perturbation",
    "pointwise-audit",
    "weak-audit",
    "eps-study",
    "visc-touch",
    "kernel-audit",
)


@dataclass(frozen=True)
class FieldSpec:
    kind: str = "smooth_bump"
    center: tuple = ()
    radius: float = 1.0
    amplitude: float = 1.0
    exponent: float = 1.0

    def build(self, n: int):
        return make_field(self.kind, n, list(self.center) if self.center else None, self.radius, self.amplitude, self.exponent)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: operator, scheme, fields, regularization and audit knobs."""

    kind: str = "eval-plap"
    seed: int = 0
    label: str = ""
    out_dir: str = ""
    # operator
    n: int = 1
    s: float = 0.5
    p: float = 2.0
    kernel: str = "fractional"
    lam: float = 1.0
    kernel_scale: float = 1.0
    # scheme
    scheme: QuadratureScheme = field(default_factory=QuadratureScheme)
    # fields
    u: FieldSpec = field(default_factory=FieldSpec)
    aux: FieldSpec | None = None
    # grid
    grid_lo: tuple = (-1.5,)
    grid_hi: tuple = (1.5,)
    grid_h: float = 0.05
    # regularization
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    q_margin: float = 0.5
    delta: float = 0.0
    # audit knobs
    points: tuple = (0.0,)
    samples: int = 1000
    thetas: tuple = (0.2, 0.1, 0.05, 0.025)
    rho: float = 0.05
    slack: float = 0.0
    family: int = 5
    family_radius: float = 0.3
    cutoffs: tuple = (0.6, 0.9, 1.2)
    touch_c: float = 0.5
    rhs: str = ""
    tol: float = 1e-9
    budget: float = 2e-3
    rel_tol: float = 5e-3

    def operator(self) -> OperatorParams:
        try:
            kern = KernelSpec(self.kernel, self.lam, self.kernel_scale)
            return OperatorParams(self.n, self.s, self.p, kern)
        except ConfigError as e:
            raise ConfigError(f"operator.{e.field}", e.invariant, e.value) from None

    def point_array(self) -> np.ndarray:
        pts = np.asarray(self.points, dtype=float)
        if pts.size % self.n:
            raise ConfigError("audit.points", f"a multiple of n = {self.n} coordinates", self.points)
        return pts.reshape(-1, self.n)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError("experiment.kind", f"one of {EXPERIMENT_KINDS}", self.kind)
        if not (0 <= self.seed < 2**64):
            raise ConfigError("experiment.seed", "0 <= seed < 2^64", self.seed)
        self.operator()
        for name, spec in (("field", self.u), ("aux", self.aux)):
            if spec is None:
                continue
            if spec.kind not in CATALOG_KINDS:
                raise ConfigError(f"{name}.kind", f"a catalog id in {CATALOG_KINDS}", spec.kind)
            if spec.center and len(spec.center) != self.n:
                raise ConfigError(f"{name}.center", f"{self.n} coordinates", spec.center)
            try:
                spec.build(self.n)
            except ConfigError as e:
                raise ConfigError(f"{name}.{e.field.split('.')[-1]}", e.invariant, e.value) from None
        if len(self.grid_lo) != self.n or len(self.grid_hi) != self.n:
            raise ConfigError("grid.lo", f"{self.n} coordinates for lo and hi", (self.grid_lo, self.grid_hi))
        if not (self.grid_h > 0):
            raise ConfigError("grid.h", "h > 0", self.grid_h)
        if any(not (e > 0) for e in self.eps):
            raise ConfigError("regularization.eps", "every eps > 0", self.eps)
        if list(self.eps) != sorted(self.eps, reverse=True):
            raise ConfigError("regularization.eps", "a decreasing sequence", self.eps)
        if not (self.q_margin > 0):
            raise ConfigError("regularization.q_margin", "q_margin > 0", self.q_margin)
        if not (self.delta >= 0):
            raise ConfigError("regularization.delta", "delta >= 0", self.delta)
        if self.samples < 1:
            raise ConfigError("audit.samples", "samples >= 1", self.samples)
        for name in ("tol", "budget", "rel_tol", "rho"):
            if not (getattr(self, name) > 0):
                raise ConfigError(f"audit.{name}", f"{name} > 0", getattr(self, name))
        if any(not (t > 0) for t in self.thetas) or any(not (r > 0) for r in self.cutoffs):
            raise ConfigError("audit.thetas", "positive thetas and cutoff radii", (self.thetas, self.cutoffs))
        if self.family < 1:
            raise ConfigError("audit.family", "family >= 1", self.family)
        parse_rhs(self.rhs)
        self.point_array()
        return self


RHS_TERM_KINDS = ("constant", "minus_t", "abs_x", "eta_power")


def parse_rhs(text: str) -> list[dict]:
    """``"constant:1.0; eta_power:0.5:0.5"`` -> term records ``kind[:coef[:power]]``."""
    terms = []
    for i, chunk in enumerate(t for t in text.split(";") if t.strip()):
        parts = [q.strip() for q in chunk.split(":")]
        if parts[0] not in RHS_TERM_KINDS or len(parts) > 3:
            raise ConfigError(f"audit.rhs[{i}]", f"kind[:coef[:power]] with kind in {RHS_TERM_KINDS}", chunk.strip())
        try:
            rec = {"kind": parts[0]}
            if len(parts) > 1:
                rec["coef"] = float(parts[1])
            if len(parts) > 2:
                rec["power"] = float(parts[2])
        except ValueError:
            raise ConfigError(f"audit.rhs[{i}]", "numeric coef and power", chunk.strip()) from None
        terms.append(rec)
    return terms


# text format ----------------------------------------------------------------------

_SECTIONS = {
    "experiment": ("kind", "seed", "label", "out_dir"),
    "operator": ("n", "s", "p", "kernel", "lam", "kernel_scale"),
    "grid": ("grid_lo", "grid_hi", "grid_h"),
    "regularization": ("eps", "q_margin", "delta"),
    "audit": ("points", "samples", "thetas", "rho", "slack", "family", "family_radius", "cutoffs", "touch_c", "rhs", "tol", "budget", "rel_tol"),
}
_KEY = {"grid_lo": "lo", "grid_hi": "hi", "grid_h": "h"}


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse(text: str, like, name: str):
    text = text.strip()
    try:
        if isinstance(like, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(like, int) and not isinstance(like, bool):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            return tuple(float(t) for t in text.split(",") if t.strip()) if text else ()
    except ValueError:
        raise ConfigError(name, f"a value of type {type(like).__name__}", text) from None
    return text


def serialize(cfg: ExperimentConfig) -> str:
    """INI-style text; floats are written with ``repr`` so parsing is exact."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec, keys in _SECTIONS.items():
        cp[sec] = {_KEY.get(k, k): _fmt(getattr(cfg, k)) for k in keys}
    cp["scheme"] = {f.name: _fmt(getattr(cfg.scheme, f.name)) for f in fields(QuadratureScheme)}
    for sec, spec in (("field", cfg.u), ("aux", cfg.aux)):
        if spec is not None:
            cp[sec] = {f.name: _fmt(getattr(spec, f.name)) for f in fields(FieldSpec)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


_SCHEME_LIKE = {"rho_inner": 0.0, "rho_smooth": 0.0, "R_trunc": 0.0, "shells": 0, "angular_nodes": 0, "gl_nodes": 0, "tol_target": 0.0, "rho_cap": 0.0}
_FIELD_LIKE = {"kind": "", "center": (), "radius": 0.0, "amplitude": 0.0, "exponent": 0.0}


def parse(text: str) -> ExperimentConfig:
    """Parse config text; unknown sections or keys are errors naming the key."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", "well-formed key = value sections", str(e).splitlines()[0]) from None
    base = ExperimentConfig()
    kw = {}
    known = set(_SECTIONS) | {"scheme", "field", "aux"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(sec, f"a section in {sorted(known)}", "unknown section")
    for sec, keys in _SECTIONS.items():
        if sec not in cp:
            continue
        inv = {_KEY.get(k, k): k for k in keys}
        for key, val in cp[sec].items():
            if key not in inv:
                raise ConfigError(f"{sec}.{key}", f"a key in {sorted(inv)}", "unknown key")
            attr = inv[key]
            kw[attr] = _parse(val, getattr(base, attr), f"{sec}.{key}")
    if "scheme" in cp:
        sk = {}
        for key, val in cp["scheme"].items():
            if key not in _SCHEME_LIKE:
                raise ConfigError(f"scheme.{key}", f"a key in {sorted(_SCHEME_LIKE)}", "unknown key")
            sk[key] = None if (key == "shells" and val.strip().lower() == "none") else _parse(val, _SCHEME_LIKE[key], f"scheme.{key}")
        try:
            kw["scheme"] = QuadratureScheme(**sk)
        except ConfigError as e:
            raise ConfigError(e.field if e.field.startswith("scheme") else f"scheme.{e.field}", e.invariant, e.value) from None
    for sec, attr in (("field", "u"), ("aux", "aux")):
        if sec in cp:
            fk = {}
            for key, val in cp[sec].items():
                if key not in _FIELD_LIKE:
                    raise ConfigError(f"{sec}.{key}", f"a key in {sorted(_FIELD_LIKE)}", "unknown key")
                fk[key] = _parse(val, _FIELD_LIKE[key], f"{sec}.{key}")
            kw[attr] = FieldSpec(**fk)
    return replace(base, **kw).validate()


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def random_config(rng: np.random.Generator) -> ExperimentConfig:
    """A valid random config (used for round-trip checks)."""
    n = int(rng.integers(1, 3))
    kind = str(rng.choice(EXPERIMENT_KINDS))
    fk = str(rng.choice(CATALOG_KINDS))
    expo = float(rng.uniform(0.2, 0.8)) if fk == "cutoff" else float(rng.uniform(0.5, 4))
    u = FieldSpec(fk, tuple(rng.normal(size=n).tolist()), float(rng.uniform(0.2, 3)), float(rng.normal()), expo)
    aux = None if rng.random() < 0.5 else FieldSpec("smooth_bump", tuple(rng.normal(size=n).tolist()), float(rng.uniform(0.1, 1)), 1.0, 1.0)
    shells = None if rng.random() < 0.5 else int(rng.integers(8, 64))
    scheme = QuadratureScheme(
        rho_smooth=float(rng.choice([0.0, rng.uniform(1e-4, 1e-2)])),
        shells=shells,
        angular_nodes=int(rng.integers(4, 64)),
        gl_nodes=int(rng.integers(2, 16)),
        tol_target=float(10 ** rng.uniform(-12, -6)),
    )
    kernel = str(rng.choice(["fractional", "general"]))
    lam = 1.0 if kernel == "fractional" else float(rng.uniform(1.0, 3.0))
    eps = tuple(sorted(rng.uniform(0.01, 0.5, size=int(rng.integers(1, 5))).tolist(), reverse=True))
    return ExperimentConfig(
        kind=kind,
        seed=int(rng.integers(0, 2**63)),
        label=f"cfg{int(rng.integers(0, 10**6))}",
        n=n,
        s=float(rng.uniform(0.01, 0.99)),
        p=float(rng.uniform(1.05, 5.0)),
        kernel=kernel,
        lam=lam,
        scheme=scheme,
        u=u,
        aux=aux,
        grid_lo=tuple((-rng.uniform(1, 3, size=n)).tolist()),
        grid_hi=tuple(rng.uniform(1, 3, size=n).tolist()),
        grid_h=float(rng.uniform(0.01, 0.2)),
        eps=eps,
        q_margin=float(rng.uniform(0.1, 1.0)),
        delta=float(rng.uniform(0, 0.1)),
        points=tuple(rng.normal(size=n * int(rng.integers(1, 4))).tolist()),
        samples=int(rng.integers(1, 2000)),
        rho=float(rng.uniform(0.01, 0.1)),
        slack=float(rng.uniform(0, 0.2)),
        tol=float(10 ** rng.uniform(-12, -3)),
    ).validate()
