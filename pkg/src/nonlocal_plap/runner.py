"""Experiment orchestration: config -> audit reports -> files on disk."""

from __future__ import annotations

import csv
import io
import math
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_rhs, serialize
from .fields import CutoffField, Grid, QuadraticField, SmoothBump, kernel_bounds_audit
from .harness import (
    ConstructedSolution,
    bump_family,
    caccioppoli_audit,
    ds_perturbation_audit,
    envelope_audit,
    eps_convergence_study,
    pointwise_eps_study,
    viscosity_touch_audit,
    weak_supersolution_audit,
)
from .quadrature import eval_ds, eval_plap
from .report import AuditReport, fmt_float, stable_hash
from .scalar import RhsSpec, chord_identity_check, growth_audit, rhs_from_terms


def config_hash(cfg: ExperimentConfig) -> str:
    return stable_hash(serialize(cfg))


def _grid(cfg: ExperimentConfig) -> Grid:
    return Grid.uniform(cfg.grid_lo, cfg.grid_hi, cfg.grid_h)


def _center(cfg: ExperimentConfig) -> np.ndarray:
    return np.asarray(cfg.u.center, dtype=float) if cfg.u.center else np.zeros(cfg.n)


def _eval(cfg: ExperimentConfig, which: str) -> AuditReport:
    t0 = time.perf_counter()
    params = cfg.operator()
    u = cfg.u.build(cfg.n)
    op = eval_plap if which == "plap" else eval_ds
    rep = AuditReport(f"eval_{which}", params={**params.describe(), "u": repr(u), "scheme": cfg.scheme.hash()}, tolerances={"tol_target": cfg.scheme.tol_target})
    for x in cfg.point_array():
        res = op(u, x, params, cfg.scheme)
        rep.add(math.isfinite(res.value), **{f"x{k}": float(x[k]) for k in range(cfg.n)}, value=res.value, inner_bound=res.inner_bound, tail_bound=res.tail_bound)
    rep.summary = {"max_abs_value": max((abs(r["value"]) for r in rep.records), default=0.0)}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


def _chord(cfg: ExperimentConfig) -> AuditReport:
    rng = np.random.default_rng(cfg.seed)
    ab = rng.uniform(-10.0, 10.0, size=(cfg.samples, 2))
    return chord_identity_check(ab[:, 0], ab[:, 1], cfg.p, tol=cfg.tol)


def _rhs(cfg: ExperimentConfig) -> RhsSpec:
    return rhs_from_terms(parse_rhs(cfg.rhs or "constant:1.0"), cfg.p, t_max=2.0)


def _growth(cfg: ExperimentConfig) -> AuditReport:
    rng = np.random.default_rng(cfg.seed)
    xs = rng.uniform(-2, 2, size=(cfg.samples, cfg.n))
    ts = rng.uniform(-2, 2, size=cfg.samples)
    es = rng.uniform(0, 10, size=cfg.samples)
    return growth_audit(_rhs(cfg), cfg.operator(), list(zip(xs, ts, es)), tol=cfg.tol)


def _solution(cfg: ExperimentConfig) -> ConstructedSolution:
    return ConstructedSolution.build(cfg.u.build(cfg.n), cfg.operator(), _grid(cfg), cfg.scheme)


def _caccioppoli(cfg: ExperimentConfig) -> AuditReport:
    sol = _solution(cfg)
    cut = [CutoffField(cfg.n, center=_center(cfg), radius=R) for R in cfg.cutoffs]
    return caccioppoli_audit(sol, cut)


def _ds_perturbation(cfg: ExperimentConfig) -> AuditReport:
    F = cfg.u.build(cfg.n)
    eta = cfg.aux.build(cfg.n) if cfg.aux is not None else SmoothBump(cfg.n, center=_center(cfg) + 0.3, radius=0.1)
    return ds_perturbation_audit(F, eta, cfg.thetas, cfg.rho, cfg.operator(), cfg.scheme)


def _pointwise(cfg: ExperimentConfig) -> AuditReport:
    return pointwise_eps_study(_solution(cfg), cfg.eps, budget=cfg.budget, margin_q=cfg.q_margin)


def _weak(cfg: ExperimentConfig) -> AuditReport:
    fam = bump_family(cfg.n, cfg.family, radius=cfg.family_radius)
    return weak_supersolution_audit(_solution(cfg), fam, slack=cfg.slack, rel_tol=cfg.rel_tol)


def _eps_study(cfg: ExperimentConfig) -> AuditReport:
    return eps_convergence_study(cfg.u.build(cfg.n), (cfg.grid_lo, cfg.grid_hi), cfg.eps, cfg.operator(), cfg.scheme, cfg.q_margin)


def _touch(cfg: ExperimentConfig) -> AuditReport:
    """Touch ``u`` from below at each point with ``u - c |x - x0|^2``.

    Without an explicit right-hand side the constant ``f = (-Delta)_p^s u(x0)``
    is used, for which ``u`` is a solution at ``x0``.
    """
    t0 = time.perf_counter()
    params = cfg.operator()
    u = cfg.u.build(cfg.n)
    rep = AuditReport("viscosity_touch", params={**params.describe(), "u": repr(u), "c": cfg.touch_c}, tolerances={"tol": cfg.tol})
    for x0 in cfg.point_array():
        dip = QuadraticField(cfg.n, center=x0, radius=5.0, amplitude=cfg.touch_c)
        psi = u - dip
        if cfg.rhs:
            rhs = _rhs(cfg)
        else:
            f0 = eval_plap(u, x0, params, cfg.scheme).value
            rhs = RhsSpec(f=lambda x, t, eta, f0=f0: f0, label="constant")
        sub = viscosity_touch_audit(u, psi, x0, rhs, params, cfg.scheme, tol=cfg.tol)
        for rec in sub.records:
            rep.add(rec["ok"], **{k: v for k, v in rec.items() if k != "ok"})
    rep.summary = {"worst_margin": min((r["margin"] for r in rep.records), default=0.0)}
    rep.runtime = time.perf_counter() - t0
    return rep.finalize()


def _kernel(cfg: ExperimentConfig) -> AuditReport:
    params = cfg.operator()
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(-2, 2, size=(cfg.samples, cfg.n))
    y = x + rng.uniform(0.01, 2, size=(cfg.samples, cfg.n)) * rng.choice([-1.0, 1.0], size=(cfg.samples, cfg.n))
    return kernel_bounds_audit(params.kernel, params, list(zip(x, y)))


def _inf_conv(cfg: ExperimentConfig) -> AuditReport:
    return envelope_audit(cfg.u.build(cfg.n), cfg.eps, _grid(cfg), cfg.operator(), cfg.q_margin)


DISPATCH = {
    "eval-plap": lambda c: _eval(c, "plap"),
    "eval-ds": lambda c: _eval(c, "ds"),
    "inf-conv": _inf_conv,
    "lemma-chord": _chord,
    "growth-audit": _growth,
    "caccioppoli": _caccioppoli,
    "ds-perturbation": _ds_perturbation,
    "pointwise-audit": _pointwise,
    "weak-audit": _weak,
    "eps-study": _eps_study,
    "visc-touch": _touch,
    "kernel-audit": _kernel,
}


def run_config(cfg: ExperimentConfig) -> AuditReport:
    """Run one experiment and stamp the report with the config hash."""
    rep = DISPATCH[cfg.validate().kind](cfg)
    rep.config_hash = config_hash(cfg)
    return rep


# output -----------------------------------------------------------------------------

_PLOT_X = ("x", "x0", "eps", "theta", "radius", "test", "cutoff", "index", "a")
_PLOT_Y = ("margin", "residual", "integral", "sup_difference", "value", "ratio", "max_error", "sup_distance", "relative", "f")


def plot_rows(rep: AuditReport) -> tuple[str, str, list[tuple]]:
    """Pick an abscissa and ordinate column from the records for plotting."""
    cols = rep.columns()
    xk = next((k for k in _PLOT_X if k in cols), None)
    yk = next((k for k in _PLOT_Y if k in cols), None)
    if xk is None or yk is None:
        return "index", "ok", [(i, int(bool(r.get("ok", True)))) for i, r in enumerate(rep.records)]
    return xk, yk, [(r.get(xk, ""), r.get(yk, "")) for r in rep.records]


def plot_csv(rep: AuditReport) -> str:
    xk, yk, rows = plot_rows(rep)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([xk, yk])
    for a, b in rows:
        w.writerow([fmt_float(a), fmt_float(b)])
    return buf.getvalue()


def write_report(rep: AuditReport, out_dir, stem: str | None = None) -> list[Path]:
    """JSON report, per-point CSV and a two-column plot-data CSV."""
    stem = stem or rep.name
    jp, cp = rep.write(out_dir, stem)
    pp = Path(out_dir) / f"{stem}_plot.csv"
    with open(pp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(plot_csv(rep))
    return [jp, cp, pp]
