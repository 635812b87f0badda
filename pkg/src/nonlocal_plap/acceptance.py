"""The smoke and full verification suites.

Each check is a module-level function ``check(seed) -> AuditReport`` so the
suite can run them in worker processes. Reports of the full suite are named
``cNN_<topic>`` after the acceptance criterion they decide.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig, FieldSpec, parse, random_config, serialize
from .errors import ConfigError, MissingCertificate, NonlocalError, SingularityUnresolved
from .fields import ConstantField, CutoffField, Grid, OperatorParams, QuadraticField, SmoothBump, make_field
from .harness import (
    ConstructedSolution,
    bump_family,
    caccioppoli_audit,
    ds_perturbation_audit,
    envelope_audit,
    eps_convergence_study,
    moreau_quadratic_audit,
    pointwise_eps_study,
    viscosity_touch_audit,
    weak_supersolution_audit,
)
from .oracle import oracle_ds_1d, oracle_plap_1d
from .quadrature import QuadratureScheme, eval_ds, eval_plap
from .regularization import choose_q, f_eps, mollify
from .report import AuditReport, stable_hash
from .runner import run_config
from .scalar import RhsSpec, chord_identity_check

PS = (1.5, 2.0, 3.0)
SS = (0.3, 0.5, 0.7)
EPS = (0.2, 0.1, 0.05, 0.025)
BUMPS = (("power_bump", 1.0), ("power_bump", 3.0), ("smooth_bump", 1.0), ("cosine_bump", 1.0))


def _combine(name: str, subs, params: dict | None = None, extra_ok: bool = True, **summary) -> AuditReport:
    """Flatten sub-reports into one, tagging each record with its source."""
    rep = AuditReport(name, params=params or {}, tolerances={s.name: s.tolerances for s in subs})
    for j, sub in enumerate(subs):
        for rec in sub.records:
            rep.add(rec.get("ok", True), audit=sub.name, part=j, **{k: v for k, v in rec.items() if k != "ok"})
    rep.summary = summary
    rep.runtime = sum(s.runtime for s in subs)
    return rep.finalize(extra_ok and all(s.passed for s in subs) and not rep.violations)


def _timed(rep: AuditReport, t0: float, limit: float | None = None) -> AuditReport:
    rep.runtime = time.perf_counter() - t0
    if limit is not None:
        rep.tolerances["runtime_limit"] = limit
        rep.summary["within_time"] = rep.runtime < limit
        rep.passed = rep.passed and rep.runtime < limit
    return rep


# criteria -------------------------------------------------------------------------


def c01_chord_identity(seed: int = 0) -> AuditReport:
    """Residual < 1e-9 and the chord bound on 1000 pairs per exponent, under 5 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    subs = []
    for p in (1.3, 1.5, 2.0, 2.7, 4.0):
        ab = rng.uniform(-10.0, 10.0, size=(1000, 2))
        sub = chord_identity_check(ab[:, 0], ab[:, 1], p, tol=1e-9)
        for rec in sub.records:
            rec["p"] = p
        subs.append(sub)
    rep = _combine("c01_chord_identity", subs, max_residual=max(s.summary["max_residual"] for s in subs))
    return _timed(rep, t0, 5.0)


def c02_oracle_equivalence(seed: int = 0) -> AuditReport:
    """Main quadrature against the adaptive oracle, rel 1e-4 with a 1e-6 floor."""
    t0 = time.perf_counter()
    rep = AuditReport("c02_oracle_equivalence", params={"bumps": [list(b) for b in BUMPS], "p": list(PS), "s": list(SS)}, tolerances={"relative": 1e-4, "absolute_floor": 1e-6})
    worst = 0.0
    for kind, k in BUMPS:
        u = make_field(kind, 1, radius=1.0, exponent=k)
        for p in PS:
            for s in SS:
                P = OperatorParams(1, s, p)
                for x in (0.3, 0.75):
                    for op, ref in ((eval_plap, oracle_plap_1d), (eval_ds, oracle_ds_1d)):
                        a = op(u, x, P).value
                        b = ref(u, x, s, p, 1e-10)
                        err = abs(a - b)
                        tol = max(1e-4 * abs(b), 1e-6)
                        worst = max(worst, err / max(abs(b), 1e-6))
                        rep.add(err <= tol, field=f"{kind}:{k}", p=p, s=s, x=x, op=op.__name__, value=a, oracle=b, error=err, tol=tol)
    rep.summary = {"worst_relative": worst}
    return _timed(rep.finalize(), t0, 120.0)


def c03_annihilation_sign(seed: int = 0) -> AuditReport:
    """Constants give exactly 0; even bumps are positive at their maximum.

    In the singular range the maximum is a critical point where the bare
    operator is undefined, so kernel smoothing is used there.
    """
    t0 = time.perf_counter()
    rep = AuditReport("c03_annihilation_sign", tolerances={"constant": 0.0, "smoothing_radius_singular": 1e-3})
    smooth = QuadratureScheme(rho_smooth=1e-3)
    for p in PS:
        for s in SS:
            P = OperatorParams(1, s, p)
            for c in (-2.5, 0.0, 1.0, 7.25):
                for x in (-1.0, 0.0, 0.4):
                    v = eval_plap(ConstantField(1, amplitude=c), x, P).value
                    rep.add(v == 0.0, check="constant", field=f"constant:{c}", p=p, s=s, x=x, value=v)
            for kind, k in BUMPS:
                u = make_field(kind, 1, radius=1.0, exponent=k)
                sch = smooth if P.singular_range else QuadratureScheme()
                v = eval_plap(u, 0.0, P, sch).value
                rep.add(v > 0.0, check="bump_max", field=f"{kind}:{k}", p=p, s=s, x=0.0, value=v)
    return _timed(rep.finalize(), t0)


def c04_envelope_lemma(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    g = Grid.uniform(-1.5, 1.5, 0.01)
    P = OperatorParams(1, 0.5, 2.0)
    subs = [envelope_audit(make_field(kind, 1, exponent=k), EPS, g, P) for kind, k in (("smooth_bump", 1.0), ("power_bump", 1.0), ("cosine_bump", 1.0))]
    subs.append(moreau_quadratic_audit(EPS, g))
    return _timed(_combine("c04_envelope_lemma", subs), t0)


def c05_q_selection(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    rep = AuditReport("c05_q_selection", tolerances={"q": 1e-12})
    for s, p, want in ((0.5, 2.0, 2.0), (0.9, 1.2, 5.9), (0.5, 4.0 / 3.0, 0.5 * (4.0 / 3.0) / (1.0 / 3.0) + 0.5), (0.5, 3.0, 2.0)):
        q = choose_q(OperatorParams(1, s, p), 0.5)
        rep.add(abs(q - want) <= 1e-12, check="choose_q", s=s, p=p, value=q, expected=want)
    u = make_field("smooth_bump", 1)
    P = OperatorParams(1, 0.9, 1.2)
    try:
        eval_plap(u, 0.0, P)
        code = "none"
    except SingularityUnresolved as e:
        code = e.code
    rep.add(code == "SINGULARITY_UNRESOLVED", check="eval_guard", s=0.9, p=1.2, code=code, expected="SINGULARITY_UNRESOLVED")
    try:
        viscosity_touch_audit(u, u, [0.0], RhsSpec(f=lambda x, t, e: 0.0), P)
        code = "none"
    except MissingCertificate as e:
        code = e.code
    rep.add(code == "MISSING_CERTIFICATE", check="touch_guard", s=0.9, p=1.2, code=code, expected="MISSING_CERTIFICATE")
    return _timed(rep.finalize(), t0)


def c06_pointwise_transfer(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    g = Grid.uniform(-1.5, 1.5, 0.05)
    subs = []
    for kind, k, p in (("smooth_bump", 1.0, 2.0), ("power_bump", 3.0, 3.0)):
        P = OperatorParams(1, 0.5, p)
        sol = ConstructedSolution.build(make_field(kind, 1, exponent=k), P, g)
        subs.append(pointwise_eps_study(sol, EPS, budget=2e-3))
    rep = _combine("c06_pointwise_transfer", subs, worst_margins=[s.summary["worst_margins"] for s in subs])
    return _timed(rep, t0, 600.0)


def c07_weak_closure(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    P = OperatorParams(1, 0.5, 2.0)
    sol = ConstructedSolution.build(make_field("smooth_bump", 1), P, Grid.uniform(-1.5, 1.5, 0.0125))
    fam = bump_family(1, 5)
    subs = [weak_supersolution_audit(sol, fam, rel_tol=5e-3), weak_supersolution_audit(sol, fam, slack=0.1)]
    return _timed(_combine("c07_weak_closure", subs, max_relative_exact=subs[0].summary["max_relative"]), t0)


def c08_caccioppoli(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    P = OperatorParams(1, 0.5, 2.0)
    sol = ConstructedSolution.build(make_field("smooth_bump", 1), P, Grid.uniform(-1.5, 1.5, 0.05))
    cut = [CutoffField(1, center=[0.0], radius=R) for R in (0.6, 0.9, 1.2)]
    a = caccioppoli_audit(sol, cut)
    b = caccioppoli_audit(sol.shifted(3.0), cut)
    shift_exact = all(x["lhs"] == y["lhs"] and x["bracket"] == y["bracket"] for x, y in zip(a.records, b.records))
    rep = _combine("c08_caccioppoli", [a], extra_ok=shift_exact, C=a.summary["C"], spread=a.summary["spread"], shift_invariant=shift_exact)
    return _timed(rep, t0)


def c09_ds_perturbation(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    P = OperatorParams(1, 0.5, 2.0)
    eta = SmoothBump(1, center=[0.3], radius=0.1)
    sub = ds_perturbation_audit(make_field("smooth_bump", 1), eta, EPS, 0.05, P)
    return _timed(_combine("c09_ds_perturbation", [sub], **sub.summary), t0)


def c10_eps_convergence(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    u = make_field("power_bump", 1, exponent=1.0)
    subs = []
    for p in PS:
        sub = eps_convergence_study(u, ([-1.0], [1.0]), EPS, OperatorParams(1, 0.5, p))
        for rec in sub.records:
            rec["p"] = p
        subs.append(sub)
    return _timed(_combine("c10_eps_convergence", subs, ratios=[s.records[-1]["integral"] / s.records[0]["integral"] for s in subs]), t0)


_DETERMINISM_SUBSET = ("c01_chord_identity", "c05_q_selection", "s_eval_constant")


def c11_roundtrip_determinism(seed: int = 0) -> AuditReport:
    """50 random configs survive text round-trips; cheap checks re-run byte-identically."""
    t0 = time.perf_counter()
    rep = AuditReport("c11_roundtrip_determinism", params={"configs": 50, "rerun": list(_DETERMINISM_SUBSET)})
    rng = np.random.default_rng(seed)
    for i in range(50):
        cfg = random_config(rng)
        text = serialize(cfg)
        back = parse(text)
        rep.add(back == cfg and serialize(back) == text, check="roundtrip", index=i, kind=cfg.kind)
    for name in _DETERMINISM_SUBSET:
        fn = CHECKS[name]
        a, b = fn(seed).to_csv(), fn(seed).to_csv()
        rep.add(a == b, check="rerun", index=name, kind="csv_bytes")
    return _timed(rep.finalize(), t0)


# smoke checks ----------------------------------------------------------------------


def s_eval_constant(seed: int = 0) -> AuditReport:
    cfg = ExperimentConfig(kind="eval-plap", u=FieldSpec("constant", (), 1.0, 3.5, 1.0), points=(-1.0, 0.0, 0.5, 2.0))
    rep = run_config(cfg)
    rep.name = "s_eval_constant"
    return rep.finalize(rep.passed and all(rec["value"] == 0.0 for rec in rep.records))


def s_lemma_chord(seed: int = 0) -> AuditReport:
    rep = run_config(ExperimentConfig(kind="lemma-chord", seed=seed))
    rep.name = "s_lemma_chord"
    return rep.finalize(rep.passed and len(rep.records) == 1000)


def s_guards(seed: int = 0) -> AuditReport:
    t0 = time.perf_counter()
    rep = AuditReport("s_guards")
    try:
        parse("[operator]\ns = 1.5\n")
        msg = ""
    except ConfigError as e:
        msg = str(e)
    rep.add("0 < s < 1" in msg and "operator.s" in msg, check="s_range", message=msg)
    for s, p, want in ((0.5, 2.0, 2.0), (0.9, 1.2, 5.9)):
        q = choose_q(OperatorParams(1, s, p))
        rep.add(abs(q - want) <= 1e-12, check="choose_q", message=repr(q))
    return _timed(rep.finalize(), t0)


def s_regularization(seed: int = 0) -> AuditReport:
    """Closed-form cases of the local infimum, the envelope and the mollifier."""
    t0 = time.perf_counter()
    rep = AuditReport("s_regularization", tolerances={"f_eps": 1e-12, "moreau": "2h^2", "mollify": 1e-13})
    rhs = RhsSpec(f=lambda x, t, e: float(abs(x[0])))
    for x, want in ((1.0, 0.7), (0.0, 0.0)):
        v = f_eps(rhs, [x], 0.0, 0.0, 0.3)
        rep.add(abs(v - want) <= 1e-12, check="f_eps", x=x, value=v, expected=want)
    sub = moreau_quadratic_audit((0.2, 0.05), Grid.uniform(-1.0, 1.0, 0.05))
    for rec in sub.records:
        rep.add(rec["ok"], check="moreau", x=rec["eps"], value=rec["max_error"], expected=0.0)
    g = Grid.uniform(-1.0, 1.0, 0.05)
    m = mollify(ConstantField(1, amplitude=2.5), 0.2, g)
    err = float(np.max(np.abs(m.values - 2.5)))
    rep.add(err <= 1e-13, check="mollify_constant", x=0.2, value=err, expected=0.0)
    return _timed(rep.finalize(), t0)


SMOKE = ("s_eval_constant", "s_guards", "s_lemma_chord", "s_regularization")
FULL = (
    "c01_chord_identity",
    "c02_oracle_equivalence",
    "c03_annihilation_sign",
    "c04_envelope_lemma",
    "c05_q_selection",
    "c06_pointwise_transfer",
    "c07_weak_closure",
    "c08_caccioppoli",
    "c09_ds_perturbation",
    "c10_eps_convergence",
    "c11_roundtrip_determinism",
)
SUITES = {"smoke": SMOKE, "full": FULL}
CHECKS = {name: globals()[name] for name in SMOKE + FULL}


def run_check(name: str, seed: int = 0) -> AuditReport:
    """Run one named check; library errors become a failed report carrying the code."""
    t0 = time.perf_counter()
    try:
        rep = CHECKS[name](seed)
    except NonlocalError as e:
        rep = AuditReport(name)
        rep.add(False, error=e.code, message=str(e))
        rep.summary = {"error": e.code}
        rep.runtime = time.perf_counter() - t0
        rep.finalize(False)
    if not rep.config_hash:
        rep.config_hash = stable_hash({"check": name, "seed": seed, "params": rep.params, "tolerances": rep.tolerances})
    return rep


def run_suite(name: str, seed: int = 0, jobs: int = 1) -> list[AuditReport]:
    """Run a suite; results are returned sorted by check name whatever the job count."""
    if name not in SUITES:
        raise ConfigError("suite", f"one of {sorted(SUITES)}", name)
    names = sorted(SUITES[name])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(run_check, names, [seed] * len(names)))
    else:
        reps = [run_check(n, seed) for n in names]
    return sorted(reps, key=lambda r: r.name)
