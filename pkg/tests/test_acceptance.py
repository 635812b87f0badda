"""Acceptance criteria, one test and one summary line each.

The full suite runs once per session; the determinism criterion runs it a
second time through the command line and compares every CSV byte for byte.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from nonlocal_plap.acceptance import FULL, run_suite
from nonlocal_plap.cli import main
from nonlocal_plap.config import parse, random_config, serialize
from nonlocal_plap.runner import write_report


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    t0 = time.perf_counter()
    reps = run_suite("full", seed=0)
    elapsed = time.perf_counter() - t0
    out = tmp_path_factory.mktemp("full_a")
    for rep in reps:
        write_report(rep, out)
    return {r.name: r for r in reps}, out, elapsed


def record(number, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")


def check(full_run, name):
    reps = full_run[0]
    assert name in reps, f"{name} missing from the full suite"
    return reps[name]


def test_01_chord_identity(full_run):
    rep = check(full_run, "c01_chord_identity")
    ok = rep.passed and rep.summary["max_residual"] < 1e-9 and rep.runtime < 5.0 and len(rep.records) == 5000
    record(1, ok, f"max residual {rep.summary['max_residual']:.3g} < 1e-9 over 5 x 1000 samples, bound held, {rep.runtime:.2f}s < 5s")
    assert ok, rep.summary_line()


def test_02_oracle_equivalence(full_run):
    rep = check(full_run, "c02_oracle_equivalence")
    ok = rep.passed and rep.summary["worst_relative"] <= 1e-4 and rep.runtime < 120.0
    record(2, ok, f"worst relative gap {rep.summary['worst_relative']:.3g} <= 1e-4 (floor 1e-6), {rep.runtime:.1f}s < 120s")
    assert ok, rep.summary_line()


def test_03_annihilation_and_sign(full_run):
    rep = check(full_run, "c03_annihilation_sign")
    ok = rep.passed and not rep.violations
    record(3, ok, f"constants give exactly 0 and bumps are positive at their max ({len(rep.records)} evaluations)")
    assert ok, rep.summary_line()


def test_04_envelope_lemma(full_run):
    rep = check(full_run, "c04_envelope_lemma")
    ok = rep.passed
    record(4, ok, f"envelope properties on 3 fields x 4 eps and the Moreau closed form within 2h^2 ({len(rep.violations)} violations)")
    assert ok, rep.summary_line()


def test_05_q_selection(full_run):
    rep = check(full_run, "c05_q_selection")
    ok = rep.passed
    record(5, ok, "q = 2 at (0.5, 2), q = 5.9 at (0.9, 1.2), uncertified singular evaluation rejected with its error code")
    assert ok, rep.summary_line()


def test_06_pointwise_transfer(full_run):
    rep = check(full_run, "c06_pointwise_transfer")
    worst = rep.summary["worst_margins"]
    ok = rep.passed and rep.runtime < 600.0
    record(6, ok, f"worst margins {[[round(v, 4) for v in w] for w in worst]} within budget 2e-3, {rep.runtime:.1f}s < 600s")
    assert ok, rep.summary_line()


def test_07_weak_closure(full_run):
    rep = check(full_run, "c07_weak_closure")
    ok = rep.passed and rep.summary["max_relative_exact"] <= 5e-3
    record(7, ok, f"exact-solution weak margin {rep.summary['max_relative_exact']:.3g} <= 5e-3 relative; slack margins >= 0.9 slack int phi")
    assert ok, rep.summary_line()


def test_08_caccioppoli(full_run):
    rep = check(full_run, "c08_caccioppoli")
    ok = rep.passed and rep.summary["spread"] <= 10.0 and rep.summary["shift_invariant"]
    record(8, ok, f"fitted C {rep.summary['C']:.4g} covers 3 cutoffs with spread {rep.summary['spread']:.3g} <= 10; shift invariance exact")
    assert ok, rep.summary_line()


def test_09_ds_perturbation(full_run):
    rep = check(full_run, "c09_ds_perturbation")
    ok = rep.passed and rep.summary["strictly_decreasing"] and rep.summary["final_over_initial"] < 0.1
    record(9, ok, f"sup differences strictly decreasing, final/initial {rep.summary['final_over_initial']:.3g} < 0.1, under the fitted envelope")
    assert ok, rep.summary_line()


def test_10_eps_convergence(full_run):
    rep = check(full_run, "c10_eps_convergence")
    ratios = rep.summary["ratios"]
    ok = rep.passed and len(ratios) == 3 and all(r < 0.1 for r in ratios)
    record(10, ok, f"final/initial ratios {[round(r, 4) for r in ratios]} < 0.1 for p = 1.5, 2, 3 with strict decrease")
    assert ok, rep.summary_line()


def test_11_determinism_and_round_trip(full_run, tmp_path, monkeypatch, capsys):
    reps, first, _ = full_run
    monkeypatch.setenv("NONLOCAL_PLAP_OUT", str(tmp_path))
    code = main(["suite", "full", "--seed", "0"])
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("[")]
    second = tmp_path / "full"
    csvs = sorted(p.name for p in first.glob("*.csv"))
    same = [(first / n).read_bytes() == (second / n).read_bytes() for n in csvs]
    cfgs = [random_config(np.random.default_rng(1000 + i)) for i in range(50)]
    trips = sum(parse(serialize(c)) == c for c in cfgs)
    inner = reps["c11_roundtrip_determinism"].passed
    ok = code == 0 and len(lines) == len(FULL) and all(same) and len(csvs) == 2 * len(FULL) and trips == 50 and inner
    record(11, ok, f"second full run exit {code}, {sum(same)}/{len(csvs)} CSV files byte-identical, {trips}/50 config round-trips exact")
    assert ok


def test_full_suite_runtime(full_run):
    elapsed = full_run[2]
    assert elapsed < 30 * 60
    assert all(r.config_hash for r in full_run[0].values())
