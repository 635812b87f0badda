import csv
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_plap import ConfigError, QuadratureScheme
from nonlocal_plap.cli import main
from nonlocal_plap.config import EXPERIMENT_KINDS, ExperimentConfig, FieldSpec, parse, parse_rhs, random_config, serialize
from nonlocal_plap.runner import config_hash, run_config


@pytest.mark.parametrize("seed", range(20))
def test_random_config_round_trip(seed):
    cfg = random_config(np.random.default_rng(seed))
    again = parse(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)
    assert config_hash(again) == config_hash(cfg)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(EXPERIMENT_KINDS),
    s=st.floats(0.01, 0.99),
    p=st.floats(1.01, 6.0),
    eps=st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=4, unique=True),
    center=st.floats(-2, 2),
    tol=st.floats(1e-14, 1e-3),
)
def test_round_trip_property(kind, s, p, eps, center, tol):
    cfg = ExperimentConfig(
        kind=kind,
        s=s,
        p=p,
        eps=tuple(sorted(eps, reverse=True)),
        u=FieldSpec("cosine_bump", (center,), 0.7, -1.25, 1.0),
        scheme=QuadratureScheme(tol_target=tol, shells=None),
    )
    assert parse(serialize(cfg)) == cfg


def test_unknown_key_is_named():
    text = serialize(ExperimentConfig()).replace("[operator]\n", "[operator]\nsigma = 0.5\n")
    with pytest.raises(ConfigError) as ei:
        parse(text)
    assert ei.value.field == "operator.sigma"


def test_unknown_section_is_named():
    with pytest.raises(ConfigError) as ei:
        parse("[solver]\nx = 1\n")
    assert ei.value.field == "solver"


@pytest.mark.parametrize(
    "section,key,value,field",
    [
        ("operator", "s", "1.5", "operator.s"),
        ("operator", "p", "abc", "operator.p"),
        ("experiment", "kind", "bogus", "experiment.kind"),
        ("regularization", "eps", "0.1, 0.2", "regularization.eps"),
        ("field", "kind", "triangle", "field.kind"),
    ],
)
def test_invalid_values_name_the_key(section, key, value, field):
    text = f"[{section}]\n{key} = {value}\n"
    with pytest.raises(ConfigError) as ei:
        parse(text)
    assert ei.value.field == field


def test_parse_rhs():
    assert parse_rhs("constant:1.0; eta_power:0.5:0.25") == [{"kind": "constant", "coef": 1.0}, {"kind": "eta_power", "coef": 0.5, "power": 0.25}]
    with pytest.raises(ConfigError, match=r"audit.rhs\[0\]"):
        parse_rhs("cubic:1")


def test_run_config_stamps_hash():
    cfg = ExperimentConfig(kind="lemma-chord", samples=10)
    rep = run_config(cfg)
    assert rep.passed and rep.config_hash == config_hash(cfg)


def write_cfg(tmp_path, cfg, name="exp.ini"):
    path = tmp_path / name
    path.write_text(serialize(cfg), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_cli_lemma_chord(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("NONLOCAL_PLAP_OUT", raising=False)
    path = write_cfg(tmp_path, ExperimentConfig(kind="lemma-chord", label="chord"))
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    assert "[PASS]" in capsys.readouterr().out
    rows = read_csv(out / "chord.csv")
    assert len(rows) == 1 + 1000
    raw = (out / "chord.csv").read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")
    assert read_csv(out / "chord_plot.csv")[0] == ["a", "residual"]
    doc = json.loads((out / "chord.json").read_text())
    assert doc["passed"] is True


def test_cli_eval_constant_is_zero(tmp_path, monkeypatch):
    monkeypatch.delenv("NONLOCAL_PLAP_OUT", raising=False)
    cfg = ExperimentConfig(kind="eval-plap", label="const", u=FieldSpec("constant", (), 1.0, 3.0, 1.0), points=(0.0, 0.5))
    assert main(["run", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "const.csv")
    col = rows[0].index("value")
    assert [float(r[col]) for r in rows[1:]] == [0.0, 0.0]


def test_cli_rejects_s_out_of_range(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[operator]\ns = 1.5\n", encoding="utf-8")
    assert main(["run", str(path), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "operator.s" in err and "0 < s < 1" in err


def test_cli_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2


def test_cli_env_overrides_out(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv("NONLOCAL_PLAP_OUT", str(env_dir))
    path = write_cfg(tmp_path, ExperimentConfig(kind="lemma-chord", label="c", samples=5))
    assert main(["run", path, "--out", str(tmp_path / "flag")]) == 0
    assert (env_dir / "c.json").exists()
    assert not (tmp_path / "flag").exists()


def test_cli_seed_changes_samples(tmp_path, monkeypatch):
    monkeypatch.delenv("NONLOCAL_PLAP_OUT", raising=False)
    path = write_cfg(tmp_path, ExperimentConfig(kind="lemma-chord", label="c", samples=5))
    main(["run", path, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", path, "--out", str(tmp_path / "b"), "--seed", "1"])
    main(["run", path, "--out", str(tmp_path / "c"), "--seed", "2"])
    a, b, c = ((tmp_path / d / "c.csv").read_bytes() for d in "abc")
    assert a == b and a != c


def test_cli_bad_jobs_and_seed(tmp_path):
    path = write_cfg(tmp_path, ExperimentConfig(kind="lemma-chord", samples=5))
    assert main(["run", path, "--jobs", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["run", path, "--seed", str(2**64)])


def test_suite_smoke_passes(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NONLOCAL_PLAP_OUT", str(tmp_path))
    assert main(["suite", "smoke"]) == 0
    out = capsys.readouterr().out
    assert "4/4 passed" in out
    assert (tmp_path / "smoke" / "s_lemma_chord.json").exists()


def test_suite_smoke_catches_sign_flip(tmp_path, capsys, monkeypatch):
    import nonlocal_plap.scalar as scalar

    orig = scalar.L_map
    monkeypatch.setattr(scalar, "L_map", lambda g, p: -orig(g, p))
    monkeypatch.setenv("NONLOCAL_PLAP_OUT", str(tmp_path))
    assert main(["suite", "smoke"]) == 1
    assert "[FAIL] s_lemma_chord" in capsys.readouterr().out


def test_visc_touch_and_kernel_configs_run():
    rep = run_config(ExperimentConfig(kind="visc-touch", points=(0.3,)))
    assert rep.passed
    rep = run_config(replace(ExperimentConfig(kind="kernel-audit", kernel="general", lam=2.0, kernel_scale=1.5), samples=20))
    assert rep.passed
