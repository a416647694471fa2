import math

import numpy as np
import pytest

from bdrate.cli import main
from bdrate.config import ConfigError, load_config, parse_config_text, parse_eps, parse_matrix
from bdrate.harness import cross_check, net_invariants_hold, run_experiment, run_lyapunov
from bdrate.distortion import error_trend_ok, DistortionSample, rate_cap
from conftest import CONFIG_DIR

SMALL_TORUS = """
[system]
kind = torus
matrix = 2 1; 1 1
[measure]
kind = lebesgue
center = 0.3 0.3
[schedule]
theta = 0.5
scale = 1.2
[ladder]
eps = 2^-6 2^-7
[mc]
samples = 20000
[lyapunov]
n_iter = 2000
[acceptance]
tolerance = 0.5
[seeds]
master = 1
"""

SMALL_SFT = """
[system]
kind = sft
transitions = 1 1; 1 0
[measure]
kind = parry
[symbolic]
m = 10
k = 2 4
samples = 50
[acceptance]
tolerance = 0.5
"""


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_shipped_configs_validate():
    for path in sorted(CONFIG_DIR.glob("*.ini")):
        cfg = load_config(path)
        assert cfg.name == path.stem
    cat = load_config(CONFIG_DIR / "cat_map.ini")
    assert [cat.schedule.k(e) for e in cat.eps_ladder] == [4, 5, 5, 5, 6]
    assert cat.eps_ladder == [2.0**-j for j in range(6, 11)]


def test_parsers():
    assert parse_eps("2^-8", "f") == 2.0**-8
    assert parse_eps("0.25", "f") == 0.25
    assert np.array_equal(parse_matrix("2 1; 1 1", "f"), [[2, 1], [1, 1]])
    with pytest.raises(ConfigError):
        parse_matrix("2 1; 1", "f")
    with pytest.raises(ConfigError):
        parse_eps("tiny", "f")


@pytest.mark.parametrize(
    "old,new,field",
    [
        ("eps = 2^-6 2^-7", "eps =", "ladder.eps"),
        ("eps = 2^-6 2^-7", "eps = 2^-7 2^-6", "ladder.eps"),
        ("eps = 2^-6 2^-7", "eps = 0.3", "ladder.eps"),
        ("matrix = 2 1; 1 1", "matrix = 1 1; 0 1", "system.matrix"),
        ("theta = 0.5", "theta = 1.5", "schedule"),
        ("samples = 20000", "samples = 10", "mc.samples"),
        ("n_iter = 2000", "n_iter = 10", "lyapunov.n_iter"),
        ("kind = lebesgue", "kind = parry", "measure.kind"),
        ("center = 0.3 0.3", "center = 0.3", "measure.center"),
        ("kind = torus", "kind = sphere", "system.kind"),
    ],
)
def test_config_errors_name_the_field(old, new, field):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(SMALL_TORUS.replace(old, new))
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_empty_ladder_message():
    with pytest.raises(ConfigError, match="ladder.eps: the eps ladder is empty"):
        parse_config_text(SMALL_TORUS.replace("eps = 2^-6 2^-7", ""))


def test_sft_config_errors():
    with pytest.raises(ConfigError) as exc:
        parse_config_text(SMALL_SFT.replace("k = 2 4", "k = 30"))
    assert exc.value.field == "symbolic.k"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(SMALL_SFT.replace("kind = parry", "kind = bernoulli"))
    assert exc.value.field == "measure"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(SMALL_SFT.replace("kind = parry", "kind = markov"))
    assert exc.value.field == "measure.matrix"
    cfg = parse_config_text(SMALL_SFT.replace("kind = parry", "kind = markov\nmatrix = 0.6 0.4; 1 0"))
    assert cfg.measure_P.shape == (2, 2)


def test_cross_check_rejects_symbolic():
    with pytest.raises(ValueError, match="smooth systems only"):
        cross_check(parse_config_text(SMALL_SFT))


def recompute_smooth_flags(report, cfg):
    rows = report.rows
    samples = [DistortionSample(r["eps"], r["k"], r["numerator"], r["numerator_se"], r["denominator"]) for r in rows]
    target = rows[0]["target_lambda_plus"]
    beta = (3 + math.sqrt(5)) / 2
    return [
        rows[-1]["abs_error"] <= cfg.tolerance,
        error_trend_ok(samples, target),
        all(s.rate <= rate_cap(beta, s.k, 2) for s in samples),
        all(s.numerator >= s.denominator - 4 * s.numerator_se for s in samples),
    ]


def test_smooth_report_flags_are_consistent():
    cfg = parse_config_text(SMALL_TORUS)
    report = run_experiment(cfg)
    assert [r["k"] for r in report.rows] == [2, 2]
    for r in report.rows:
        assert r["rate"] == pytest.approx(math.log(r["numerator"] / r["denominator"]) / r["k"], rel=1e-15)
        assert r["abs_error"] == abs(r["rate"] - r["target_lambda_plus"])
    assert list(report.passes.values()) == recompute_smooth_flags(report, cfg)
    assert report.final_error == report.rows[-1]["abs_error"]
    assert "entropy" in report.target_label


def test_symbolic_report_flags_are_consistent():
    cfg = parse_config_text(SMALL_SFT)
    report = run_experiment(cfg)
    assert report.columns == ["m", "k", "rate", "rate_se", "entropy", "error"]
    assert list(report.passes.values()) == [report.rows[-1]["error"] <= cfg.tolerance]
    assert report.target == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-14)


def test_csv_format_and_replay(tmp_path):
    cfg = parse_config_text(SMALL_TORUS, name="tiny")
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.csv_text() == b.csv_text()
    csv_path, txt_path = a.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("# bdrate-csv v1 mode=distortion columns=eps,k,")
    assert lines[1] == ",".join(a.columns)
    assert len(lines) == 2 + len(a.rows)
    assert "overall: " in txt_path.read_text()
    assert float(lines[2].split(",")[0]) == 2.0**-6


def test_lyapunov_report():
    cfg = parse_config_text(SMALL_TORUS)
    cfg.lyap_iter = 10_000
    report = run_lyapunov(cfg)
    assert report.all_pass
    assert report.rows[0]["exponent"] == pytest.approx(math.log((3 + math.sqrt(5)) / 2), abs=1e-6)
    with pytest.raises(ValueError):
        run_lyapunov(parse_config_text(SMALL_SFT))


def test_cross_check_small():
    cfg = parse_config_text(SMALL_TORUS)
    report = cross_check(cfg)
    assert report.columns[:4] == ["eps", "k", "net_count", "covering_rate"]
    for r in report.rows:
        assert r["covering_rate"] == pytest.approx(math.log(r["net_count"]) / r["k"], rel=1e-15)
        assert r["gap"] == abs(r["covering_rate"] - r["distortion_rate"])


def test_net_invariant_checker_detects_violation():
    from bdrate.evolution import NetResult

    pts = np.array([[0.1, 0.1], [0.5, 0.5]])
    bad = NetResult(pts[:1], 0.1, np.array([0]))
    assert not net_invariants_hold(pts, bad, 0.1)
    close = NetResult(np.array([[0.1, 0.1], [0.15, 0.1]]), 0.1, np.array([0, 1]))
    assert not net_invariants_hold(pts[:1], close, 0.1)


def test_cli_exit_codes_and_output_env(tmp_path, monkeypatch, capsys):
    good = write(tmp_path, SMALL_SFT, "sym.ini")
    assert main(["validate", str(good)]) == 0
    out = tmp_path / "env_out"
    monkeypatch.setenv("BDRATE_OUTPUT_DIR", str(out))
    assert main(["run", str(good)]) == 0
    assert (out / "sym.symbolic.csv").exists() and (out / "sym.symbolic.report.txt").exists()
    explicit = tmp_path / "explicit"
    assert main(["run", str(good), "-o", str(explicit)]) == 0
    assert (explicit / "sym.symbolic.csv").read_text() == (out / "sym.symbolic.csv").read_text()

    failing = write(tmp_path, SMALL_SFT.replace("tolerance = 0.5", "tolerance = 1e-9"), "fail.ini")
    assert main(["run", str(failing)]) == 1
    empty = write(tmp_path, SMALL_TORUS.replace("eps = 2^-6 2^-7", "eps ="), "empty.ini")
    assert main(["validate", str(empty)]) == 2
    assert "ladder.eps" in capsys.readouterr().err
    assert main(["cross-check", str(good)]) == 2
    assert "smooth systems only" in capsys.readouterr().err
    budget = write(tmp_path, SMALL_TORUS.replace("samples = 20000", "samples = 20000\nbudget = 100"), "b.ini")
    assert main(["run", str(budget)]) == 3
    assert "rung 0" in capsys.readouterr().err
