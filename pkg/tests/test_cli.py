import json
from pathlib import Path

import pytest

from skewheat.cli import main
from skewheat.config import OUTPUT_DIR_ENV, ConfigError, load_config, parse_config
from skewheat.kernel import Coefficients, kernel_dGdx, kernel_G

QUICK = Path(__file__).resolve().parent.parent / "configs" / "quick.json"


def _minimal(**over):
    cfg = {
        "schema": 1,
        "coefficients": {"a1": 1.0, "a2": 2.0, "rho1": 1.0, "rho2": 1.0},
        "grid": {"T": 1.0, "L": 8.0, "n_t": 16, "n_x": 16},
        "seeds": [0, 1],
        "suites": ["kernel-checks"],
        "ladder": [8, 16],
        "scan": {"samples": 50, "quadrature_samples": 5, "order_samples": 5},
    }
    cfg.update(over)
    return cfg


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


# -- configuration ---------------------------------------------------------------


def test_quick_config_parses():
    cfg = load_config(QUICK)
    assert cfg.seed_list() == [0, 1, 2]
    assert cfg.coefficients.build() == Coefficients(1.0, 2.0, 1.0, 1.0)
    assert cfg.bumps()[0].x0 == 0.3


def test_negative_coefficient_names_field_and_line():
    text = json.dumps(_minimal(coefficients={"a1": -1.0, "a2": 2.0, "rho1": 1.0, "rho2": 1.0}), indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = str(info.value)
    assert "coefficients.a1" in msg
    assert "line 4" in msg


def test_malformed_json_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config('{\n  "schema": 1,,\n}')


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"grid": {"T": 1.0, "L": 8.0, "n_t": 16, "n_x": 15}}, "grid.n_x"),
        ({"schema": 2}, "schema"),
        ({"ladder": [16, 24]}, "ladder"),
        ({"suites": ["everything"]}, "suites"),
        ({"surprise": True}, "surprise"),
        ({"workers": 0}, "workers"),
    ],
)
def test_invalid_fields_are_named(patch, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(json.dumps(_minimal(**patch)))


def test_bump_outside_grid_rejected():
    cfg = _minimal(test_functions=[{"s0": 0.9, "x0": 0.0, "r_s": 0.3, "r_x": 1.0}])
    with pytest.raises(ConfigError, match="test_functions"):
        parse_config(json.dumps(cfg))


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/cfg.json")


def test_output_dir_resolution(tmp_path, monkeypatch):
    cfg = parse_config(json.dumps(_minimal()))
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    assert cfg.resolve_output_dir(tmp_path) == tmp_path / "skewheat-output"
    monkeypatch.setenv(OUTPUT_DIR_ENV, "from-env")
    assert cfg.resolve_output_dir(tmp_path) == tmp_path / "from-env"
    cfg2 = parse_config(json.dumps(_minimal(output_dir="from-config")))
    assert cfg2.resolve_output_dir(tmp_path) == tmp_path / "from-config"


# -- kernel-eval -------------------------------------------------------------------


def test_kernel_eval_matches_library(capsys):
    rc = main(["kernel-eval", "--t", "0.5", "--x", "0.3", "--y", "-0.7", "--a1", "1", "--a2", "2"])
    out = capsys.readouterr().out.splitlines()
    c = Coefficients(1.0, 2.0, 1.0, 1.0)
    assert rc == 0
    assert out == [f"G = {kernel_G(0.5, 0.3, -0.7, c):.17g}", f"dGdx = {kernel_dGdx(0.5, 0.3, -0.7, c):.17g}"]


def test_kernel_eval_interface_needs_side(capsys):
    rc = main(["kernel-eval", "--t", "1", "--x", "0", "--y", "0.5", "--a2", "2"])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.out.startswith("G = ")
    assert "--side" in captured.err
    rc = main(["kernel-eval", "--t", "1", "--x", "0", "--y", "0.5", "--a2", "2", "--side", "right"])
    assert rc == 0
    assert "dGdx = " in capsys.readouterr().out


@pytest.mark.parametrize("extra", [["--a1", "-1"], ["--t", "0"], ["--side", "up"], ["--x", "-0.5", "--side", "right"]])
def test_kernel_eval_usage_errors(extra):
    base = {"--t": "1", "--x": "0.2", "--y": "0.5"}
    args = ["kernel-eval"]
    for k, v in base.items():
        if k not in extra:
            args += [k, v]
    assert main(args + extra) == 1


def test_no_command_is_usage_error():
    assert main([]) == 1


# -- run ---------------------------------------------------------------------------


def test_run_bad_config_exits_one(tmp_path, capsys):
    path = _write(tmp_path, _minimal(coefficients={"a1": -1.0, "a2": 2.0, "rho1": 1.0, "rho2": 1.0}))
    assert main(["run", str(path)]) == 1
    assert "coefficients.a1" in capsys.readouterr().err


def test_run_writes_summary(tmp_path):
    path = _write(tmp_path, _minimal(
        suites=["kernel-checks", "weak-equivalence"], grid={"T": 1.0, "L": 8.0, "n_t": 64, "n_x": 64}
    ))
    out = tmp_path / "out"
    assert main(["run", str(path), "--output-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary and all(set(s) == {"suite", "criterion", "measured", "threshold", "pass"} for s in summary)
    assert {s["suite"] for s in summary} == {"kernel-checks", "weak-equivalence"}
    assert (out / "kernel_checks.csv").exists() and (out / "weak_equivalence.csv").exists()
    assert not list(out.glob("*.tmp"))


def test_run_failing_criterion_exits_two(tmp_path):
    cfg = _minimal(suites=["weak-equivalence"], tolerances={"weak_relative": 1e-12})
    assert main(["run", str(_write(tmp_path, cfg)), "--output-dir", str(tmp_path / "o")]) == 2


def test_run_uses_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env-out"))
    assert main(["run", str(_write(tmp_path, _minimal()))]) == 0
    assert (tmp_path / "env-out" / "summary.json").exists()


def test_quick_config_passes(tmp_path):
    assert main(["run", str(QUICK), "--output-dir", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "identity_scan.csv",
        "kernel_checks.csv",
        "mc_variance.csv",
        "refinement.csv",
        "summary.json",
        "weak_equivalence.csv",
    ]
