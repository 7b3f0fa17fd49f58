"""Command-line interface tests (in-process via click's CliRunner)."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner
from helpers import TINY_EXPERIMENT

from mcqlab.cli import main
from mcqlab.pipeline import BANK_FILE, FITS_FILE, GUESS_FILE, LOG_FILE
from mcqlab.report import report_paths

ALL_FILES = (BANK_FILE, LOG_FILE, FITS_FILE, GUESS_FILE)


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(TINY_EXPERIMENT), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def replicated(tmp_path_factory, config_file):
    """One `replicate` run shared by the read-only tests."""
    out = tmp_path_factory.mktemp("replicated")
    result = CliRunner().invoke(
        main, ["replicate", "--config", str(config_file), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out, result


def _artifact_bytes(out_dir, seed=TINY_EXPERIMENT["seed"]):
    json_path, text_path = report_paths(out_dir, seed)
    names = list(ALL_FILES) + [json_path.name, text_path.name]
    return {name: (Path(out_dir) / name).read_bytes() for name in names}


def test_help_lists_subcommands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for name in ("generate", "simulate", "fit", "guessers", "report",
                 "replicate"):
        assert name in result.output


def test_version_flag(runner):
    from mcqlab import __version__

    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_replicate_writes_all_artifacts(replicated):
    out, result = replicated
    for name in ALL_FILES:
        assert (out / name).exists(), name
    json_path, text_path = report_paths(out, TINY_EXPERIMENT["seed"])
    assert json_path.exists() and text_path.exists()
    assert result.output.count("wrote ") == 2  # the two report files


def test_stage_chain_equals_replicate(replicated, config_file, tmp_path,
                                      runner):
    out, _ = replicated
    for command in ("generate", "simulate", "fit", "guessers", "report"):
        result = runner.invoke(
            main,
            [command, "--config", str(config_file), "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, (command, result.output)
        assert "wrote " in result.output
    assert _artifact_bytes(tmp_path) == _artifact_bytes(out)


def test_replicate_deterministic(replicated, config_file, tmp_path, runner):
    out, _ = replicated
    result = runner.invoke(
        main, ["replicate", "--config", str(config_file), "--out",
               str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert _artifact_bytes(tmp_path) == _artifact_bytes(out)


def test_seed_override(config_file, tmp_path, runner):
    result = runner.invoke(
        main, ["replicate", "--config", str(config_file), "--seed", "11",
               "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    json_path, _ = report_paths(tmp_path, 11)
    report = json.loads(json_path.read_text(encoding="utf-8"))
    assert report["provenance"]["seed"] == 11


def test_missing_config_file_is_usage_error(runner, tmp_path):
    result = runner.invoke(
        main, ["generate", "--config", str(tmp_path / "nope.json")]
    )
    assert result.exit_code == 2


def test_invalid_json_config(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all", encoding="utf-8")
    result = runner.invoke(main, ["generate", "--config", str(bad)])
    assert result.exit_code == 1
    assert "invalid config" in result.output


def test_unknown_config_field(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps({**TINY_EXPERIMENT, "n_studnets": 5}), encoding="utf-8"
    )
    result = runner.invoke(main, ["generate", "--config", str(bad)])
    assert result.exit_code == 1
    assert "unknown config fields" in result.output


def test_zero_students_fails_before_any_work(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps({**TINY_EXPERIMENT, "n_students": 0}), encoding="utf-8"
    )
    out = tmp_path / "out"
    result = runner.invoke(
        main, ["generate", "--config", str(bad), "--out", str(out)]
    )
    assert result.exit_code == 1
    assert "invalid config" in result.output
    assert not (out / BANK_FILE).exists()


def test_simulate_without_bank_names_the_stage(runner, config_file, tmp_path):
    result = runner.invoke(
        main, ["simulate", "--config", str(config_file), "--out",
               str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "stage 'simulate' failed" in result.output


def test_failed_stage_flags_partial_artifacts(runner, config_file, tmp_path):
    ok = runner.invoke(
        main, ["generate", "--config", str(config_file), "--out",
               str(tmp_path)]
    )
    assert ok.exit_code == 0
    result = runner.invoke(
        main, ["fit", "--config", str(config_file), "--out", str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "stage 'fit' failed" in result.output
    assert "partial artifacts" in result.output
    assert BANK_FILE in result.output


def test_report_alone_renders_placeholders(runner, config_file, tmp_path):
    result = runner.invoke(
        main, ["report", "--config", str(config_file), "--out", str(tmp_path)]
    )
    assert result.exit_code == 0
    json_path, _ = report_paths(tmp_path, TINY_EXPERIMENT["seed"])
    report = json.loads(json_path.read_text(encoding="utf-8"))
    assert report["guessing"] == "not computed"


def test_fit_flag_overrides(runner, config_file, tmp_path):
    for command in ("generate", "simulate"):
        assert runner.invoke(
            main, [command, "--config", str(config_file), "--out",
                   str(tmp_path)]
        ).exit_code == 0
    result = runner.invoke(
        main, ["fit", "--config", str(config_file), "--out", str(tmp_path),
               "--mode", "population", "--quadrature", "3",
               "--min-answers", "0"],
    )
    assert result.exit_code == 0, result.output
    fits = json.loads((tmp_path / FITS_FILE).read_text(encoding="utf-8"))
    assert fits["prediction_mode"] == "population"

    result = runner.invoke(
        main, ["fit", "--config", str(config_file), "--out", str(tmp_path),
               "--min-answers", "25"],
    )
    assert result.exit_code == 0, result.output
    fits = json.loads((tmp_path / FITS_FILE).read_text(encoding="utf-8"))
    assert fits["cohort"]["n_students_retained"] == 0
    assert "skipped" in fits["distractor_analysis"]


def test_bad_mode_flag_is_usage_error(runner, config_file, tmp_path):
    result = runner.invoke(
        main, ["fit", "--config", str(config_file), "--out", str(tmp_path),
               "--mode", "sideways"],
    )
    assert result.exit_code == 2


def test_nonconvergence_exits_with_code_two(runner, config_file, tmp_path,
                                            monkeypatch):
    for command in ("generate", "simulate"):
        assert runner.invoke(
            main, [command, "--config", str(config_file), "--out",
                   str(tmp_path)]
        ).exit_code == 0
    monkeypatch.setattr(
        "mcqlab.cli.unconverged_models", lambda fits: ["kind_analysis"]
    )
    result = runner.invoke(
        main, ["fit", "--config", str(config_file), "--out", str(tmp_path)]
    )
    assert result.exit_code == 2
    assert "did not converge" in result.stderr
    assert (tmp_path / FITS_FILE).exists()  # artifact written before the exit


def test_default_config_is_bundled(runner, tmp_path):
    # no --config: the bundled full-size config drives the stage
    result = runner.invoke(main, ["generate", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    bank = json.loads((tmp_path / BANK_FILE).read_text(encoding="utf-8"))
    assert bank["manifest"]["n_items"] == 15 * 300
