"""Command-line interface.

Each subcommand runs one pipeline stage against an output directory, so the
stages can be chained by hand::

    mcqlab generate --seed 42 --out run/
    mcqlab simulate --seed 42 --out run/
    mcqlab fit      --seed 42 --out run/
    mcqlab guessers --seed 42 --out run/
    mcqlab report   --seed 42 --out run/

``mcqlab replicate`` runs the same five stages in order.  Exit status is 0
only on full success: config and stage errors exit 1, option usage errors
exit 2 (the parser's convention), and a fit that finished without
converging exits 2 after writing its artifact.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .pipeline import (
    BANK_FILE,
    FITS_FILE,
    GUESS_FILE,
    LOG_FILE,
    ExperimentConfig,
    stage_fit,
    stage_generate,
    stage_guessers,
    stage_report,
    stage_simulate,
    unconverged_models,
)


def _load_config(config_path, seed, **overrides) -> ExperimentConfig:
    """Load the config file (bundled default when omitted) and apply any
    command-line overrides.  Validation problems become usage errors."""
    try:
        if config_path is None:
            base = ExperimentConfig.load_bundled()
        else:
            base = ExperimentConfig.load(config_path)
        merged = base.to_dict()
        if seed is not None:
            merged["seed"] = int(seed)
        for name, value in overrides.items():
            if value is not None:
                merged[name] = value
        return ExperimentConfig.from_dict(merged)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"invalid config: {exc}")


def _run_stage(name, fn, config, out_dir, **kwargs):
    """Run one stage; on failure report the stage name and whatever partial
    artifacts were left behind in the output directory."""
    try:
        return fn(config, out_dir, **kwargs)
    except Exception as exc:  # surfaced to the user, not a bug trap
        leftovers = [
            f for f in (BANK_FILE, LOG_FILE, FITS_FILE, GUESS_FILE)
            if (Path(out_dir) / f).exists()
        ]
        message = f"stage {name!r} failed: {exc}"
        if leftovers:
            message += (
                f" (partial artifacts remain in {out_dir}: "
                + ", ".join(leftovers) + ")"
            )
        raise click.ClickException(message)


def _check_convergence(fits_path) -> None:
    with open(fits_path, encoding="utf-8") as fh:
        fits = json.load(fh)
    bad = unconverged_models(fits)
    if bad:
        click.echo(
            "warning: optimizer did not converge for: " + ", ".join(bad),
            err=True,
        )
        sys.exit(2)


def _common_options(fn):
    fn = click.option(
        "--out", "out_dir", type=click.Path(file_okay=False), default=".",
        show_default=True, help="Directory for stage artifacts.",
    )(fn)
    fn = click.option(
        "--seed", type=int, default=None,
        help="Override the config's master seed.",
    )(fn)
    fn = click.option(
        "--config", "config_path",
        type=click.Path(exists=True, dir_okay=False), default=None,
        help="Experiment config JSON (default: the bundled full-size config).",
    )(fn)
    return fn


def _fit_options(fn):
    fn = click.option(
        "--min-answers", "min_answers", type=click.IntRange(min=0),
        default=None, help="Override the exclusion threshold.",
    )(fn)
    fn = click.option(
        "--mode", type=click.Choice(["typical", "population"]), default=None,
        help="Override the prediction mode.",
    )(fn)
    fn = click.option(
        "--quadrature", type=click.IntRange(min=1), default=None,
        help="Override the quadrature order.",
    )(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Generate a synthetic multiple-choice item bank, simulate a student
    cohort over it, and analyze the answer log with random-intercept
    binomial regression and guessing-fraction estimation."""


@main.command()
@_common_options
def generate(config_path, seed, out_dir):
    """Generate the item bank (bank.json)."""
    config = _load_config(config_path, seed)
    path = _run_stage("generate", stage_generate, config, out_dir)
    click.echo(f"wrote {path}")


@main.command()
@_common_options
def simulate(config_path, seed, out_dir):
    """Simulate the cohort's answers over the bank (answers.csv)."""
    config = _load_config(config_path, seed)
    path = _run_stage("simulate", stage_simulate, config, out_dir)
    click.echo(f"wrote {path}")


@main.command()
@_common_options
@_fit_options
def fit(config_path, seed, out_dir, quadrature, mode, min_answers):
    """Fit the models and run the tests on the answer log (fits.json)."""
    config = _load_config(
        config_path, seed, n_quad=quadrature, prediction_mode=mode,
        min_answers_exclusion=min_answers,
    )
    path = _run_stage("fit", stage_fit, config, out_dir)
    click.echo(f"wrote {path}")
    _check_convergence(path)


@main.command()
@_common_options
def guessers(config_path, seed, out_dir):
    """Estimate the guessing fraction from the fitted models (guessing.json)."""
    config = _load_config(config_path, seed)
    path = _run_stage("guessers", stage_guessers, config, out_dir)
    click.echo(f"wrote {path}")


@main.command()
@_common_options
def report(config_path, seed, out_dir):
    """Assemble the study report from the artifacts in the output directory."""
    config = _load_config(config_path, seed)
    json_path, text_path = _run_stage("report", stage_report, config, out_dir)
    click.echo(f"wrote {json_path}")
    click.echo(f"wrote {text_path}")


@main.command()
@_common_options
@_fit_options
def replicate(config_path, seed, out_dir, quadrature, mode, min_answers):
    """Run every stage in order and write the study report."""
    config = _load_config(
        config_path, seed, n_quad=quadrature, prediction_mode=mode,
        min_answers_exclusion=min_answers,
    )
    for name, fn in (
        ("generate", stage_generate),
        ("simulate", stage_simulate),
        ("fit", stage_fit),
        ("guessers", stage_guessers),
    ):
        _run_stage(name, fn, config, out_dir)
    json_path, text_path = _run_stage("report", stage_report, config, out_dir)
    click.echo(f"wrote {json_path}")
    click.echo(f"wrote {text_path}")
    _check_convergence(Path(out_dir) / FITS_FILE)


if __name__ == "__main__":
    main()
