"""End-to-end experiment pipeline.

A pipeline run is a chain of file-based stages inside one output directory:

    generate  -> bank.json
    simulate  -> answers.csv
    fit       -> fits.json       (both analyses, tests, predicted probabilities)
    guessers  -> guessing.json
    report    -> report_seed<N>.json / .txt

Each stage reads its predecessor's artifact, so running the stages one at a
time (as the command-line interface does) produces exactly the same files
as :func:`run_pipeline`.  All randomness descends from ``config.seed``: the
bank and cohort seeds are derived words of its seed sequence.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bank import (
    BankSpec,
    HeaderTemplate,
    generate_bank,
    load_bank,
    load_headers,
    save_bank,
)
from .cohort import CohortSpec, apply_exclusion, simulate_cohort
from .glmm import BinomialMixedModel
from .guessing import estimate_guessing_fraction, grade_scale_diff
from .log_io import ingest_csv, write_answer_log
from .lrt import lrt
from .report import NOT_COMPUTED, canonical_json, config_hash, write_report
from .summaries import (
    distractor_subset,
    naive_proportions,
    nota_aota_subset,
    summarize_counts,
)

BANK_FILE = "bank.json"
LOG_FILE = "answers.csv"
FITS_FILE = "fits.json"
GUESS_FILE = "guessing.json"
DEFAULT_CONFIG = "paper_shape.json"
DEFAULT_HEADERS = "headers_default.json"

_CONFIG_FIELDS = None  # populated after the dataclass definition


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a replicable run depends on.

    The bundled ``paper_shape.json`` carries the full-size layout; the bare
    defaults here describe a small mixture-regime experiment that works
    without any effect tables.
    """

    seed: int = 0
    n_students: int = 271
    answers_per_student: int | dict = 60
    min_answers_exclusion: int = 40
    items_per_header: int = 40
    kind_weights: dict = field(default_factory=lambda: {"PLAIN": 1.0})
    poisson_lambda: float = 4.0
    distractor_min: int = 1
    distractor_max: int = 7
    regime: str = "mixture"
    f_guessing: float = 0.2
    sigma_u: float = 0.0
    beta0: float = 0.0
    level_effects: dict = field(default_factory=dict)
    header_effects: dict = field(default_factory=dict)
    n_quad: int = 9
    p_informed: float = 1.0
    prediction_mode: str = "typical"
    headers_path: str | None = None

    def __post_init__(self):
        if self.prediction_mode not in ("typical", "population"):
            raise ValueError(
                f"prediction_mode must be 'typical' or 'population', "
                f"got {self.prediction_mode!r}"
            )
        self.bank_spec()
        self.cohort_spec()

    def derived_seeds(self) -> tuple[int, int]:
        """(bank_seed, cohort_seed), two words drawn from the master seed."""
        state = np.random.SeedSequence(int(self.seed)).generate_state(2)
        return int(state[0]), int(state[1])

    def bank_spec(self) -> BankSpec:
        bank_seed, _ = self.derived_seeds()
        return BankSpec(
            items_per_header=self.items_per_header,
            kind_weights=self.kind_weights,
            poisson_lambda=self.poisson_lambda,
            distractor_min=self.distractor_min,
            distractor_max=self.distractor_max,
            seed=bank_seed,
        )

    def cohort_spec(self) -> CohortSpec:
        _, cohort_seed = self.derived_seeds()
        return CohortSpec(
            n_students=self.n_students,
            f_guessing=self.f_guessing,
            sigma_u=self.sigma_u,
            beta0=self.beta0,
            level_effects=self.level_effects,
            header_effects=self.header_effects,
            answers_per_student=self.answers_per_student,
            regime=self.regime,
            min_answers_exclusion=self.min_answers_exclusion,
            seed=cohort_seed,
        )

    def headers(self) -> list[HeaderTemplate]:
        if self.headers_path is not None:
            return load_headers(self.headers_path)
        with resources.as_file(
            resources.files("mcqlab").joinpath("data", DEFAULT_HEADERS)
        ) as path:
            return load_headers(path)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def load_bundled(cls) -> "ExperimentConfig":
        with resources.as_file(
            resources.files("mcqlab").joinpath("data", DEFAULT_CONFIG)
        ) as path:
            return cls.load(path)

    def save(self, path) -> None:
        Path(path).write_text(canonical_json(self.to_dict()), encoding="utf-8")


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


# ---------------------------------------------------------------------------
# stages

def stage_generate(config: ExperimentConfig, out_dir) -> Path:
    """Generate the item bank and write ``bank.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items, manifest = generate_bank(config.bank_spec(), config.headers())
    path = out / BANK_FILE
    save_bank(path, items, manifest)
    return path


def stage_simulate(config: ExperimentConfig, out_dir, bank_path=None) -> Path:
    """Simulate the cohort over the generated bank and write ``answers.csv``.

    Honors ``MCQLAB_THREADS`` for per-student parallel simulation; the
    output does not depend on the thread count.
    """
    out = Path(out_dir)
    bank, _ = load_bank(bank_path if bank_path is not None else out / BANK_FILE)
    n_threads = max(1, int(os.environ.get("MCQLAB_THREADS", "1")))
    log = simulate_cohort(config.cohort_spec(), bank, n_threads=n_threads)
    path = out / LOG_FILE
    write_answer_log(path, log)
    return path


def _fit_analysis(sub, factor: str, config: ExperimentConfig,
                  prediction_mode: str) -> dict:
    """Fit one analysis (full + reduced models, tests, predictions)."""
    block = {
        "counts": summarize_counts(sub, by=factor),
        "naive": naive_proportions(sub, by=factor),
        "model": NOT_COMPUTED,
        "model_prob": NOT_COMPUTED,
        "tests": NOT_COMPUTED,
        "grade_scale_spread": NOT_COMPUTED,
    }
    if len(sub) == 0 or sub[factor].nunique() < 2:
        block["skipped"] = f"factor {factor!r} has fewer than two levels"
        return block

    with_header = sub["header_id"].nunique() > 1
    factors = (factor, "header_id") if with_header else (factor,)

    def make(fixed, **kw):
        model = BinomialMixedModel(
            fixed_factors=fixed, n_quad=config.n_quad,
            **{"compute_se": False, **kw},
        )
        return model.fit(sub)

    full = make(factors, compute_se=True)
    plain = make(factors, random_intercept=False)
    tests = {}
    if with_header:
        minus_factor = make(("header_id",))
        tests["factor"] = lrt(full.result_, minus_factor.result_).to_dict()
        minus_header = make((factor,))
        tests["header"] = lrt(full.result_, minus_header.result_).to_dict()
    else:
        # a single header leaves no header term to test, and dropping the
        # factor would leave an intercept-only design
        tests["factor"] = NOT_COMPUTED
        tests["header"] = NOT_COMPUTED
    tests["random_intercept"] = lrt(full.result_, plain.result_).to_dict()

    probs = full.predict_prob(factor=factor, mode=prediction_mode)
    block["model"] = full.summary()
    block["model_prob"] = {k: float(v) for k, v in probs.items()}
    block["tests"] = tests
    block["grade_scale_spread"] = grade_scale_diff(
        max(probs.values()), min(probs.values())
    )
    return block


def stage_fit(config: ExperimentConfig, out_dir, log_path=None,
              prediction_mode: str | None = None) -> Path:
    """Fit both analyses on the exclusion-filtered log; write ``fits.json``."""
    out = Path(out_dir)
    log = ingest_csv(log_path if log_path is not None else out / LOG_FILE)
    kept = apply_exclusion(log, config.min_answers_exclusion)
    mode = prediction_mode if prediction_mode is not None else config.prediction_mode

    fits = {
        "cohort": {
            "n_students": int(config.n_students),
            "n_students_retained": int(kept["student_id"].nunique()),
            "n_answers": int(len(log)),
            "n_answers_retained": int(len(kept)),
            "min_answers_exclusion": int(config.min_answers_exclusion),
            "regime": config.regime,
        },
        "prediction_mode": mode,
        "distractor_analysis": _fit_analysis(
            distractor_subset(kept), "n_distractors", config, mode
        ),
        "kind_analysis": _fit_analysis(
            nota_aota_subset(kept), "kind", config, mode
        ),
    }
    path = out / FITS_FILE
    path.write_text(canonical_json(fits), encoding="utf-8")
    return path


def stage_guessers(config: ExperimentConfig, out_dir, fits_path=None) -> Path:
    """Estimate the guessing fraction from the distractor analysis; write
    ``guessing.json``.  Model-adjusted probabilities are preferred, the
    naive proportions are the fallback."""
    out = Path(out_dir)
    with open(fits_path if fits_path is not None else out / FITS_FILE,
              encoding="utf-8") as fh:
        fits = json.load(fh)
    dist = fits["distractor_analysis"]
    if isinstance(dist.get("model_prob"), dict):
        props = {int(k): float(v) for k, v in dist["model_prob"].items()}
        source = "model"
    elif dist.get("naive"):
        props = {int(k): float(v) for k, v in dist["naive"].items()}
        source = "naive"
    else:
        raise ValueError(
            "no per-level accuracy available to estimate the guessing fraction"
        )
    est = estimate_guessing_fraction(props, p_informed=config.p_informed)
    payload = est.to_dict()
    payload["source"] = source
    path = out / GUESS_FILE
    path.write_text(canonical_json(payload), encoding="utf-8")
    return path


def stage_report(config: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    """Assemble the study report from whatever artifacts exist in
    ``out_dir`` (missing pieces render as placeholders)."""
    out = Path(out_dir)

    def read_json(name):
        p = out / name
        if not p.exists():
            return NOT_COMPUTED
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)

    bank_blob = read_json(BANK_FILE)
    fits = read_json(FITS_FILE)
    guessing = read_json(GUESS_FILE)

    report = {
        "provenance": {
            "seed": int(config.seed),
            "config_hash": config_hash(config.to_dict()),
            "version": __version__,
        },
        "bank": (bank_blob.get("manifest", NOT_COMPUTED)
                 if isinstance(bank_blob, dict) else NOT_COMPUTED),
        "cohort": (fits.get("cohort", NOT_COMPUTED)
                   if isinstance(fits, dict) else NOT_COMPUTED),
        "distractor_analysis": (fits.get("distractor_analysis", NOT_COMPUTED)
                                if isinstance(fits, dict) else NOT_COMPUTED),
        "kind_analysis": (fits.get("kind_analysis", NOT_COMPUTED)
                          if isinstance(fits, dict) else NOT_COMPUTED),
        "guessing": guessing,
    }
    return write_report(out, report)


def run_pipeline(config: ExperimentConfig, out_dir,
                 prediction_mode: str | None = None) -> dict:
    """Run every stage in order; returns the decoded report."""
    stage_generate(config, out_dir)
    stage_simulate(config, out_dir)
    stage_fit(config, out_dir, prediction_mode=prediction_mode)
    stage_guessers(config, out_dir)
    json_path, _ = stage_report(config, out_dir)
    with open(json_path, encoding="utf-8") as fh:
        return json.load(fh)


def unconverged_models(fits: dict) -> list[str]:
    """Names of fitted models whose optimizer did not converge."""
    bad = []
    for section in ("distractor_analysis", "kind_analysis"):
        block = fits.get(section)
        if isinstance(block, dict) and isinstance(block.get("model"), dict):
            if not block["model"].get("converged", False):
                bad.append(section)
    return bad
