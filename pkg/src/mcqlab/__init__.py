"""mcqlab: synthetic multiple-choice study lab.

Pool-based item banks, cohort response simulation, random-intercept binomial
models fit by adaptive Gauss-Hermite quadrature, and a closed-form
guessing-fraction estimator, plus a CLI that chains them into a replicable
pipeline.
"""

__version__ = "0.1.0"

from .bank import (
    BankManifest,
    BankSpec,
    HeaderTemplate,
    Item,
    ItemKind,
    PoolExhaustedError,
    assemble_item,
    generate_bank,
    load_bank,
    load_headers,
    make_item,
    sample_distractor_count,
    sample_distractor_counts,
    save_bank,
    save_headers,
    truncated_poisson_pmf,
)
from .cohort import (
    LOG_COLUMNS,
    AnswerRecord,
    CohortSpec,
    StudentProfile,
    apply_exclusion,
    build_cohort,
    calibrate_level_offsets,
    normalize_log,
    records_to_frame,
    simulate_answer,
    simulate_cohort,
)
from .design import Design, build_design
from .glmm import (
    BinomialMixedModel,
    GlmmFit,
    fit_glmm,
    fit_logistic,
    loglik_glmm,
    loglik_gradient,
)
from .guessing import (
    GuessEstimate,
    GuessingFractionEstimator,
    estimate_guessing_fraction,
    grade_scale_diff,
    p_guessing,
)
from .log_io import ingest_csv, write_answer_log
from .lrt import LrtResult, lrt
from .pipeline import (
    ExperimentConfig,
    run_pipeline,
    stage_fit,
    stage_generate,
    stage_guessers,
    stage_report,
    stage_simulate,
    unconverged_models,
)
from .report import canonical_json, config_hash, write_report
from .summaries import (
    distractor_subset,
    naive_proportions,
    nota_aota_subset,
    summarize_counts,
)

__all__ = [
    "AnswerRecord",
    "BankManifest",
    "BankSpec",
    "BinomialMixedModel",
    "CohortSpec",
    "Design",
    "ExperimentConfig",
    "GlmmFit",
    "GuessEstimate",
    "GuessingFractionEstimator",
    "HeaderTemplate",
    "Item",
    "ItemKind",
    "LOG_COLUMNS",
    "LrtResult",
    "PoolExhaustedError",
    "StudentProfile",
    "apply_exclusion",
    "assemble_item",
    "build_cohort",
    "build_design",
    "calibrate_level_offsets",
    "canonical_json",
    "config_hash",
    "distractor_subset",
    "estimate_guessing_fraction",
    "fit_glmm",
    "fit_logistic",
    "generate_bank",
    "grade_scale_diff",
    "ingest_csv",
    "load_bank",
    "load_headers",
    "loglik_glmm",
    "loglik_gradient",
    "lrt",
    "make_item",
    "naive_proportions",
    "normalize_log",
    "nota_aota_subset",
    "p_guessing",
    "records_to_frame",
    "run_pipeline",
    "sample_distractor_count",
    "sample_distractor_counts",
    "save_bank",
    "save_headers",
    "simulate_answer",
    "simulate_cohort",
    "stage_fit",
    "stage_generate",
    "stage_guessers",
    "stage_report",
    "stage_simulate",
    "summarize_counts",
    "truncated_poisson_pmf",
    "unconverged_models",
    "write_answer_log",
    "write_report",
    "__version__",
]
