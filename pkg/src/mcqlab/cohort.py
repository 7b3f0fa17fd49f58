"""Simulate a student cohort answering an item bank.

Two generative regimes are supported:

* ``mixture`` -- a fraction of students guess uniformly over the options of
  every item they see; everyone else always answers correctly.  This is the
  idealization under which the guessing-fraction estimator is exact.
* ``logistic`` -- the probability of a correct answer is
  ``inverse_logit(beta0 + level_effect + header_effect + ability)`` with a
  per-student Gaussian ability; wrong answers land uniformly on the
  distractors.  This matches the random-intercept binomial model.

Per-item level effects are keyed by distractor count for plain items and by
option kind for NOTA/AOTA items.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import expit

from ._validation import as_generator
from .bank import Item, ItemKind

#: Column order of the answer-log frame and its CSV form.
LOG_COLUMNS = (
    "student_id",
    "item_id",
    "header_id",
    "n_distractors",
    "kind",
    "selected_index",
    "is_correct",
    "sequence_no",
)

REGIMES = ("mixture", "logistic")


@dataclass(frozen=True)
class StudentProfile:
    student_id: int
    ability: float
    is_guesser: bool


@dataclass(frozen=True)
class AnswerRecord:
    student_id: int
    item_id: int
    header_id: int
    n_distractors: int
    kind: ItemKind
    selected_index: int
    is_correct: bool
    sequence_no: int


def _normalize_level_key(key):
    if isinstance(key, ItemKind):
        return key
    if isinstance(key, str):
        try:
            return ItemKind(key)
        except ValueError:
            return int(key)
    return int(key)


@dataclass(frozen=True)
class CohortSpec:
    """Cohort size, generative regime, and regime parameters."""

    n_students: int = 271
    f_guessing: float = 0.0
    sigma_u: float = 0.0
    beta0: float = 0.0
    level_effects: Mapping = field(default_factory=dict)
    header_effects: Mapping[int, float] = field(default_factory=dict)
    answers_per_student: int | Mapping = 40
    regime: str = "mixture"
    min_answers_exclusion: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n_students < 1:
            raise ValueError(f"n_students must be >= 1, got {self.n_students}")
        if not 0.0 <= self.f_guessing <= 1.0:
            raise ValueError(f"f_guessing must lie in [0, 1], got {self.f_guessing}")
        if self.sigma_u < 0:
            raise ValueError(f"sigma_u must be >= 0, got {self.sigma_u}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.min_answers_exclusion < 0:
            raise ValueError("min_answers_exclusion must be >= 0")
        object.__setattr__(
            self,
            "level_effects",
            {_normalize_level_key(k): float(v) for k, v in self.level_effects.items()},
        )
        object.__setattr__(
            self,
            "header_effects",
            {int(k): float(v) for k, v in self.header_effects.items()},
        )
        self._answer_counts_spec()  # validate eagerly

    def _answer_counts_spec(self):
        aps = self.answers_per_student
        if isinstance(aps, (int, np.integer)):
            if aps < 1:
                raise ValueError("answers_per_student must be >= 1")
            return ("fixed", int(aps))
        if isinstance(aps, Mapping):
            if "low" in aps and "high" in aps:
                low, high = int(aps["low"]), int(aps["high"])
                if not 1 <= low <= high:
                    raise ValueError("answers_per_student needs 1 <= low <= high")
                return ("uniform", low, high)
            if "values" in aps:
                values = [int(v) for v in aps["values"]]
                weights = aps.get("weights")
                if min(values) < 1:
                    raise ValueError("answers_per_student values must be >= 1")
                if weights is not None and len(weights) != len(values):
                    raise ValueError("answers_per_student weights length mismatch")
                return ("choice", values, weights)
        raise ValueError(
            "answers_per_student must be an int, {'low','high'} or "
            "{'values','weights'} mapping"
        )


def _draw_answer_counts(spec: CohortSpec, rng: np.random.Generator) -> np.ndarray:
    parsed = spec._answer_counts_spec()
    n = spec.n_students
    if parsed[0] == "fixed":
        return np.full(n, parsed[1], dtype=np.int64)
    if parsed[0] == "uniform":
        return rng.integers(parsed[1], parsed[2] + 1, size=n)
    values, weights = parsed[1], parsed[2]
    p = None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        p = w / w.sum()
    return np.asarray(rng.choice(values, size=n, p=p), dtype=np.int64)


def build_cohort(spec: CohortSpec, rng=None) -> list[StudentProfile]:
    """Draw student profiles: abilities ~ Normal(0, sigma_u^2), guesser flags
    ~ Bernoulli(f_guessing).  Deterministic given ``spec.seed``."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(1)[0])
    else:
        rng = as_generator(rng)
    abilities = rng.normal(0.0, spec.sigma_u, spec.n_students)
    guessers = rng.random(spec.n_students) < spec.f_guessing
    return [
        StudentProfile(student_id=i, ability=float(abilities[i]),
                       is_guesser=bool(guessers[i]))
        for i in range(spec.n_students)
    ]


def _item_arrays(bank: Sequence[Item]):
    return {
        "item_id": np.array([it.item_id for it in bank], dtype=np.int64),
        "header_id": np.array([it.header_id for it in bank], dtype=np.int64),
        "n_distractors": np.array([it.n_distractors for it in bank], dtype=np.int64),
        "kind": np.array([it.kind.value for it in bank], dtype=object),
        "correct_index": np.array([it.correct_index for it in bank], dtype=np.int64),
        "n_options": np.array([it.n_options for it in bank], dtype=np.int64),
    }


def _logistic_item_effects(spec: CohortSpec, bank: Sequence[Item]) -> np.ndarray:
    """Per-item fixed part of the linear predictor; raises on missing keys."""
    eff = np.empty(len(bank))
    for i, it in enumerate(bank):
        key = it.kind if it.kind.is_special else it.n_distractors
        if key not in spec.level_effects:
            raise ValueError(
                f"level_effects has no entry for {key!r} (item {it.item_id})"
            )
        if it.header_id not in spec.header_effects:
            raise ValueError(
                f"header_effects has no entry for header {it.header_id} "
                f"(item {it.item_id})"
            )
        eff[i] = (
            spec.beta0
            + spec.level_effects[key]
            + spec.header_effects[it.header_id]
        )
    return eff


def simulate_answer(student: StudentProfile, item: Item, spec: CohortSpec,
                    rng=None, sequence_no: int = 0) -> AnswerRecord:
    """Simulate a single student x item response."""
    rng = as_generator(rng)
    if spec.regime == "mixture":
        if student.is_guesser:
            selected = int(rng.integers(0, item.n_options))
        else:
            selected = item.correct_index
    else:
        key = item.kind if item.kind.is_special else item.n_distractors
        if key not in spec.level_effects:
            raise ValueError(f"level_effects has no entry for {key!r}")
        if item.header_id not in spec.header_effects:
            raise ValueError(f"header_effects has no entry for header {item.header_id}")
        eta = (
            spec.beta0
            + spec.level_effects[key]
            + spec.header_effects[item.header_id]
            + student.ability
        )
        if rng.random() < expit(eta):
            selected = item.correct_index
        else:
            j = int(rng.integers(0, item.n_options - 1))
            selected = j + (j >= item.correct_index)
    return AnswerRecord(
        student_id=student.student_id,
        item_id=item.item_id,
        header_id=item.header_id,
        n_distractors=item.n_distractors,
        kind=item.kind,
        selected_index=selected,
        is_correct=selected == item.correct_index,
        sequence_no=sequence_no,
    )


def records_to_frame(records: Sequence[AnswerRecord]) -> pd.DataFrame:
    data = {
        "student_id": [r.student_id for r in records],
        "item_id": [r.item_id for r in records],
        "header_id": [r.header_id for r in records],
        "n_distractors": [r.n_distractors for r in records],
        "kind": [r.kind.value for r in records],
        "selected_index": [r.selected_index for r in records],
        "is_correct": [int(r.is_correct) for r in records],
        "sequence_no": [r.sequence_no for r in records],
    }
    df = pd.DataFrame(data, columns=list(LOG_COLUMNS))
    return normalize_log(df)


def normalize_log(log: pd.DataFrame) -> pd.DataFrame:
    """Coerce an answer-log frame to the canonical column order and dtypes."""
    df = log.loc[:, list(LOG_COLUMNS)].copy()
    for col in LOG_COLUMNS:
        if col == "kind":
            df[col] = df[col].astype(object).astype(str)
        else:
            df[col] = df[col].astype(np.int64)
    return df.reset_index(drop=True)


def simulate_cohort(spec: CohortSpec, bank: Sequence[Item],
                    profiles: Sequence[StudentProfile] | None = None,
                    n_threads: int = 1) -> pd.DataFrame:
    """Simulate the whole cohort answering the bank.

    Every student answers ``answers_per_student`` items drawn uniformly
    without replacement.  Each student's randomness comes from a seed
    derived from ``(spec.seed, student position)``, so the merged log (sorted
    by student then sequence) is independent of execution order.  Pass
    ``profiles`` to reuse an existing cohort (e.g. with a fixed guesser
    composition); otherwise ``build_cohort`` is called internally.
    """
    if not bank:
        raise ValueError("simulate_cohort needs a non-empty bank")
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(spec.n_students + 1)
    if profiles is None:
        profiles = build_cohort(spec, np.random.default_rng(children[0]))
    elif len(profiles) != spec.n_students:
        raise ValueError(
            f"profiles has {len(profiles)} entries, spec.n_students is "
            f"{spec.n_students}"
        )

    counts = _draw_answer_counts(spec, np.random.default_rng(root.spawn(1)[0]))
    if counts.max() > len(bank):
        raise ValueError(
            f"answers_per_student ({counts.max()}) exceeds bank size ({len(bank)})"
        )

    arrays = _item_arrays(bank)
    item_eff = _logistic_item_effects(spec, bank) if spec.regime == "logistic" else None

    def one_student(pos: int):
        student = profiles[pos]
        rng = np.random.default_rng(children[pos + 1])
        m = int(counts[pos])
        idx = rng.choice(len(bank), size=m, replace=False)
        n_opts = arrays["n_options"][idx]
        correct_idx = arrays["correct_index"][idx]
        if spec.regime == "mixture":
            if student.is_guesser:
                selected = rng.integers(0, n_opts)
            else:
                selected = correct_idx.copy()
        else:
            p = expit(item_eff[idx] + student.ability)
            hit = rng.random(m) < p
            j = rng.integers(0, n_opts - 1)
            wrong = j + (j >= correct_idx)
            selected = np.where(hit, correct_idx, wrong)
        return pos, idx, selected

    results = [None] * len(profiles)
    if n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for pos, idx, selected in pool.map(one_student, range(len(profiles))):
                results[pos] = (idx, selected)
    else:
        for pos in range(len(profiles)):
            _, idx, selected = one_student(pos)
            results[pos] = (idx, selected)

    frames = []
    for pos, (idx, selected) in enumerate(results):
        student = profiles[pos]
        frames.append(
            pd.DataFrame(
                {
                    "student_id": np.full(len(idx), student.student_id, dtype=np.int64),
                    "item_id": arrays["item_id"][idx],
                    "header_id": arrays["header_id"][idx],
                    "n_distractors": arrays["n_distractors"][idx],
                    "kind": arrays["kind"][idx],
                    "selected_index": np.asarray(selected, dtype=np.int64),
                    "is_correct": (
                        np.asarray(selected) == arrays["correct_index"][idx]
                    ).astype(np.int64),
                    "sequence_no": np.arange(len(idx), dtype=np.int64),
                }
            )
        )
    log = pd.concat(frames, ignore_index=True)
    log = log.sort_values(["student_id", "sequence_no"], kind="stable")
    return normalize_log(log)


def apply_exclusion(log: pd.DataFrame, min_answers: int) -> pd.DataFrame:
    """Drop all records of students with fewer than ``min_answers`` records."""
    if min_answers <= 0 or log.empty:
        return log.reset_index(drop=True).copy()
    counts = log["student_id"].value_counts()
    keep = log["student_id"].map(counts) >= min_answers
    return log.loc[keep].reset_index(drop=True).copy()


def calibrate_level_offsets(targets: Mapping, header_effects: Mapping[int, float],
                            weights: Mapping[int, float] | None = None,
                            beta0: float = 0.0) -> dict:
    """Solve for level offsets so the header-frequency-weighted average of
    ``inverse_logit(beta0 + offset + header_effect)`` hits each target.

    ``weights`` defaults to uniform over the given headers.  Targets must be
    strictly inside (0, 1).
    """
    effects = np.array([float(v) for v in header_effects.values()])
    if weights is None:
        w = np.full(len(effects), 1.0 / len(effects))
    else:
        w = np.array([float(weights[h]) for h in header_effects])
        w = w / w.sum()

    out = {}
    for key, target in targets.items():
        t = float(target)
        if not 0.0 < t < 1.0:
            raise ValueError(f"target for {key!r} must be in (0, 1), got {t}")

        def gap(x):
            return float(w @ expit(beta0 + x + effects)) - t

        out[_normalize_level_key(key)] = float(brentq(gap, -30.0, 30.0, xtol=1e-12))
    return out
