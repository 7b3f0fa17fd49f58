"""Descriptive summaries of answer logs.

Two standard analysis subsets mirror the two model layouts: plain items
grouped by distractor count, and the four-option subset (three distractors)
grouped by option kind, where NOTA/AOTA items sit next to plain four-option
items.
"""

from __future__ import annotations

import pandas as pd

from ._validation import require_columns
from .bank import ItemKind


def distractor_subset(log: pd.DataFrame) -> pd.DataFrame:
    """Plain items only; the frame for the distractor-count analysis."""
    require_columns(log, ["kind"], "distractor_subset")
    return log.loc[log["kind"] == ItemKind.PLAIN.value].reset_index(drop=True)


def nota_aota_subset(log: pd.DataFrame) -> pd.DataFrame:
    """All four-option items (three distractors), plain ones included; the
    frame for the option-kind analysis."""
    require_columns(log, ["n_distractors"], "nota_aota_subset")
    return log.loc[log["n_distractors"] == 3].reset_index(drop=True)


def naive_proportions(log: pd.DataFrame, by: str = "n_distractors") -> dict:
    """Raw per-level proportion of correct answers, ignoring who answered."""
    require_columns(log, [by, "is_correct"], "naive_proportions")
    if len(log) == 0:
        return {}
    means = log.groupby(by, sort=True)["is_correct"].mean()
    return {k: float(v) for k, v in means.items()}


def summarize_counts(log: pd.DataFrame, by: str = "n_distractors") -> dict:
    """Per-level tallies: answers, distinct items, correct answers, and the
    naive proportion correct."""
    require_columns(log, [by, "is_correct", "item_id"], "summarize_counts")
    out = {}
    for level, chunk in log.groupby(by, sort=True):
        out[level] = {
            "n_answers": int(len(chunk)),
            "n_items": int(chunk["item_id"].nunique()),
            "n_correct": int(chunk["is_correct"].sum()),
            "prop_correct": float(chunk["is_correct"].mean()),
        }
    return out
