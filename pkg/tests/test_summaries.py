import pandas as pd
import pytest

from mcqlab.cohort import normalize_log
from mcqlab.summaries import (
    distractor_subset,
    naive_proportions,
    nota_aota_subset,
    summarize_counts,
)


def sample_log():
    rows = [
        # (student, item, header, k, kind, selected, correct, seq)
        (1, 10, 1, 1, "PLAIN", 0, 1, 0),
        (1, 11, 1, 3, "PLAIN", 1, 0, 1),
        (1, 12, 1, 3, "NOTA_PLUS", 3, 1, 2),
        (2, 10, 1, 1, "PLAIN", 0, 1, 0),
        (2, 13, 2, 5, "PLAIN", 2, 0, 1),
        (2, 14, 2, 3, "AOTA_MINUS", 1, 1, 2),
        (3, 11, 1, 3, "PLAIN", 0, 1, 0),
        (3, 12, 1, 3, "NOTA_PLUS", 2, 0, 1),
    ]
    return normalize_log(pd.DataFrame(
        rows,
        columns=["student_id", "item_id", "header_id", "n_distractors",
                 "kind", "selected_index", "is_correct", "sequence_no"],
    ))


class TestSubsets:
    def test_distractor_subset_is_plain_only(self):
        sub = distractor_subset(sample_log())
        assert (sub["kind"] == "PLAIN").all()
        assert len(sub) == 5
        assert sorted(sub["n_distractors"].unique()) == [1, 3, 5]

    def test_nota_aota_subset_is_four_option_rows(self):
        sub = nota_aota_subset(sample_log())
        assert (sub["n_distractors"] == 3).all()
        assert len(sub) == 5
        assert set(sub["kind"]) == {"PLAIN", "NOTA_PLUS", "AOTA_MINUS"}

    def test_subsets_overlap_on_plain_four_option_items(self):
        log = sample_log()
        both = set(distractor_subset(log)["item_id"]) & \
            set(nota_aota_subset(log)["item_id"])
        assert both == {11}

    def test_missing_columns_raise(self):
        with pytest.raises(ValueError, match="missing"):
            distractor_subset(pd.DataFrame({"x": [1]}))
        with pytest.raises(ValueError, match="missing"):
            nota_aota_subset(pd.DataFrame({"x": [1]}))


class TestNaiveProportions:
    def test_by_distractor_count(self):
        props = naive_proportions(distractor_subset(sample_log()))
        assert props[1] == 1.0
        assert props[3] == 0.5
        assert props[5] == 0.0

    def test_by_kind(self):
        props = naive_proportions(nota_aota_subset(sample_log()), by="kind")
        assert props["AOTA_MINUS"] == 1.0
        assert props["NOTA_PLUS"] == 0.5
        assert props["PLAIN"] == 0.5

    def test_empty_log(self):
        assert naive_proportions(sample_log().iloc[:0]) == {}


class TestSummarizeCounts:
    def test_per_level_tallies(self):
        counts = summarize_counts(distractor_subset(sample_log()))
        assert counts[1] == {"n_answers": 2, "n_items": 1, "n_correct": 2,
                             "prop_correct": 1.0}
        assert counts[3]["n_answers"] == 2
        assert counts[3]["n_items"] == 1
        assert counts[3]["n_correct"] == 1

    def test_total_answers_partition(self):
        log = sample_log()
        counts = summarize_counts(log, by="kind")
        assert sum(c["n_answers"] for c in counts.values()) == len(log)
