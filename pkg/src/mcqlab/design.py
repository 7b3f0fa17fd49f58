"""Design matrices for the response models.

Categorical factors are dummy-coded against a reference level, which is the
first level in ascending order (numeric or lexicographic, depending on the
column).  The design always carries an intercept; each remaining level of a
factor contributes one indicator column named ``factor[level]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ._validation import require_columns


@dataclass
class Design:
    """A fully materialized model design.

    ``groups`` holds contiguous integer codes ``0..n_groups-1`` in the order
    of ``group_ids``; ``factor_levels[f][0]`` is the reference level of
    factor ``f``.  ``factors`` retains the raw factor columns row-by-row so
    that prediction can reweight by the observed factor mix.
    """

    y: np.ndarray
    X: np.ndarray
    groups: np.ndarray
    columns: list[str]
    factor_levels: dict = field(default_factory=dict)
    group_ids: np.ndarray = None
    factors: pd.DataFrame = None
    response: str = "is_correct"
    group: str = "student_id"

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def n_groups(self) -> int:
        return len(self.group_ids)

    @property
    def n_params(self) -> int:
        return self.X.shape[1]

    def encode_rows(self, frame: pd.DataFrame) -> np.ndarray:
        """Dummy-code arbitrary factor combinations against this design's
        levels.  Raises on a level that was not present when the design was
        built."""
        n = len(frame)
        X = np.zeros((n, len(self.columns)))
        X[:, 0] = 1.0
        col_of = {name: j for j, name in enumerate(self.columns)}
        for factor, levels in self.factor_levels.items():
            known = set(levels)
            values = frame[factor].tolist()
            bad = [v for v in values if v not in known]
            if bad:
                raise ValueError(
                    f"unknown level {bad[0]!r} for factor {factor!r}"
                )
            for i, v in enumerate(values):
                if v != levels[0]:
                    X[i, col_of[f"{factor}[{v}]"]] = 1.0
        return X


def build_design(log: pd.DataFrame, fixed_factors, group: str = "student_id",
                 response: str = "is_correct") -> Design:
    """Build response vector, dummy-coded fixed-effect matrix, and group
    codes from an answer-log frame.

    Parameters
    ----------
    log : pandas.DataFrame
        Answer log (or any frame with the referenced columns).
    fixed_factors : sequence of str
        Columns treated as categorical fixed effects, in order.  The first
        one is the conventional factor of interest.
    group : str
        Column defining the random-intercept grouping.
    response : str
        Binary response column; values must be 0/1 (or bool).
    """
    fixed_factors = list(fixed_factors)
    if not fixed_factors:
        raise ValueError("fixed_factors must name at least one column")
    require_columns(log, fixed_factors + [group, response], "build_design")
    if len(log) == 0:
        raise ValueError("build_design needs a non-empty log")

    y = log[response].to_numpy()
    uniq = np.unique(y)
    if not set(np.asarray(uniq).tolist()) <= {0, 1, False, True}:
        raise ValueError(
            f"response {response!r} must be binary 0/1, found values {uniq[:5]}"
        )
    y = y.astype(float)

    columns = ["(Intercept)"]
    blocks = [np.ones((len(log), 1))]
    factor_levels = {}
    for factor in fixed_factors:
        values = log[factor].to_numpy()
        levels = np.unique(values)
        if len(levels) < 2:
            raise ValueError(
                f"factor {factor!r} has a single observed level "
                f"({levels[0]!r}); drop it from the design"
            )
        factor_levels[factor] = [lv.item() if hasattr(lv, "item") else lv
                                 for lv in levels]
        for lv in levels[1:]:
            columns.append(f"{factor}[{lv}]")
            blocks.append((values == lv).astype(float)[:, None])

    X = np.hstack(blocks)
    group_values = log[group].to_numpy()
    group_ids, codes = np.unique(group_values, return_inverse=True)

    return Design(
        y=y,
        X=X,
        groups=codes.astype(np.int64),
        columns=columns,
        factor_levels=factor_levels,
        group_ids=group_ids,
        factors=log[fixed_factors].reset_index(drop=True).copy(),
        response=response,
        group=group,
    )
