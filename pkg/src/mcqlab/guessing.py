"""Guessing-fraction estimation from per-level accuracy.

Under a mixture in which a fraction ``f`` of students guess uniformly over
an item's options and the rest answer correctly with probability
``p_informed``, the expected accuracy on items with ``k`` distractors is

    p_k = f / (1 + k) + (1 - f) * p_informed.

Shifting by ``p_informed`` turns this into a one-parameter regression
through the origin, so ``f`` has the closed least-squares form implemented
here; the estimate is clamped to ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import require_probability


def p_guessing(n_distractors):
    """Chance accuracy on an item with ``n_distractors`` distractors, i.e.
    one over the option count."""
    k = np.asarray(n_distractors)
    if np.any(k < 1):
        raise ValueError("n_distractors must be >= 1")
    result = 1.0 / (1.0 + k)
    return float(result) if np.isscalar(n_distractors) else result


@dataclass(frozen=True)
class GuessEstimate:
    """Fitted guessing fraction with its regression diagnostics.

    ``fraction`` is clamped to [0, 1]; ``fraction_unclamped`` keeps the raw
    least-squares value.  ``residuals`` and ``mse`` are evaluated at the
    clamped fraction, level by level.
    """

    fraction: float
    fraction_unclamped: float
    p_informed: float
    levels: tuple
    proportions: tuple
    residuals: tuple
    mse: float

    def expected_proportion(self, n_distractors):
        """Mixture-model accuracy at the fitted fraction."""
        return (self.fraction * p_guessing(n_distractors)
                + (1.0 - self.fraction) * self.p_informed)

    def to_dict(self) -> dict:
        return {
            "fraction": float(self.fraction),
            "fraction_unclamped": float(self.fraction_unclamped),
            "p_informed": float(self.p_informed),
            "levels": [int(k) for k in self.levels],
            "proportions": [float(p) for p in self.proportions],
            "residuals": [float(r) for r in self.residuals],
            "mse": float(self.mse),
        }


def _coerce_proportions(proportions) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(proportions, Mapping) or hasattr(proportions, "items"):
        pairs = sorted((int(k), float(v)) for k, v in proportions.items())
    else:
        pairs = sorted((int(k), float(v)) for k, v in proportions)
    if not pairs:
        raise ValueError("proportions is empty")
    ks = np.array([k for k, _ in pairs])
    ps = np.array([p for _, p in pairs])
    if np.any(ks < 1):
        raise ValueError("distractor counts must be >= 1")
    if len(set(ks.tolist())) != len(ks):
        raise ValueError("duplicate distractor counts")
    if np.any((ps < 0) | (ps > 1)):
        raise ValueError("proportions must lie in [0, 1]")
    return ks, ps


def estimate_guessing_fraction(proportions, p_informed: float = 1.0) -> GuessEstimate:
    """Closed-form least-squares guessing fraction.

    Parameters
    ----------
    proportions : mapping or iterable of pairs
        Per-level accuracy, ``{n_distractors: proportion_correct}``.
    p_informed : float
        Accuracy of a non-guessing student, in ``(0, 1]``.
    """
    require_probability(p_informed, "p_informed")
    if p_informed == 0.0:
        raise ValueError("p_informed must be positive")
    ks, ps = _coerce_proportions(proportions)

    a = p_guessing(ks) - p_informed
    b = ps - p_informed
    denom = float(a @ a)
    if denom == 0.0:
        raise ValueError(
            "guessing and informed accuracy coincide at every level; the "
            "fraction is not identifiable"
        )
    raw = float(a @ b) / denom
    fraction = min(1.0, max(0.0, raw))
    residuals = b - fraction * a
    return GuessEstimate(
        fraction=fraction,
        fraction_unclamped=raw,
        p_informed=float(p_informed),
        levels=tuple(int(k) for k in ks),
        proportions=tuple(float(p) for p in ps),
        residuals=tuple(float(r) for r in residuals),
        mse=float(residuals @ residuals / len(residuals)),
    )


class GuessingFractionEstimator(BaseEstimator):
    """Estimator wrapper around :func:`estimate_guessing_fraction`.

    ``fit`` takes the per-level accuracy mapping (model-adjusted or naive);
    ``predict`` returns the mixture's expected accuracy at new distractor
    counts.
    """

    def __init__(self, p_informed: float = 1.0):
        self.p_informed = p_informed

    def fit(self, X, y=None):
        self.estimate_ = estimate_guessing_fraction(X, p_informed=self.p_informed)
        self.fraction_ = self.estimate_.fraction
        return self

    def predict(self, X):
        if not hasattr(self, "estimate_"):
            raise RuntimeError("estimator is not fitted; call fit() first")
        ks = np.asarray(X)
        return self.estimate_.expected_proportion(ks)


def grade_scale_diff(p_a: float, p_b: float) -> float:
    """Difference between two proportions expressed in grade points on a
    ten-point scale.

    The product is rounded to 12 decimals so that differences of clean
    decimal proportions compare exactly (0.91 vs 0.83 gives 0.8, not
    0.7999...96).
    """
    require_probability(p_a, "p_a")
    require_probability(p_b, "p_b")
    return round(10.0 * abs(p_a - p_b), 12)
