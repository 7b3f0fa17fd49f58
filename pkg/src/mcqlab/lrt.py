"""Likelihood-ratio tests between nested fits.

The statistic is twice the log-likelihood gain of the larger model; the
reference distribution is chi-square with the difference in parameter
counts as degrees of freedom.  Testing the random-intercept variance sits
on the boundary of the parameter space, so when the two fits differ only by
the random intercept the null distribution is the equal mixture of a point
mass at zero and chi-square(1), and the p-value halves accordingly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from scipy.stats import chi2

from .glmm import GlmmFit


@dataclass(frozen=True)
class LrtResult:
    statistic: float
    df: int
    p_value: float
    boundary: bool
    loglik_full: float
    loglik_reduced: float

    def to_dict(self) -> dict:
        return {
            "statistic": float(self.statistic),
            "df": int(self.df),
            "p_value": float(self.p_value),
            "boundary": bool(self.boundary),
            "loglik_full": float(self.loglik_full),
            "loglik_reduced": float(self.loglik_reduced),
        }


def _check_nested(full: GlmmFit, reduced: GlmmFit) -> None:
    if full.n_obs != reduced.n_obs:
        raise ValueError(
            f"fits use different data: {full.n_obs} vs {reduced.n_obs} rows"
        )
    if full.columns and reduced.columns:
        missing = set(reduced.columns) - set(full.columns)
        if missing:
            raise ValueError(
                f"models are not nested: reduced fit has columns "
                f"{sorted(missing)} absent from the full fit"
            )
    if reduced.df >= full.df:
        raise ValueError(
            f"reduced model must have fewer parameters "
            f"({reduced.df} >= {full.df})"
        )
    if reduced.method == "agh" and full.method == "logistic":
        raise ValueError("the mixed model must be the full model")


def lrt(full: GlmmFit, reduced: GlmmFit) -> LrtResult:
    """Likelihood-ratio test of ``reduced`` against ``full``.

    Both fits must come from the same data; the reduced fit's fixed-effect
    columns must be a subset of the full fit's.  A slightly negative
    statistic (the reduced model appearing to fit better, which can only be
    numerical noise for genuinely nested fits) is floored at zero with a
    warning and yields ``p = 1``.
    """
    _check_nested(full, reduced)
    stat = 2.0 * (full.loglik - reduced.loglik)
    df = full.df - reduced.df
    boundary = (
        full.method == "agh"
        and reduced.method == "logistic"
        and list(full.columns) == list(reduced.columns)
    )
    if stat < 0:
        if stat < -1e-6:
            warnings.warn(
                f"likelihood-ratio statistic is negative ({stat:.3e}); the "
                f"full fit may not have converged",
                RuntimeWarning,
                stacklevel=2,
            )
        stat = 0.0

    if boundary:
        # equal mixture of chi2(0) and chi2(1)
        p = 0.5 * float(chi2.sf(stat, 1)) if stat > 0 else 1.0
    else:
        p = float(chi2.sf(stat, df)) if stat > 0 else 1.0
    return LrtResult(
        statistic=float(stat),
        df=df,
        p_value=p,
        boundary=boundary,
        loglik_full=float(full.loglik),
        loglik_reduced=float(reduced.loglik),
    )
