"""Independent oracles and small factories shared across the test suite.

Everything here is deliberately written against numpy/scipy primitives (or
brute force) rather than the package's own routines, so that agreement is
evidence and not tautology.
"""

from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from mcqlab.bank import HeaderTemplate


def truncated_pmf_oracle(lam: float, lo: int, hi: int) -> np.ndarray:
    """Renormalized scipy Poisson pmf over lo..hi."""
    k = np.arange(lo, hi + 1)
    pmf = stats.poisson.pmf(k, lam)
    return pmf / pmf.sum()


def chisq_gof_pvalue(samples: np.ndarray, lo: int, hi: int,
                     probs: np.ndarray) -> float:
    """Chi-square goodness-of-fit p-value of integer samples against probs."""
    counts = np.bincount(np.asarray(samples) - lo, minlength=hi - lo + 1)
    expected = probs * len(samples)
    return float(stats.chisquare(counts, expected).pvalue)


# A complete experiment config small enough that the full pipeline runs in
# a couple of seconds; shared by the pipeline and CLI tests.
TINY_EXPERIMENT = {
    "seed": 7,
    "n_students": 20,
    "answers_per_student": 24,
    "min_answers_exclusion": 0,
    "items_per_header": 10,
    "kind_weights": {
        "PLAIN": 0.6,
        "NOTA_PLUS": 0.1,
        "NOTA_MINUS": 0.1,
        "AOTA_PLUS": 0.1,
        "AOTA_MINUS": 0.1,
    },
    "poisson_lambda": 3.0,
    "regime": "logistic",
    "sigma_u": 0.4,
    "beta0": 0.0,
    "level_effects": {
        "1": 1.4, "2": 1.3, "3": 1.2, "4": 1.1, "5": 1.0, "6": 0.9, "7": 0.8,
        "NOTA_PLUS": 1.1, "NOTA_MINUS": 0.9,
        "AOTA_PLUS": 0.7, "AOTA_MINUS": 1.05,
    },
    "header_effects": {str(h): 0.0 for h in range(1, 16)},
    "n_quad": 5,
}


def make_header(header_id: int, n_correct: int = 8,
                n_distractors: int = 12) -> HeaderTemplate:
    """A syntactically valid header with generously sized pools."""
    return HeaderTemplate(
        header_id=header_id,
        stem_text=f"Stem for header {header_id}",
        correct_pool=tuple(
            f"h{header_id} correct statement {i}" for i in range(n_correct)
        ),
        distractor_pool=tuple(
            f"h{header_id} wrong statement {i}" for i in range(n_distractors)
        ),
    )


def make_headers(n: int, **kwargs) -> list[HeaderTemplate]:
    return [make_header(i + 1, **kwargs) for i in range(n)]


def grid_guessing_oracle(ks, props, p_informed: float = 1.0,
                         n_grid: int = 20001) -> float:
    """Brute-force guessing fraction: minimize the mixture model's sum of
    squares over a dense grid of fractions in [0, 1]."""
    f = np.linspace(0.0, 1.0, n_grid)
    a = 1.0 / (1.0 + np.asarray(ks, dtype=float)) - p_informed
    b = np.asarray(props, dtype=float) - p_informed
    sse = ((b[None, :] - f[:, None] * a[None, :]) ** 2).sum(axis=1)
    return float(f[np.argmin(sse)])


def fit_logistic_irls(X: np.ndarray, y: np.ndarray, max_iter: int = 100,
                      tol: float = 1e-12) -> np.ndarray:
    """Plain logistic-regression MLE by Newton iteration (no random effect)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        grad = X.T @ (y - p)
        hess = X.T @ (X * w[:, None])
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


def loglik_trapezoid(beta: np.ndarray, sigma: float, X: np.ndarray,
                     y: np.ndarray, groups: np.ndarray,
                     n_points: int = 20001, span: float = 8.0) -> float:
    """Marginal log-likelihood of a random-intercept logistic model by brute
    trapezoid integration of each group's integrand over ``[-span*sigma,
    span*sigma]``.  Requires ``sigma > 0``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    groups = np.asarray(groups)
    if sigma <= 0:
        raise ValueError("trapezoid oracle needs sigma > 0")

    u = np.linspace(-span * sigma, span * sigma, n_points)
    du = u[1] - u[0]
    log_w = np.full(n_points, np.log(du))
    log_w[0] -= np.log(2.0)
    log_w[-1] -= np.log(2.0)
    log_prior = -0.5 * (u / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)

    total = 0.0
    for g in np.unique(groups):
        rows = groups == g
        base = X[rows] @ beta
        eta = base[:, None] + u[None, :]
        # log Bernoulli likelihood summed over the group's rows, per grid point
        log_lik = (y[rows, None] * eta - np.logaddexp(0.0, eta)).sum(axis=0)
        total += logsumexp(log_lik + log_prior + log_w)
    return float(total)
