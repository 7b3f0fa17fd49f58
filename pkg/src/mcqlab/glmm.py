"""Random-intercept binomial (logistic) regression.

The marginal likelihood integrates the per-group random intercept out of a
Bernoulli-logit model.  Each group's integral is approximated by adaptive
Gauss-Hermite quadrature: the quadrature rule is recentered at the group's
conditional mode and rescaled by the curvature there, so even a single node
(the Laplace approximation) is accurate, and accuracy improves rapidly with
the node count.

``loglik_glmm`` / ``loglik_gradient`` expose the objective and its exact
gradient in ``(beta, log sigma)``; the gradient differentiates through the
conditional modes (implicit function theorem) rather than holding the nodes
fixed, which is what makes finite-difference checks agree tightly.

``fit_glmm`` maximizes the likelihood with a BFGS iteration written here,
because the line search must tolerate floating-point noise near the optimum
on large data sets; ``fit_logistic`` is the no-random-intercept reduction.
``BinomialMixedModel`` wraps both behind an estimator interface that
consumes answer-log frames directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy.special import expit
from sklearn.base import BaseEstimator

from .design import Design, build_design

_LOG_2PI = np.log(2.0 * np.pi)
_SQRT2 = np.sqrt(2.0)
#: Floor for log(sigma_u) during optimization; below this the model is
#: statistically indistinguishable from one with no random intercept.
_LOG_SIGMA_FLOOR = -20.0


@lru_cache(maxsize=32)
def _hermgauss(n: int):
    z, w = np.polynomial.hermite.hermgauss(n)
    return z, np.log(w)


class _Core:
    """Group-sorted data plus the quadrature machinery.

    Rows are sorted by group code once so per-group sums reduce to
    ``np.add.reduceat`` over contiguous slices.
    """

    def __init__(self, X, y, groups, n_quad=9, inner_tol=1e-10):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        groups = np.asarray(groups)
        if X.ndim != 2 or len(X) != len(y) or len(y) != len(groups):
            raise ValueError("X, y and groups must have matching first dimensions")
        if n_quad < 1:
            raise ValueError("n_quad must be >= 1")
        _, codes = np.unique(groups, return_inverse=True)
        order = np.argsort(codes, kind="stable")
        self.X = X[order]
        self.y = y[order]
        codes = codes[order]
        self.starts = np.flatnonzero(np.r_[True, np.diff(codes) > 0])
        self.counts = np.diff(np.r_[self.starts, len(codes)])
        self.G = len(self.starts)
        self.n, self.p = X.shape
        self.z, self.logw = _hermgauss(n_quad)
        self.Q = n_quad
        self.inner_tol = inner_tol

    def _gsum(self, v):
        return np.add.reduceat(v, self.starts)

    def _gsum_x(self, M):
        return np.add.reduceat(M, self.starts, axis=0)

    def _expand(self, u):
        return np.repeat(u, self.counts)

    # -- conditional modes ---------------------------------------------------

    def modes(self, beta, sigma, u0=None, max_iter=100):
        """Per-group maximizers of the joint log density in u.

        Safeguarded Newton; the objective is strictly concave in u, so a
        halved Newton step always recovers ascent.  After the step norm
        drops below ``inner_tol`` one extra full Newton step is taken to
        polish the modes to machine precision (the outer gradient relies on
        the stationarity of the modes).
        """
        base = self.X @ beta
        inv_s2 = 1.0 / (sigma * sigma)
        u = np.zeros(self.G) if u0 is None else np.array(u0, dtype=float)

        def group_logpost(u_vec):
            eta = base + self._expand(u_vec)
            fit = self._gsum(self.y * eta - np.logaddexp(0.0, eta))
            return fit - 0.5 * u_vec * u_vec * inv_s2

        current = group_logpost(u)
        for _ in range(max_iter):
            eta = base + self._expand(u)
            prob = expit(eta)
            score = self._gsum(self.y - prob) - u * inv_s2
            hess = self._gsum(prob * (1.0 - prob)) + inv_s2
            step = score / hess
            if np.max(np.abs(step)) < self.inner_tol:
                u = u + step
                eta = base + self._expand(u)
                prob = expit(eta)
                score = self._gsum(self.y - prob) - u * inv_s2
                hess = self._gsum(prob * (1.0 - prob)) + inv_s2
                return u + score / hess
            scale = np.ones(self.G)
            for _ in range(30):
                candidate = u + scale * step
                value = group_logpost(candidate)
                worse = value < current - 1e-12
                if not worse.any():
                    break
                scale[worse] *= 0.5
            u, current = candidate, value
        bad = np.flatnonzero(np.abs(step) >= self.inner_tol)
        raise RuntimeError(
            f"conditional modes failed to converge for groups {bad[:10].tolist()}"
        )

    # -- marginal log-likelihood and gradient --------------------------------

    def objective(self, theta, u0=None, want_grad=True):
        """Negative marginal log-likelihood (and gradient) at
        ``theta = (beta, log sigma)``.  Returns ``(nll, grad, u_hat)``."""
        beta = theta[: self.p]
        t = theta[self.p]
        sigma = np.exp(t)
        inv_s2 = 1.0 / (sigma * sigma)

        u_hat = self.modes(beta, sigma, u0)
        base = self.X @ beta
        eta0 = base + self._expand(u_hat)
        p0 = expit(eta0)
        w0 = p0 * (1.0 - p0)
        W = self._gsum(w0)
        H = W + inv_s2
        tau = 1.0 / np.sqrt(H)

        U = u_hat[:, None] + _SQRT2 * tau[:, None] * self.z[None, :]
        A = np.empty((self.G, self.Q))
        R = np.empty((self.G, self.Q)) if want_grad else None
        GB = np.empty((self.Q, self.G, self.p)) if want_grad else None
        for q in range(self.Q):
            eta = base + self._expand(U[:, q])
            pq = expit(eta)
            A[:, q] = self._gsum(self.y * eta - np.logaddexp(0.0, eta))
            if want_grad:
                resid = self.y - pq
                R[:, q] = self._gsum(resid)
                GB[q] = self._gsum_x(self.X * resid[:, None])

        g_nodes = A - 0.5 * U * U * inv_s2 - t - 0.5 * _LOG_2PI
        a = self.logw[None, :] + self.z[None, :] ** 2 + g_nodes
        a_max = a.max(axis=1)
        shifted = np.exp(a - a_max[:, None])
        denom = shifted.sum(axis=1)
        log_int = 0.5 * np.log(2.0) + np.log(tau) + a_max + np.log(denom)
        nll = -float(log_int.sum())
        if not want_grad:
            return nll, None, u_hat

        soft = shifted / denom[:, None]

        # derivatives of the mode and the curvature (implicit function theorem)
        Wx = self._gsum_x(self.X * w0[:, None])
        Wp = self._gsum(w0 * (1.0 - 2.0 * p0))
        Wpx = self._gsum_x(self.X * (w0 * (1.0 - 2.0 * p0))[:, None])
        du_db = -Wx / H[:, None]
        du_dt = 2.0 * u_hat * inv_s2 / H
        dH_db = Wpx + Wp[:, None] * du_db
        dH_dt = Wp * du_dt - 2.0 * inv_s2
        dlogtau_db = -dH_db / (2.0 * H[:, None])
        dlogtau_dt = -dH_dt / (2.0 * H)
        dtau_db = tau[:, None] * dlogtau_db
        dtau_dt = tau * dlogtau_dt

        g_prime = R - U * inv_s2
        dg_dt = U * U * inv_s2 - 1.0

        grad_b = dlogtau_db.copy()
        for q in range(self.Q):
            s_q = soft[:, q]
            node_sens = du_db + _SQRT2 * self.z[q] * dtau_db
            grad_b += s_q[:, None] * GB[q]
            grad_b += (s_q * g_prime[:, q])[:, None] * node_sens
        node_sens_t = du_dt[:, None] + _SQRT2 * self.z[None, :] * dtau_dt[:, None]
        grad_t = dlogtau_dt + (soft * (dg_dt + g_prime * node_sens_t)).sum(axis=1)

        grad = np.concatenate([grad_b.sum(axis=0), [grad_t.sum()]])
        return nll, -grad, u_hat


def _plain_loglik(beta, X, y):
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def loglik_glmm(beta, sigma, X, y, groups, n_quad: int = 9) -> float:
    """Marginal log-likelihood of the random-intercept logistic model.

    ``sigma = 0`` degenerates exactly to the plain logistic log-likelihood.
    """
    beta = np.asarray(beta, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return _plain_loglik(beta, np.asarray(X, dtype=float),
                             np.asarray(y, dtype=float))
    core = _Core(X, y, groups, n_quad=n_quad)
    theta = np.concatenate([beta, [np.log(sigma)]])
    nll, _, _ = core.objective(theta, want_grad=False)
    return -nll


def loglik_gradient(beta, sigma, X, y, groups, n_quad: int = 9) -> np.ndarray:
    """Exact gradient of :func:`loglik_glmm` in ``(beta, log sigma)``."""
    beta = np.asarray(beta, dtype=float)
    if not sigma > 0:
        raise ValueError("the gradient is parameterized in log sigma; sigma must be > 0")
    core = _Core(X, y, groups, n_quad=n_quad)
    theta = np.concatenate([beta, [np.log(sigma)]])
    _, grad_nll, _ = core.objective(theta)
    return -grad_nll


@dataclass
class GlmmFit:
    """Fitted model container.

    ``std_errors`` has one entry per fixed coefficient plus, for the mixed
    model, a final entry for ``sigma_u`` on its natural scale (delta
    method).  ``deviance_trace`` records -2 log L after every accepted
    optimizer step.
    """

    beta: np.ndarray
    sigma_u: float
    loglik: float
    converged: bool
    n_iter: int
    deviance_trace: list = field(default_factory=list)
    std_errors: np.ndarray | None = None
    columns: list = field(default_factory=list)
    n_obs: int = 0
    n_groups: int = 0
    method: str = "agh"
    message: str = ""
    warnings: list = field(default_factory=list)
    u_hat: np.ndarray | None = None

    @property
    def deviance(self) -> float:
        return -2.0 * self.loglik

    @property
    def df(self) -> int:
        return len(self.beta) + (1 if self.method == "agh" else 0)

    def summary(self) -> dict:
        out = {
            "method": self.method,
            "columns": list(self.columns),
            "beta": [float(b) for b in self.beta],
            "std_errors": (
                None if self.std_errors is None
                else [float(s) for s in self.std_errors]
            ),
            "sigma_u": float(self.sigma_u),
            "loglik": float(self.loglik),
            "deviance": float(self.deviance),
            "df": self.df,
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "n_obs": int(self.n_obs),
            "n_groups": int(self.n_groups),
            "message": self.message,
            "warnings": list(self.warnings),
        }
        return out


def _irls_warm_start(X, y, n_steps=6):
    beta = np.zeros(X.shape[1])
    for _ in range(n_steps):
        eta = X @ beta
        p = expit(eta)
        w = np.clip(p * (1.0 - p), 1e-10, None)
        grad = X.T @ (y - p)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        limit = np.max(np.abs(step))
        if limit > 5.0:
            step = step * (5.0 / limit)
        beta = beta + step
    return beta


def _numeric_hessian(grad_fn, theta, rel_step=1e-5):
    k = len(theta)
    H = np.empty((k, k))
    for j in range(k):
        h = rel_step * max(1.0, abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        H[:, j] = (grad_fn(tp) - grad_fn(tm)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _mixed_std_errors(core, theta, warnings_out):
    def grad_nll(th):
        _, g, _ = core.objective(th)
        return g

    H = _numeric_hessian(grad_nll, theta)
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        warnings_out.append("information matrix is singular; no standard errors")
        return None
    diag = np.diag(cov).copy()
    if np.any(diag <= 0):
        warnings_out.append(
            "information matrix is not positive definite; no standard errors"
        )
        return None
    se = np.sqrt(diag)
    sigma = np.exp(theta[-1])
    se[-1] = sigma * se[-1]  # delta method: Var(sigma) ~ sigma^2 Var(log sigma)
    return se


def fit_glmm(X, y, groups, n_quad: int = 9, max_iter: int = 200,
             grad_tol: float = 1e-6, dev_tol: float = 1e-9,
             inner_tol: float = 1e-10, sigma_init: float = 0.5,
             beta_init=None, compute_se: bool = True, columns=None) -> GlmmFit:
    """Maximize the marginal likelihood over ``(beta, log sigma_u)`` by BFGS.

    Convergence requires both a small gradient (max-norm below
    ``grad_tol``) and a small deviance change (below ``dev_tol``).  Near the
    optimum on large data sets the predicted line-search decrease can fall
    under floating-point resolution; such steps are accepted when the new
    value is not meaningfully worse, and a fully stalled search with a small
    gradient is reported as converged.
    """
    core = _Core(X, y, groups, n_quad=n_quad, inner_tol=inner_tol)
    warnings_out: list[str] = []

    if beta_init is None:
        beta0 = _irls_warm_start(core.X, core.y)
    else:
        beta0 = np.asarray(beta_init, dtype=float)
    theta = np.concatenate([beta0, [np.log(sigma_init)]])

    f, g, u_hat = core.objective(theta)
    k = len(theta)
    Hinv = np.eye(k)
    trace = [2.0 * f]
    converged = False
    message = "maximum iterations reached"
    noise = lambda val: 1e-11 * (abs(val) + 1.0)

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        direction = -Hinv @ g
        if direction @ g >= 0:  # not a descent direction; reset
            Hinv = np.eye(k)
            direction = -g
        limit = np.max(np.abs(direction))
        if limit > 5.0:
            direction = direction * (5.0 / limit)

        fd = float(g @ direction)
        step = 1.0
        accepted = False
        for _ in range(40):
            theta_new = theta + step * direction
            theta_new[-1] = max(theta_new[-1], _LOG_SIGMA_FLOOR)
            f_new, g_new, u_new = core.objective(theta_new, u0=u_hat)
            if f_new <= f + 1e-4 * step * fd + noise(f):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if np.max(np.abs(g)) < grad_tol:
                converged = True
                message = "line search stalled at floating-point noise"
            else:
                message = "line search failed"
            break

        s_vec = theta_new - theta
        y_vec = g_new - g
        dev_change = abs(2.0 * f_new - trace[-1])
        theta, f, g, u_hat = theta_new, f_new, g_new, u_new
        trace.append(2.0 * f)

        sy = float(s_vec @ y_vec)
        if sy > 1e-10 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            rho = 1.0 / sy
            V = np.eye(k) - rho * np.outer(s_vec, y_vec)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s_vec, s_vec)

        if np.max(np.abs(g)) < grad_tol and dev_change < dev_tol:
            converged = True
            message = "gradient and deviance criteria met"
            break

    beta = theta[: core.p]
    sigma = float(np.exp(theta[core.p]))
    if np.max(np.abs(beta)) > 12.0:
        warnings_out.append(
            "possible separation: a coefficient exceeds 12 on the logit scale"
        )

    se = None
    if compute_se and converged:
        se = _mixed_std_errors(core, theta, warnings_out)

    return GlmmFit(
        beta=beta,
        sigma_u=sigma,
        loglik=-f,
        converged=converged,
        n_iter=n_iter,
        deviance_trace=trace,
        std_errors=se,
        columns=list(columns) if columns is not None else [],
        n_obs=core.n,
        n_groups=core.G,
        method="agh",
        message=message,
        warnings=warnings_out,
        u_hat=u_hat,
    )


def fit_logistic(X, y, max_iter: int = 100, grad_tol: float = 1e-6,
                 compute_se: bool = True, columns=None,
                 groups=None) -> GlmmFit:
    """Plain logistic regression by Newton iteration with step halving.

    The reduced model for likelihood-ratio tests against the mixed fit;
    ``groups`` is only used to report ``n_groups``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.zeros(X.shape[1])
    f = -_plain_loglik(beta, X, y)
    trace = [2.0 * f]
    converged = False
    message = "maximum iterations reached"
    warnings_out: list[str] = []

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        eta = X @ beta
        p = expit(eta)
        grad = X.T @ (y - p)
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            message = "gradient criterion met"
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hess = X.T @ (X * w[:, None])
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = np.linalg.lstsq(hess, grad, rcond=None)[0]
        step = 1.0
        for _ in range(40):
            beta_new = beta + step * direction
            f_new = -_plain_loglik(beta_new, X, y)
            if f_new <= f + 1e-11 * (abs(f) + 1.0):
                break
            step *= 0.5
        beta, f = beta_new, f_new
        trace.append(2.0 * f)

    if np.max(np.abs(beta)) > 12.0:
        warnings_out.append(
            "possible separation: a coefficient exceeds 12 on the logit scale"
        )

    se = None
    if compute_se and converged:
        eta = X @ beta
        p = expit(eta)
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hess = X.T @ (X * w[:, None])
        try:
            cov = np.linalg.inv(hess)
            se = np.sqrt(np.diag(cov))
        except np.linalg.LinAlgError:
            warnings_out.append("information matrix is singular; no standard errors")

    n_groups = len(np.unique(groups)) if groups is not None else 0
    return GlmmFit(
        beta=beta,
        sigma_u=0.0,
        loglik=-f,
        converged=converged,
        n_iter=n_iter,
        deviance_trace=trace,
        std_errors=se,
        columns=list(columns) if columns is not None else [],
        n_obs=len(y),
        n_groups=n_groups,
        method="logistic",
        message=message,
        warnings=warnings_out,
    )


class BinomialMixedModel(BaseEstimator):
    """Random-intercept binomial model over an answer-log frame.

    Parameters
    ----------
    fixed_factors : tuple of str
        Categorical fixed effects; the first is the factor of interest for
        ``predict_prob``.
    response, group : str
        Binary response column and random-intercept grouping column.
    n_quad : int
        Gauss-Hermite node count (1 gives the Laplace approximation).
    random_intercept : bool
        When False, fit a plain logistic model instead (no variance
        component).
    compute_se : bool
        Skip the information-matrix pass when False (faster, no standard
        errors).
    """

    def __init__(self, fixed_factors=("n_distractors", "header_id"),
                 response="is_correct", group="student_id", n_quad=9,
                 random_intercept=True, max_iter=200, grad_tol=1e-6,
                 dev_tol=1e-9, inner_tol=1e-10, sigma_init=0.5,
                 compute_se=True):
        self.fixed_factors = fixed_factors
        self.response = response
        self.group = group
        self.n_quad = n_quad
        self.random_intercept = random_intercept
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.dev_tol = dev_tol
        self.inner_tol = inner_tol
        self.sigma_init = sigma_init
        self.compute_se = compute_se

    def fit(self, X: pd.DataFrame, y=None):
        """Fit on an answer-log frame; the response lives in the frame, so
        ``y`` is ignored."""
        design = build_design(X, self.fixed_factors, group=self.group,
                              response=self.response)
        if self.random_intercept:
            result = fit_glmm(
                design.X, design.y, design.groups, n_quad=self.n_quad,
                max_iter=self.max_iter, grad_tol=self.grad_tol,
                dev_tol=self.dev_tol, inner_tol=self.inner_tol,
                sigma_init=self.sigma_init, compute_se=self.compute_se,
                columns=design.columns,
            )
        else:
            result = fit_logistic(
                design.X, design.y, grad_tol=self.grad_tol,
                compute_se=self.compute_se, columns=design.columns,
                groups=design.groups,
            )
        self.design_ = design
        self.result_ = result
        self.coef_ = result.beta
        self.sigma_u_ = result.sigma_u
        self.loglik_ = result.loglik
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise RuntimeError("model is not fitted; call fit() first")

    def predict_prob(self, factor: str | None = None, mode: str = "typical",
                     n_quad: int = 41) -> dict:
        """Per-level correct-answer probabilities for one factor.

        ``typical`` evaluates at a random intercept of zero; ``population``
        additionally integrates the intercept out over its fitted normal
        distribution.  Either way the other factors are averaged on the
        probability scale over their observed joint combinations, weighted
        by how often each combination occurs in the fitted data.
        """
        self._check_fitted()
        if mode not in ("typical", "population"):
            raise ValueError(f"mode must be 'typical' or 'population', got {mode!r}")
        design = self.design_
        factor = factor if factor is not None else list(self.fixed_factors)[0]
        if factor not in design.factor_levels:
            raise ValueError(f"unknown factor {factor!r}")
        others = [f for f in design.factor_levels if f != factor]

        if others:
            combo = design.factors.groupby(others, sort=True).size().reset_index()
            combo.columns = others + ["_count"]
            weights = combo["_count"].to_numpy(dtype=float)
            weights = weights / weights.sum()
            base_frame = combo[others]
        else:
            weights = np.array([1.0])
            base_frame = pd.DataFrame(index=[0])

        beta = self.result_.beta
        sigma = self.result_.sigma_u
        out = {}
        for level in design.factor_levels[factor]:
            frame = base_frame.copy()
            frame[factor] = level
            Xp = design.encode_rows(frame)
            eta = Xp @ beta
            if mode == "typical" or sigma == 0.0:
                probs = expit(eta)
            else:
                z, logw = _hermgauss(n_quad)
                w = np.exp(logw) / np.sqrt(np.pi)
                probs = expit(eta[:, None] + _SQRT2 * sigma * z[None, :]) @ w
            out[level] = float(weights @ probs)
        return out

    def summary(self) -> dict:
        self._check_fitted()
        return self.result_.summary()
