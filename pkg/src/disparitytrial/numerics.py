"""Self-contained regression kernel used by every estimator.

Provides restricted (natural) cubic spline bases and weighted logistic
regression fit by iteratively reweighted least squares (IRLS).  The IRLS
loop accepts fractional responses in [0, 1], which makes the same routine
usable as a quasi-likelihood fit for the pseudo-outcomes produced by the
iterated-conditional-expectation estimators.

No regularization is applied anywhere: the saturated-model identities the
test suite relies on require exact maximum likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from .errors import BadKnots, DimensionMismatch, RankDeficient, SeparationDetected

#: Any |coefficient| beyond this on the logit scale is treated as separation;
#: probabilities past ~3e-7 are numerically indistinguishable from 0/1.
SEPARATION_BOUND = 15.0

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100


@dataclass
class GlmFit:
    """Result of a logistic fit.

    Attributes
    ----------
    coefficients : ndarray
        Fitted coefficient vector, one entry per design column.
    converged : bool
        True when the max-abs score fell below the tolerance.
    iterations : int
        Number of Newton updates taken.
    deviance : float
        Final (quasi-)binomial deviance.
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    deviance: float


def spline_basis(x, knots) -> np.ndarray:
    """Restricted cubic spline design block for one covariate.

    Parameters
    ----------
    x : array-like
        Covariate values.
    knots : array-like
        Strictly increasing knot locations.  With fewer than 3 knots the
        basis degrades to the identity (a single linear column).

    Returns
    -------
    ndarray of shape (n, max(1, k - 1))
        The linear column followed by k - 2 nonlinear columns.  Each
        nonlinear column is zero at and below its own knot, and the basis
        is linear beyond the boundary knots.
    """
    x = np.asarray(x, dtype=float)
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1:
        raise BadKnots("knots must be a 1-d sequence")
    if knots.size >= 2 and np.any(np.diff(knots) <= 0):
        raise BadKnots("knots must be strictly increasing with no duplicates")
    k = knots.size
    if k < 3:
        return x.reshape(-1, 1)

    t = knots
    scale = (t[-1] - t[0]) ** 2

    def cube(u):
        return np.maximum(u, 0.0) ** 3

    cols = [x]
    for j in range(k - 2):
        term = (
            cube(x - t[j])
            - cube(x - t[k - 2]) * (t[k - 1] - t[j]) / (t[k - 1] - t[k - 2])
            + cube(x - t[k - 1]) * (t[k - 2] - t[j]) / (t[k - 1] - t[k - 2])
        ) / scale
        cols.append(term)
    return np.column_stack(cols)


def default_knots(x, n_knots: int = 3) -> np.ndarray:
    """Knots at evenly spaced empirical quantiles, 0.10/0.50/0.90 for three."""
    x = np.asarray(x, dtype=float)
    if n_knots < 3:
        return np.array([])
    probs = np.linspace(0.10, 0.90, n_knots)
    knots = np.quantile(x, probs)
    if np.any(np.diff(knots) <= 0):  # heavily tied covariate: no spline
        return np.array([])
    return knots


def _entropy(y, w):
    return float(np.sum(w * (xlogy(y, y) + xlogy(1.0 - y, 1.0 - y))))


def _deviance(y, p, w, entropy):
    return 2.0 * (entropy - float(np.sum(w * (xlogy(y, p) + xlogy(1.0 - y, 1.0 - p)))))


def fit_logistic(
    design,
    y,
    weights=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GlmFit:
    """Maximize the (weighted) Bernoulli log-likelihood by IRLS.

    Parameters
    ----------
    design : array-like of shape (n, p)
        Design matrix, caller-supplied intercept column included if wanted.
    y : array-like of shape (n,)
        Responses in [0, 1].  Fractional values are accepted (quasi-binomial).
    weights : array-like, optional
        Nonnegative finite case weights.
    tol : float
        Convergence tolerance on the maximum absolute score component.
    max_iter : int
        Iteration cap; exceeding it returns converged=False, it never raises.

    Raises
    ------
    SeparationDetected
        If any |coefficient| crosses ``SEPARATION_BOUND`` while iterating.
    RankDeficient
        If the design (or the normal-equations matrix) is singular.
    DimensionMismatch
        If shapes disagree.
    """
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"design has {X.shape[0]} rows, y has {y.shape[0]}")
    if weights is None:
        w = np.ones(y.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape[0] != y.shape[0]:
            raise DimensionMismatch("weights length does not match y")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be nonnegative and finite")

    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient")

    entropy = _entropy(y, w)
    beta = np.zeros(X.shape[1])
    p = expit(X @ beta)
    dev = _deviance(y, p, w, entropy)
    iterations = 0
    converged = False
    # deviance comparisons need slack at the scale of the deviance itself
    slack = 1e-10 * (abs(dev) + 1.0)

    for _ in range(max_iter):
        score = X.T @ (w * (y - p))
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        info = X.T @ (X * (w * p * (1.0 - p))[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise RankDeficient("normal-equations matrix is singular") from exc

        # step-halving: retreat while the deviance worsens
        factor = 1.0
        for _ in range(30):
            candidate = beta + factor * step
            cand_p = expit(X @ candidate)
            cand_dev = _deviance(y, cand_p, w, entropy)
            if cand_dev <= dev + slack:
                break
            factor /= 2.0
        beta, p, dev = candidate, cand_p, cand_dev
        iterations += 1

        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationDetected(
                "coefficient norm exceeded the separation bound; "
                "fitted probabilities are pinned at 0/1"
            )
    else:
        score = X.T @ (w * (y - p))
        converged = bool(np.max(np.abs(score)) < tol)

    return GlmFit(coefficients=beta, converged=converged, iterations=iterations, deviance=dev)


def predict_prob(fit: GlmFit, design) -> np.ndarray:
    """Fitted probabilities logistic(design @ coefficients), each in (0, 1)."""
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != fit.coefficients.shape[0]:
        raise DimensionMismatch(
            f"design has {X.shape[1]} columns, fit expects {fit.coefficients.shape[0]}"
        )
    return expit(X @ fit.coefficients)


def fit_wls(design, y, weights=None) -> np.ndarray:
    """Weighted least squares coefficients (used for continuous outcomes)."""
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch("design rows do not match y")
    if weights is not None:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        X = X * sw[:, None]
        y = y * sw
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient")
    return coef
