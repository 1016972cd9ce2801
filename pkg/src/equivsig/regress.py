"""Least-squares and logistic regression kernels.

Both fits handle rank-deficient designs by keeping a maximal set of linearly
independent columns (pivoted QR) and giving the dropped columns a zero
coefficient, so ``design @ coefficients`` is always a valid prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

RANK_TOL = 1e-7
IRLS_MAX_ITER = 25
IRLS_TOL = 1e-8
SEPARATION_COEF = 30.0
WEIGHT_FLOOR = 1e-10


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray  # length p, zero for dropped columns
    rss: float
    df_residual: int
    rank: int
    kept: tuple[int, ...]


@dataclass(frozen=True)
class LogisticFit:
    coefficients: np.ndarray
    deviance: float
    converged: bool
    iterations: int
    rank: int
    separated: bool = False


def independent_columns(design: np.ndarray, tol: float = RANK_TOL) -> tuple[int, ...]:
    """Indices of a maximal linearly independent column subset, in original order.

    Column pivoting puts the best-conditioned columns first; a column is kept
    when its R diagonal exceeds ``tol`` times the largest one.
    """
    design = np.asarray(design, dtype=float)
    n, p = design.shape
    if p == 0:
        return ()
    _, r, piv = linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return ()
    rank = int(np.sum(diag > tol * diag[0]))
    return tuple(sorted(int(j) for j in piv[:rank]))


def _lstsq_kept(design: np.ndarray, y: np.ndarray, kept: tuple[int, ...]) -> np.ndarray:
    beta = np.zeros(design.shape[1])
    if kept:
        sub = design[:, kept]
        q, r = np.linalg.qr(sub)
        beta[list(kept)] = linalg.solve_triangular(r, q.T @ y)
    return beta


def ols_fit(design, y) -> LinearFit:
    """Ordinary least squares, dropping linearly dependent columns."""
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim != 2 or design.shape[0] != y.size:
        raise ValueError(f"design {design.shape} does not match y of length {y.size}")
    kept = independent_columns(design)
    beta = _lstsq_kept(design, y, kept)
    resid = y - design @ beta
    rss = float(resid @ resid)
    return LinearFit(beta, rss, y.size - len(kept), len(kept), kept)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return np.where(eta >= 0, 1.0 / (1.0 + np.exp(-np.abs(eta))),
                    np.exp(-np.abs(eta)) / (1.0 + np.exp(-np.abs(eta))))


def bernoulli_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(y > 0, np.log(mu), np.log1p(-mu))
    return float(-2.0 * np.sum(terms))


def logistic_fit(design, y, max_iter: int = IRLS_MAX_ITER, tol: float = IRLS_TOL) -> LogisticFit:
    """Maximum-likelihood logistic regression by IRLS.

    Stops when the deviance changes by less than ``tol`` or after ``max_iter``
    iterations. Step halving keeps the deviance non-increasing. Separation is
    declared when a coefficient exceeds 30 in magnitude or a working weight
    underflows; the fit then reports the last stable iterate with
    ``converged=False``. A single-class ``y`` is separable by definition.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"design {X.shape} does not match y of length {y.size}")
    n, p = X.shape
    kept = independent_columns(X)
    rank = len(kept)
    if y.min() == y.max():
        return LogisticFit(np.zeros(p), 0.0, False, 0, rank, separated=True)

    Xk = X[:, kept]
    beta = np.zeros(rank)
    mu = np.full(n, 0.5)
    dev = bernoulli_deviance(y, mu)
    converged = separated = False
    it = 0
    while it < max_iter:
        it += 1
        w = mu * (1.0 - mu)
        if np.any(w < WEIGHT_FLOOR):
            separated = True
            break
        sw = np.sqrt(w)
        z = Xk @ beta + (y - mu) / w
        q, r = np.linalg.qr(Xk * sw[:, None])
        proposal = linalg.solve_triangular(r, q.T @ (sw * z))
        step = proposal - beta
        for _ in range(30):
            cand = beta + step
            mu_c = _sigmoid(Xk @ cand)
            dev_c = bernoulli_deviance(y, mu_c)
            if np.isfinite(dev_c) and dev_c <= dev + 1e-12 * (1.0 + abs(dev)):
                break
            step = step / 2.0
        else:
            converged = True  # no descent direction left
            break
        if np.max(np.abs(cand)) > SEPARATION_COEF:
            separated = True
            break
        change = abs(dev - dev_c)
        beta, mu, dev = cand, mu_c, dev_c
        if change < tol:
            converged = True
            break
    coef = np.zeros(p)
    coef[list(kept)] = beta
    return LogisticFit(coef, dev, converged and not separated, it, rank, separated)


def _check_row(coefficients: np.ndarray, row) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if row.shape[-1] != coefficients.size:
        raise ValueError(f"design row has {row.shape[-1]} entries, fit has {coefficients.size}")
    return row


def predict_linear(fit: LinearFit, design_row):
    """Linear predictor; accepts one row or a matrix of rows."""
    return _check_row(fit.coefficients, design_row) @ fit.coefficients


def predict_logistic(fit: LogisticFit, design_row):
    """Success probability ``1 / (1 + exp(-x.beta))``."""
    eta = _check_row(fit.coefficients, design_row) @ fit.coefficients
    return _sigmoid(np.asarray(eta, dtype=float)) if np.ndim(eta) else float(_sigmoid(np.array([eta]))[0])
