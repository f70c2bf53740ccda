"""Logistic and baseline-category multinomial regression on categorical data.

Predictors are treatment coded against their first (lexicographic) level.
Coefficient names follow R's conventions: ``(Intercept)`` and
``<VARIABLE><level>``; multinomial rows are labelled ``<level> <coefficient>``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, log_softmax

from .catdata import MISSING, CategoricalDataset
from .errors import ConfigurationError, DataError
from .pooling import Method, PerDatasetEstimate, PooledTable, PooledEstimate, _pool_arrays

log = logging.getLogger(__name__)

SCORE_TOL = 1e-8
MAX_ITER = 100
SEPARATION_BOUND = 30.0


@dataclass
class GlmFit:
    family: str
    response: str
    names: list[str]
    coef: np.ndarray
    variance: np.ndarray
    iterations: int
    score_norm: float
    converged: bool
    warnings: list[str] = field(default_factory=list)
    levels: list[str] = field(default_factory=list)
    keys: list[tuple[str, ...]] = field(default_factory=list)

    def estimates(self) -> list[PerDatasetEstimate]:
        return [PerDatasetEstimate(nm, float(q), float(u) if np.isfinite(u) else np.nan)
                for nm, q, u in zip(self.names, self.coef, self.variance)]


def parse_formula(formula: str) -> tuple[str, list[str]]:
    """``"SEX~WKL+MAR"`` -> ``("SEX", ["WKL", "MAR"])``; ``"Y~1"`` has no predictors."""
    if formula.count("~") != 1:
        raise ConfigurationError(f"formula {formula!r} must contain exactly one '~'")
    lhs, rhs = (s.strip() for s in formula.split("~"))
    if not lhs:
        raise ConfigurationError(f"formula {formula!r} has no response")
    terms = [t.strip() for t in re.split(r"\+", rhs) if t.strip()]
    terms = [t for t in terms if t != "1"]
    return lhs, terms


def design_matrix(data: CategoricalDataset, predictors: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    schema = data.schema
    cols = [np.ones(data.n)]
    names = ["(Intercept)"]
    for var in predictors:
        j = schema.index(var)
        x = data.codes[:, j]
        if (x == MISSING).any():
            raise DataError(f"predictor {var!r} has missing values")
        for k, lev in enumerate(schema.levels[j][1:], start=1):
            cols.append((x == k).astype(np.float64))
            names.append(f"{var}{lev}")
    return np.column_stack(cols), names


def _usable_columns(X: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.any(X != 0, axis=0))


def _newton(loglik_grad_hess, beta0: np.ndarray):
    beta = beta0.copy()
    warnings = []
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        grad, hess = loglik_grad_hess(beta)
        if np.max(np.abs(grad)) < SCORE_TOL:
            converged = True
            it -= 1
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            warnings.append("separation: coefficients diverging; returning last iterate")
            break
    grad, hess = loglik_grad_hess(beta)
    if np.max(np.abs(grad)) < SCORE_TOL:
        converged = True
    elif not warnings:
        warnings.append(f"no convergence after {MAX_ITER} iterations")
    return beta, grad, hess, it, converged, warnings


def _covariance(hess: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(hess)


def fit_logistic(data: CategoricalDataset, response: str, predictors: Sequence[str] = ()) -> GlmFit:
    """Binary logistic regression by IRLS; models P(response = second level)."""
    j = data.schema.index(response)
    levels = data.schema.levels[j]
    if len(levels) != 2:
        raise ConfigurationError(f"logistic response {response!r} needs 2 levels, has {len(levels)}")
    y = data.codes[:, j]
    if (y == MISSING).any():
        raise DataError(f"response {response!r} has missing values")
    y = y.astype(np.float64)
    X, names = design_matrix(data, predictors)
    use = _usable_columns(X)
    Xu = X[:, use]

    def grad_hess(beta):
        mu = expit(Xu @ beta)
        w = mu * (1.0 - mu)
        return Xu.T @ (y - mu), (Xu * w[:, None]).T @ Xu

    beta, grad, hess, it, conv, warns = _newton(grad_hess, np.zeros(use.size))
    coef = np.full(len(names), np.nan)
    var = np.full(len(names), np.nan)
    coef[use] = beta
    var[use] = np.diag(_covariance(hess))
    if use.size < len(names):
        warns.append("aliased coefficients: " + ", ".join(names[i] for i in range(len(names))
                                                          if i not in set(use.tolist())))
    for w in warns:
        log.warning("fit_logistic(%s): %s", response, w)
    return GlmFit("logistic", response, names, coef, var, it, float(np.max(np.abs(grad))),
                  conv, warns, [levels[1]], [(nm,) for nm in names])


def fit_multinomial(data: CategoricalDataset, response: str,
                    predictors: Sequence[str] = ()) -> GlmFit:
    """Baseline-category logit against the first level, fitted by Newton-Raphson.

    Parameters are ordered by non-reference level, then by design column.
    """
    j = data.schema.index(response)
    levels = data.schema.levels[j]
    y = data.codes[:, j]
    if (y == MISSING).any():
        raise DataError(f"response {response!r} has missing values")
    C = len(levels) - 1
    X, names = design_matrix(data, predictors)
    use = _usable_columns(X)
    Xu = X[:, use]
    P = use.size
    Y = np.zeros((data.n, C + 1))
    Y[np.arange(data.n), y] = 1.0
    Y = Y[:, 1:]

    def grad_hess(flat):
        B = flat.reshape(C, P)
        eta = np.column_stack([np.zeros(data.n), Xu @ B.T])
        prob = np.exp(log_softmax(eta, axis=1))[:, 1:]
        grad = ((Y - prob).T @ Xu).ravel()
        hess = np.empty((C * P, C * P))
        for a in range(C):
            for b in range(a, C):
                w = prob[:, a] * ((a == b) - prob[:, b])
                blk = (Xu * w[:, None]).T @ Xu
                hess[a * P:(a + 1) * P, b * P:(b + 1) * P] = blk
                hess[b * P:(b + 1) * P, a * P:(a + 1) * P] = blk.T
        return grad, hess

    beta, grad, hess, it, conv, warns = _newton(grad_hess, np.zeros(C * P))
    cov = np.diag(_covariance(hess))
    coef = np.full((C, len(names)), np.nan)
    var = np.full((C, len(names)), np.nan)
    coef[:, use] = beta.reshape(C, P)
    var[:, use] = cov.reshape(C, P)
    labels = [f"{lev} {nm}" for lev in levels[1:] for nm in names]
    for w in warns:
        log.warning("fit_multinomial(%s): %s", response, w)
    return GlmFit("multinomial", response, labels, coef.ravel(), var.ravel(), it,
                  float(np.max(np.abs(grad))) if grad.size else 0.0, conv, warns,
                  list(levels[1:]), [(lev, nm) for lev in levels[1:] for nm in names])


def fit_GLMs(datasets: Sequence[CategoricalDataset], formula: str,
             family: str = "logistic") -> list[GlmFit]:
    response, predictors = parse_formula(formula)
    if family == "logistic":
        fitter = fit_logistic
    elif family == "multinomial":
        fitter = fit_multinomial
    else:
        raise ConfigurationError(f"unknown family {family!r}; use logistic or multinomial")
    return [fitter(ds, response, predictors) for ds in datasets]


def pool_fitted_GLMs(fits: Sequence[GlmFit], method: "Method | str") -> PooledTable:
    """Pool coefficient estimates across datasets with the chosen combining rule."""
    method = Method.parse(method)
    if not fits:
        raise ConfigurationError("no fits to pool")
    names = fits[0].names
    for f in fits[1:]:
        if f.names != names:
            raise DataError("coefficient sets differ across datasets")
    q = np.array([f.coef for f in fits])
    u = np.array([f.variance for f in fits])
    qbar, se, df, stat, lo, hi, clamped = _pool_arrays(q, u, method)
    rows = [PooledEstimate(nm, *map(float, vals), ("variance_clamped",) if cl else ())
            for nm, *vals, cl in zip(names, qbar, se, df, stat, lo, hi, clamped)]
    key_columns = ("Levels", "Parameter") if fits[0].family == "multinomial" else ("Parameter",)
    table = PooledTable(key_columns, list(fits[0].keys), rows, method)
    if clamped.any():
        table.warnings.append(f"variance_clamped on {int(clamped.sum())} coefficient(s)")
    return table
