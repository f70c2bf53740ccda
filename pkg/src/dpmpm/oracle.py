"""Brute-force reference computations for tiny instances.

Nothing here samples, and nothing here imports the Gibbs sampler: the
functions enumerate cells, completions and latent assignments, and integrate
over parameters with tensor Gauss-Legendre quadrature.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np
from scipy import special, stats

from .catdata import MISSING, CategoricalDataset, DisallowedPatternSet, MixtureTruth
from .errors import ContractViolation, OracleRefusal

MAX_CELLS = 10**6
MAX_GRID_POINTS = 3 * 10**7


def exact_joint(truth: MixtureTruth, mcz: DisallowedPatternSet | None = None) -> np.ndarray:
    """Joint pmf ``sum_k w_k prod_j theta_kj[x_j]`` over every cell, shape ``d``.

    With ``mcz`` the disallowed cells are zeroed and the rest renormalized.
    """
    d = [v.size for v in truth.component_pmfs[0]]
    if np.prod(np.array(d, dtype=np.float64)) > MAX_CELLS:
        raise OracleRefusal(f"{int(np.prod(d))} cells exceed the enumeration limit")
    joint = np.zeros(d)
    for w, comp in zip(truth.weights, truth.component_pmfs):
        term = np.array(w)
        for v in comp:
            term = np.multiply.outer(term, v)
        joint += term
    if mcz is not None and len(mcz):
        cells = np.indices(d).reshape(len(d), -1).T
        hit = np.zeros(cells.shape[0], dtype=bool)
        for pat in mcz.patterns:
            fixed = pat != -1
            hit |= (cells[:, fixed] == pat[fixed]).all(axis=1)
        flat = joint.ravel().copy()
        flat[hit] = 0.0
        joint = flat.reshape(d)
    return joint / joint.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def completions(data: CategoricalDataset) -> tuple[np.ndarray, np.ndarray]:
    """All fillings of the missing cells.

    Returns ``(cells, fills)``: ``cells`` lists the ``(row, col)`` of each
    missing cell in row-major order and ``fills`` has one row per filling.
    """
    cells = np.argwhere(data.codes == MISSING)
    ranges = [range(int(data.schema.d[j])) for _, j in cells]
    grid = list(itertools.product(*ranges))
    fills = np.array(grid, dtype=np.int64).reshape(len(grid), len(cells))
    return cells, fills


def _completed_tables(data: CategoricalDataset, cells: np.ndarray, fills: np.ndarray) -> np.ndarray:
    tables = np.broadcast_to(data.codes, (fills.shape[0],) + data.codes.shape).copy()
    if len(cells):
        tables[:, cells[:, 0], cells[:, 1]] = fills
    return tables


def _log_prior_z(counts: np.ndarray, alpha: float) -> float:
    """log E[prod_k pi_k^{n_k}] under truncated stick-breaking with Beta(1, alpha) sticks."""
    K = counts.size
    out = 0.0
    for k in range(K - 1):
        beyond = counts[k + 1:].sum()
        out += special.betaln(1 + counts[k], alpha + beyond) - special.betaln(1, alpha)
    return out


def _log_dirmult(c: np.ndarray, a: np.ndarray) -> float:
    return float(special.gammaln(a.sum()) - special.gammaln(a.sum() + c.sum())
                 + (special.gammaln(a + c) - special.gammaln(a)).sum())


def _check_small(data: CategoricalDataset, K: int) -> None:
    if data.p > 3 or data.n > 8 or data.n_missing > 6 or K > 2:
        raise OracleRefusal("instance too large: need p <= 3, n <= 8, <= 6 missing cells, K <= 2")


def _log_marginal_analytic(table: np.ndarray, d: Sequence[int], a: list[np.ndarray],
                           K: int, alpha: float) -> float:
    n = table.shape[0]
    terms = []
    for z in itertools.product(range(K), repeat=n):
        z = np.array(z)
        lp = _log_prior_z(np.bincount(z, minlength=K), alpha)
        for k in range(K):
            rows = table[z == k]
            for j, dj in enumerate(d):
                lp += _log_dirmult(np.bincount(rows[:, j], minlength=dj).astype(float), a[j])
        terms.append(lp)
    return float(special.logsumexp(terms))


def _axis_rule(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    return x, np.log(w) + stats.beta.logpdf(x, a, b)


def _theta_grid(d: Sequence[int], a: list[np.ndarray], K: int, grid: int):
    """Per-level theta arrays and log quadrature weights on the theta grid.

    theta_kj is parametrized by stick fractions with Beta weights, so the
    product weights integrate against the Dirichlet prior.
    """
    axes = []       # (class, var, position within stick)
    for k in range(K):
        for j, dj in enumerate(d):
            for l in range(dj - 1):
                axes.append((k, j, l))
    ndim = len(axes)
    if grid ** ndim > MAX_GRID_POINTS:
        raise OracleRefusal(f"theta grid of {grid}^{ndim} points is too large")
    logw = np.zeros((1,) * ndim)
    theta = {}      # (k, j) -> list of per-level arrays broadcastable to the grid
    remaining = {}
    for ax, (k, j, l) in enumerate(axes):
        aj = a[j]
        x, lw = _axis_rule(grid, aj[l], aj[l + 1:].sum())
        shape = [1] * ndim
        shape[ax] = grid
        x = x.reshape(shape)
        logw = logw + lw.reshape(shape)
        rem = remaining.get((k, j), np.ones((1,) * ndim))
        theta.setdefault((k, j), []).append(rem * x)
        remaining[(k, j)] = rem * (1.0 - x)
    for key, rem in remaining.items():
        theta[key].append(rem)
    return theta, logw


def _log_marginal_grid(count_tables: np.ndarray, d: Sequence[int], a: list[np.ndarray], K: int,
                       alpha: float, grid: int, disallowed: np.ndarray | None) -> np.ndarray:
    """Log integrated likelihood for each cell-count vector in ``count_tables``.

    ``disallowed`` is a boolean vector over flat cells; its mass is removed
    from each record's normalizer.
    """
    n = count_tables[0].sum()
    cells = np.indices(d).reshape(len(d), -1).T
    if K > 1:
        vx, vlw = _axis_rule(grid, 1.0, alpha)
        v_nodes = list(itertools.product(range(grid), repeat=K - 1))
    else:
        v_nodes = [()]
    acc = [[] for _ in range(count_tables.shape[0])]
    theta, logw0 = _theta_grid(d, a, K, grid)
    for vi in v_nodes:
        logw = logw0
        if K > 1:
            V = np.append(vx[list(vi)], 1.0)
            pi = V * np.concatenate(([1.0], np.cumprod(1.0 - V[:-1])))
            logw = logw + vlw[list(vi)].sum()
        else:
            pi = np.ones(1)
        fcell = []
        for cell in cells:
            f = 0.0
            for k in range(K):
                term = pi[k]
                for j, lev in enumerate(cell):
                    term = term * theta[(k, j)][lev]
                f = f + term
            fcell.append(np.broadcast_to(f, logw.shape))
        fcell = np.stack(fcell).reshape(len(cells), -1)
        with np.errstate(divide="ignore"):
            logf = np.maximum(np.log(fcell), -1e300)
            norm = 0.0
            if disallowed is not None and disallowed.any():
                norm = np.log1p(-fcell[disallowed].sum(axis=0))
        base = logw.ravel() - n * norm
        for start in range(0, count_tables.shape[0], 8):
            block = count_tables[start:start + 8] @ logf + base
            for t, v in enumerate(special.logsumexp(block, axis=1), start=start):
                acc[t].append(v)
    return np.array([special.logsumexp(v) for v in acc])


def exact_completion_posterior(data: CategoricalDataset, K: int, alpha: float,
                               dirichlet_a: list[np.ndarray] | None = None,
                               mcz: DisallowedPatternSet | None = None, grid: int = 20,
                               method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Posterior probability of every filling of the missing cells.

    ``alpha`` is held fixed.  Without structural zeros the integral is
    analytic (``method="analytic"``); with them, or with ``method="grid"``,
    (V, theta) are integrated on a ``grid``-point tensor Gauss-Legendre rule.
    Returns ``(fills, probs)`` where ``fills`` follows :func:`completions`.
    """
    _check_small(data, K)
    d = [int(x) for x in data.schema.d]
    a = [np.ones(dj) for dj in d] if dirichlet_a is None else [np.asarray(v, float) for v in dirichlet_a]
    cells, fills = completions(data)
    tables = _completed_tables(data, cells, fills)
    truncated = mcz is not None and len(mcz) > 0
    if truncated:
        allowed = np.array([not mcz.matches(t).any() for t in tables])
        if not allowed.any():
            raise ContractViolation("no completion avoids the structural zeros")
    else:
        allowed = np.ones(len(tables), dtype=bool)
    if method == "auto":
        method = "grid" if truncated else "analytic"
    if method == "analytic" and truncated:
        raise ContractViolation("the analytic route does not handle structural zeros")
    logp = np.full(len(tables), -np.inf)
    if method == "analytic":
        for t in np.flatnonzero(allowed):
            logp[t] = _log_marginal_analytic(tables[t], d, a, K, alpha)
    elif method == "grid":
        flat = np.array([np.bincount(np.ravel_multi_index(t.T, d), minlength=int(np.prod(d)))
                         for t in tables[allowed]], dtype=np.float64)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        disallowed = None
        if truncated:
            allcells = np.indices(d).reshape(len(d), -1).T
            disallowed = mcz.matches(allcells)
        lm = _log_marginal_grid(uniq, d, a, K, alpha, grid, disallowed)
        logp[allowed] = lm[np.asarray(inv).ravel()]
    else:
        raise ValueError(f"unknown method {method!r}")
    probs = np.exp(logp - special.logsumexp(logp))
    return fills, probs


def alpha_conditional_cdf(V: np.ndarray, a_alpha: float, b_alpha: float,
                          points: int = 20001) -> tuple[np.ndarray, np.ndarray]:
    """CDF of alpha given V by trapezoid integration of the unnormalized density.

    Density: ``alpha^(a-1) e^(-b alpha) prod_{k<K} alpha (1 - V_k)^(alpha - 1)``.
    """
    V = np.asarray(V, float)[:-1]
    K1 = V.size
    s = np.log1p(-np.minimum(V, 1 - 1e-14)).sum()
    upper = 60.0 * (a_alpha + K1 + 1.0) / max(b_alpha - s, 1e-6)
    grid = np.linspace(0.0, upper, points)[1:]
    logf = (a_alpha + K1 - 1.0) * np.log(grid) - b_alpha * grid + (grid - 1.0) * s
    f = np.exp(logf - logf.max())
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(grid))))
    return grid, cdf / cdf[-1]


def stick_conditional_cdf(n_k: int, alpha: float, beyond: int,
                          points: int = 20001) -> tuple[np.ndarray, np.ndarray]:
    """CDF of a stick fraction given class counts, from ``v^n_k (1-v)^(alpha+beyond-1)``."""
    grid = np.linspace(0.0, 1.0, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = special.xlogy(n_k, grid) + special.xlog1py(alpha + beyond - 1.0, -grid)
    logf[~np.isfinite(logf) & (logf > 0)] = -np.inf  # integrable endpoint singularity
    f = np.exp(logf - np.max(logf[np.isfinite(logf)]))
    f[~np.isfinite(f)] = 0.0
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(grid))))
    return grid, cdf / cdf[-1]
