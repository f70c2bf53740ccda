"""Combining rules for multiply imputed and synthetic datasets.

For ``m`` per-dataset estimates ``q_l`` with variances ``u_l``::

    qbar = mean(q)            b = var(q, ddof=1)          ubar = mean(u)

    imputation         T = (1 + 1/m) b + ubar   df = (m-1) (1 + ubar / ((1 + 1/m) b))^2
    synthesis_partial  T = b/m + ubar           df = (m-1) (1 + ubar / (b/m))^2
    synthesis_full     T = (1 + 1/m) b - ubar   df = (m-1) (1 - m ubar / ((m+1) b))^2

Intervals are ``qbar +/- t_{df, 0.975} sqrt(T)``.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .catdata import MISSING, CategoricalDataset
from .errors import ConfigurationError, DataError

DF_CAP = 1e9


class Method(str, Enum):
    IMPUTATION = "imputation"
    SYNTHESIS_FULL = "synthesis_full"
    SYNTHESIS_PARTIAL = "synthesis_partial"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigurationError(f"unknown method {value!r}; choose one of {choices}") from None


@dataclass(frozen=True)
class PerDatasetEstimate:
    label: str
    q: float
    u: float

    def __post_init__(self):
        if self.u < 0:
            raise ValueError(f"variance must be non-negative, got {self.u}")


@dataclass(frozen=True)
class PooledEstimate:
    label: str
    estimate: float
    std_error: float
    df: float
    statistic: float
    ci_lower: float
    ci_upper: float
    warnings: tuple[str, ...] = ()


def t_quantile(p, df):
    """Quantile of Student's t via the inverse regularized incomplete beta.

    ``df >= DF_CAP`` (or infinite) gives the standard normal quantile.
    """
    p = np.asarray(p, dtype=np.float64)
    df = np.asarray(df, dtype=np.float64)
    p, df = np.broadcast_arrays(p, df)
    out = np.empty(p.shape)
    normal = ~(df < DF_CAP)
    out[normal] = special.ndtri(p[normal])
    t = ~normal
    if t.any():
        pt, nu = p[t], df[t]
        tail = 2.0 * np.minimum(pt, 1.0 - pt)
        x = special.betaincinv(nu / 2.0, 0.5, tail)
        mag = np.sqrt(nu * (1.0 - x) / x)
        out[t] = np.where(pt < 0.5, -mag, np.where(pt == 0.5, 0.0, mag))
    return out if out.ndim else float(out)


def _pool_arrays(q: np.ndarray, u: np.ndarray, method: Method, level: float = 0.95):
    """Vectorized combining rules over axis 0 (the datasets)."""
    q = np.asarray(q, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    m = q.shape[0]
    if m < 2:
        raise ConfigurationError(f"combining rules need m >= 2 datasets, got {m}")
    qbar = q.mean(axis=0)
    b = q.var(axis=0, ddof=1)
    ubar = u.mean(axis=0)
    clamped = np.zeros(qbar.shape, dtype=bool)
    pos = b > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if method is Method.IMPUTATION:
            T = (1.0 + 1.0 / m) * b + ubar
            ratio = ubar / ((1.0 + 1.0 / m) * b)
            df = (m - 1) * (1.0 + ratio) ** 2
        elif method is Method.SYNTHESIS_PARTIAL:
            T = b / m + ubar
            ratio = ubar / (b / m)
            df = (m - 1) * (1.0 + ratio) ** 2
        else:
            Tf = (1.0 + 1.0 / m) * b - ubar
            floor = ubar / m
            clamped = Tf < floor
            T = np.maximum(Tf, floor)
            ratio = m * ubar / ((m + 1.0) * b)
            df = (m - 1) * (1.0 - ratio) ** 2
    df = np.where(pos, np.minimum(df, DF_CAP), DF_CAP)
    T = np.maximum(T, 0.0)
    se = np.sqrt(T)
    half = t_quantile(0.5 + level / 2.0, df) * se
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(se > 0, qbar / se, np.nan)
    return qbar, se, df, stat, qbar - half, qbar + half, clamped


def combine(estimates: Sequence[PerDatasetEstimate], method: "Method | str" = Method.IMPUTATION,
            level: float = 0.95) -> PooledEstimate:
    """Pool one estimand across ``m >= 2`` datasets."""
    method = Method.parse(method)
    labels = {e.label for e in estimates}
    if len(labels) > 1:
        raise DataError(f"estimates carry different labels: {sorted(labels)}")
    q = np.array([e.q for e in estimates])
    u = np.array([e.u for e in estimates])
    qbar, se, df, stat, lo, hi, clamped = _pool_arrays(q, u, method, level)
    warn = ("variance_clamped",) if bool(clamped) else ()
    return PooledEstimate(estimates[0].label, float(qbar), float(se), float(df), float(stat),
                          float(lo), float(hi), warn)


def _num(v: float, digits: int) -> str:
    # fixed point, switching to scientific once the value would swamp the column
    return f"{v:.{digits}e}" if abs(v) >= 1e6 else f"{v:.{digits}f}"


@dataclass
class PooledTable:
    """Pooled rows keyed by one or more label columns."""

    key_columns: tuple[str, ...]
    keys: list[tuple[str, ...]]
    rows: list[PooledEstimate]
    method: Method = Method.IMPUTATION
    warnings: list[str] = field(default_factory=list)

    VALUE_COLUMNS = ("Estimate", "Std.Error", "Df", "Statistic", "CI_Lower", "CI_Upper")

    def values(self) -> np.ndarray:
        return np.array([[r.estimate, r.std_error, r.df, r.statistic, r.ci_lower, r.ci_upper]
                         for r in self.rows]).reshape(len(self.rows), 6)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.key_columns) + list(self.VALUE_COLUMNS))
        for key, r in zip(self.keys, self.rows):
            writer.writerow(list(key) + [repr(float(v)) for v in
                                         (r.estimate, r.std_error, r.df, r.statistic,
                                          r.ci_lower, r.ci_upper)])
        return buf.getvalue()

    def to_text(self, digits: int = 4) -> str:
        """Aligned plain-text table with a 1-based row index."""
        header = [""] + list(self.key_columns) + list(self.VALUE_COLUMNS)
        body = []
        for i, (key, r) in enumerate(zip(self.keys, self.rows), start=1):
            nums = [_num(v, digits) for v in (r.estimate, r.std_error, r.df, r.statistic,
                                                 r.ci_lower, r.ci_upper)]
            body.append([str(i)] + list(key) + nums)
        widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
        lines = [" ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + body]
        return "\n".join(lines) + "\n"


@dataclass
class ProbTable:
    """Per-dataset cell proportions for one marginal or joint table.

    ``q`` and ``u`` have shape ``(m, n_cells)``; cells enumerate the level
    cross-product with the first variable varying slowest.
    """

    variables: tuple[str, ...]
    cells: list[tuple[str, ...]]
    q: np.ndarray
    u: np.ndarray

    def estimates(self, l: int) -> list[PerDatasetEstimate]:
        return [PerDatasetEstimate(" ".join(c), float(q), float(u))
                for c, q, u in zip(self.cells, self.q[l], self.u[l])]


def _parse_varlist(varlist) -> list[tuple[str, ...]]:
    out = []
    for item in varlist:
        out.append((item,) if isinstance(item, str) else tuple(item))
    return out


def compute_probs(datasets: Sequence[CategoricalDataset], varlist) -> list[ProbTable]:
    """Cell relative frequencies and binomial variances ``q(1-q)/n`` per dataset."""
    if not datasets:
        raise ConfigurationError("no datasets given")
    schema = datasets[0].schema
    for ds in datasets[1:]:
        if ds.schema != schema:
            raise DataError("datasets do not share a schema")
    tables = []
    for names in _parse_varlist(varlist):
        idx = [schema.index(nm) for nm in names]
        d = [int(schema.d[j]) for j in idx]
        ncell = int(np.prod(d))
        q = np.empty((len(datasets), ncell))
        for l, ds in enumerate(datasets):
            sub = ds.codes[:, idx]
            if (sub == MISSING).any():
                raise DataError(f"dataset {l + 1} has missing cells in {names}")
            flat = np.ravel_multi_index(sub.T, d) if ds.n else np.zeros(0, dtype=np.int64)
            q[l] = np.bincount(flat, minlength=ncell) / max(ds.n, 1)
        n = np.array([ds.n for ds in datasets], dtype=np.float64)[:, None]
        u = q * (1.0 - q) / np.maximum(n, 1.0)
        cells = list(itertools.product(*(schema.levels[j] for j in idx)))
        tables.append(ProbTable(tuple(names), cells, q, u))
    return tables


def pool_estimated_probs(tables: Iterable[ProbTable], method: "Method | str") -> list[PooledTable]:
    method = Method.parse(method)
    out = []
    for tab in tables:
        qbar, se, df, stat, lo, hi, clamped = _pool_arrays(tab.q, tab.u, method)
        rows = [PooledEstimate(" ".join(c), *map(float, vals),
                               ("variance_clamped",) if cl else ())
                for c, *vals, cl in zip(tab.cells, qbar, se, df, stat, lo, hi, clamped)]
        pooled = PooledTable(tab.variables, list(tab.cells), rows, method)
        if clamped.any():
            pooled.warnings.append(f"variance_clamped on {int(clamped.sum())} cell(s)")
        out.append(pooled)
    return out


def pooled_tables_csv(tables: Sequence[PooledTable]) -> str:
    """Stack several pooled tables into one CSV with a ``Table`` column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    width = max(len(t.key_columns) for t in tables)
    writer.writerow(["Table"] + [f"Key{i + 1}" for i in range(width)]
                    + list(PooledTable.VALUE_COLUMNS))
    for t in tables:
        name = ",".join(t.key_columns)
        for key, r in zip(t.keys, t.rows):
            pad = list(key) + [""] * (width - len(key))
            writer.writerow([name] + pad + [repr(float(v)) for v in
                                            (r.estimate, r.std_error, r.df, r.statistic,
                                             r.ci_lower, r.ci_upper)])
    return buf.getvalue()

