import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dpmpm.catdata import CategoricalDataset, Schema
from dpmpm.datasets import acs_sample2
from dpmpm.errors import ConfigurationError, DataError
from dpmpm.pooling import (
    DF_CAP,
    Method,
    PerDatasetEstimate,
    combine,
    compute_probs,
    pool_estimated_probs,
    pooled_tables_csv,
    t_quantile,
)


def _df(m, ratio_fn, sign):
    try:
        return min((m - 1) * (1 + sign * ratio_fn()) ** 2, DF_CAP)
    except (OverflowError, ZeroDivisionError):
        return DF_CAP


def reference_combine(q, u, method):
    """Plain-Python combining rules, written separately from the library."""
    m = len(q)
    qbar = sum(q) / m
    b = sum((x - qbar) ** 2 for x in q) / (m - 1)
    ubar = sum(u) / m
    if method == "imputation":
        T = (1 + 1 / m) * b + ubar
        nu = _df(m, lambda: ubar / ((1 + 1 / m) * b), 1)
    elif method == "synthesis_partial":
        T = b / m + ubar
        nu = _df(m, lambda: ubar / (b / m), 1)
    else:
        T = max((1 + 1 / m) * b - ubar, ubar / m)
        nu = _df(m, lambda: m * ubar / ((m + 1) * b), -1)
    return qbar, T, nu


def est(q, u=0.5):
    return [PerDatasetEstimate("x", float(a), u) for a in q]


@pytest.mark.parametrize("method, T, nu", [
    ("imputation", 11 / 6, 3.78125),
    ("synthesis_partial", 5 / 6, 12.5),
    ("synthesis_full", 5 / 6, 0.78125),
])
def test_hand_oracle(method, T, nu):
    r = combine(est([1, 2, 3]), method)
    assert r.estimate == 2.0
    assert abs(r.std_error ** 2 - T) < 1e-12
    assert abs(r.df - nu) < 1e-12
    assert r.warnings == ()


def test_zero_between_variance():
    r = combine(est([4, 4, 4], 0.25), Method.IMPUTATION)
    assert r.std_error == 0.5 and r.df == DF_CAP
    assert r.ci_upper - r.estimate == pytest.approx(1.959964 * 0.5, abs=1e-6)


def test_full_synthesis_clamp_warns():
    r = combine(est([1.0, 1.1, 0.9], 0.5), Method.SYNTHESIS_FULL)
    assert r.warnings == ("variance_clamped",)
    assert r.std_error ** 2 == pytest.approx(0.5 / 3)


def test_validation():
    with pytest.raises(ConfigurationError):
        combine(est([1]), "imputation")
    with pytest.raises(ConfigurationError):
        Method.parse("bogus")
    with pytest.raises(DataError):
        combine([PerDatasetEstimate("a", 1, 1), PerDatasetEstimate("b", 2, 1)])
    with pytest.raises(ValueError):
        PerDatasetEstimate("a", 1.0, -1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.sampled_from(["imputation", "synthesis_partial", "synthesis_full"]),
       st.data())
def test_against_reference(m, method, data):
    q = data.draw(st.lists(st.floats(-100, 100), min_size=m, max_size=m))
    u = data.draw(st.lists(st.floats(0, 10), min_size=m, max_size=m))
    r = combine([PerDatasetEstimate("x", a, b) for a, b in zip(q, u)], method)
    qbar, T, nu = reference_combine(q, u, method)
    assert r.estimate == pytest.approx(qbar, rel=1e-12, abs=1e-12)
    assert r.std_error ** 2 == pytest.approx(T, rel=1e-9, abs=1e-12)
    if np.isfinite(nu) and nu < DF_CAP:
        assert r.df == pytest.approx(nu, rel=1e-9)


@pytest.mark.parametrize("df, expected", [(np.inf, 1.959964), (1, 12.706205), (10, 2.228139)])
def test_t_quantile(df, expected):
    assert t_quantile(0.975, df) == pytest.approx(expected, abs=1e-6)


def test_t_quantile_matches_scipy():
    p = np.array([0.01, 0.2, 0.5, 0.9, 0.975])
    for df in (0.5, 2.3, 7, 50, 1e5):
        np.testing.assert_allclose(t_quantile(p, df), stats.t.ppf(p, df), rtol=1e-9, atol=1e-12)


def test_compute_probs_small():
    schema = Schema.from_levels([("A", ["0", "1"])])
    ds = CategoricalDataset(schema, np.array([[0], [0], [1], [0]]))
    (tab,) = compute_probs([ds, ds], [("A",)])
    np.testing.assert_allclose(tab.q[0], [0.75, 0.25])
    np.testing.assert_allclose(tab.u[0], [0.046875, 0.046875])
    (pooled,) = pool_estimated_probs([tab], "imputation")
    np.testing.assert_allclose(pooled.values()[:, 1], np.sqrt([0.046875, 0.046875]))


def test_table_sizes_and_absent_level():
    data, _ = acs_sample2(n=200)
    tables = compute_probs([data, data], ["MAR", "SEX", ("MAR", "WKL")])
    assert [t.q.shape[1] for t in tables] == [5, 2, 15]
    schema = Schema.from_levels([("A", ["x", "y", "z"])])
    ds = CategoricalDataset(schema, np.array([[0], [1]]))
    (tab,) = compute_probs([ds, ds], ["A"])
    assert tab.q[0, 2] == 0 and tab.u[0, 2] == 0
    pooled = pool_estimated_probs(tables, "imputation")
    csv_text = pooled_tables_csv(pooled)
    assert len(csv_text.strip().splitlines()) == 1 + 22
    assert pooled[0].to_text().splitlines()[1].lstrip().startswith("1 ")
