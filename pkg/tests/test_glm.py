import numpy as np
import pytest

from dpmpm.catdata import CategoricalDataset, Schema
from dpmpm.datasets import acs_sample2
from dpmpm.errors import ConfigurationError
from dpmpm.glm import fit_GLMs, fit_logistic, fit_multinomial, parse_formula, pool_fitted_GLMs
from dpmpm.pooling import Method

YX = Schema.from_levels([("X", ["a", "b"]), ("Y", ["0", "1"])])


def counts_dataset(cells):
    """cells: {(x, y): count}"""
    rows = [[x, y] for (x, y), c in cells.items() for _ in range(c)]
    return CategoricalDataset(YX, np.array(rows))


def test_intercept_only():
    ds = counts_dataset({(0, 1): 30, (0, 0): 70})
    fit = fit_logistic(ds, "Y")
    assert fit.coef[0] == pytest.approx(np.log(30 / 70), abs=1e-6)
    assert fit.score_norm < 1e-6
    half = counts_dataset({(0, 1): 50, (0, 0): 50})
    assert fit_logistic(half, "Y").coef[0] == pytest.approx(0.0, abs=1e-10)


def test_two_by_two_slope():
    a, b, c, d = 12, 30, 25, 9      # (x=0,y=0), (x=0,y=1), (x=1,y=0), (x=1,y=1)
    ds = counts_dataset({(0, 0): a, (0, 1): b, (1, 0): c, (1, 1): d})
    fit = fit_logistic(ds, "Y", ["X"])
    assert fit.names == ["(Intercept)", "Xb"]
    assert fit.coef[1] == pytest.approx(np.log(a * d / (b * c)), abs=1e-6)
    assert fit.variance[1] == pytest.approx(1 / a + 1 / b + 1 / c + 1 / d, rel=1e-6)


def test_multinomial_binary_collapse():
    ds = counts_dataset({(0, 0): 12, (0, 1): 30, (1, 0): 25, (1, 1): 9})
    lg = fit_logistic(ds, "Y", ["X"])
    mn = fit_multinomial(ds, "Y", ["X"])
    np.testing.assert_allclose(mn.coef, lg.coef, atol=1e-8)
    np.testing.assert_allclose(mn.variance, lg.variance, atol=1e-8)
    assert mn.names == ["1 (Intercept)", "1 Xb"]


def test_multinomial_intercepts():
    schema = Schema.from_levels([("Y", ["0", "1", "2"])])
    ds = CategoricalDataset(schema, np.repeat([0, 1, 2], [20, 30, 50])[:, None])
    fit = fit_multinomial(ds, "Y")
    np.testing.assert_allclose(fit.coef, [np.log(30 / 20), np.log(50 / 20)], atol=1e-8)
    assert fit.score_norm < 1e-6


def test_separation_warns():
    ds = counts_dataset({(0, 0): 10, (1, 1): 10})
    fit = fit_logistic(ds, "Y", ["X"])
    assert any("separation" in w for w in fit.warnings)


def test_formula_and_validation():
    assert parse_formula("SEX~WKL+MAR") == ("SEX", ["WKL", "MAR"])
    assert parse_formula("SEX ~ 1") == ("SEX", [])
    with pytest.raises(ConfigurationError):
        parse_formula("SEX")
    schema = Schema.from_levels([("Y", ["0", "1", "2"])])
    with pytest.raises(ConfigurationError):
        fit_logistic(CategoricalDataset(schema, np.array([[0], [1]])), "Y")


def test_reference_formula_shape_and_pooling():
    data, _ = acs_sample2(n=500)
    fits = fit_GLMs([data, data, data], "SEX~WKL+MAR", "logistic")
    assert len(fits[0].names) == 7
    for f in fits:
        assert f.converged and f.score_norm < 1e-6
    table = pool_fitted_GLMs(fits, Method.SYNTHESIS_PARTIAL)
    assert len(table) == 7
    # identical fits: b = 0, so the pooled variance is ubar
    np.testing.assert_allclose(table.values()[:, 1], np.sqrt(fits[0].variance), rtol=1e-12)
    mfits = fit_GLMs([data, data], "WKL~SEX", "multinomial")
    mt = pool_fitted_GLMs(mfits, "imputation")
    assert mt.key_columns == ("Levels", "Parameter") and len(mt) == 4
