import json

import numpy as np
import pytest

from dpmpm.catdata import CategoricalDataset, MixtureTruth, generate_from_mixture
from dpmpm.datasets import acs_sample1, acs_sample2
from dpmpm.engines import impute_nozeros, impute_zeros, synthesize, write_outputs
from dpmpm.errors import ConfigurationError, DataError

SMALL = dict(nrun=60, burn=30, thin=10, K=8, aalpha=0.25, balpha=0.25)


def test_nozeros_basic_and_deterministic():
    data, _ = acs_sample2(n=200, mcar=0.3)
    a = impute_nozeros(data, m=3, seed=211, **SMALL)
    b = impute_nozeros(data, m=3, seed=211, **SMALL)
    assert len(a.datasets) == 3 and len(a.trace) == 3
    for x, y in zip(a.datasets, b.datasets):
        assert x.equals(y)
        assert x.n_missing == 0
        obs = ~data.missing
        np.testing.assert_array_equal(x.codes[obs], data.codes[obs])
    c = impute_nozeros(data, m=3, seed=212, **SMALL)
    assert not all(x.equals(y) for x, y in zip(a.datasets, c.datasets))


def test_nozeros_fully_observed():
    data, _ = acs_sample2(n=100)
    out = impute_nozeros(data, m=2, seed=1, **SMALL)
    assert all(ds.equals(data) for ds in out.datasets)
    assert any("no missing" in w for w in out.warnings)


def test_zeros_invariant_and_trace():
    data, mcz, _ = acs_sample1(n=200, mcar=0.3)
    out = impute_zeros(data, mcz, 10**5, m=3, seed=653, **SMALL)
    for ds in out.datasets:
        assert not mcz.matches(ds.codes).any()
    assert len(out.trace.nmis_trace) == 3
    assert max(out.trace.nmis_trace) <= 10**5


def test_zeros_fully_observed_still_augments():
    data, mcz, _ = acs_sample1(n=200)
    out = impute_zeros(data, mcz, 10**5, m=2, seed=2, **SMALL)
    assert all(ds.equals(data) for ds in out.datasets)
    assert sum(out.trace.nmis_trace) > 0


def test_zeros_rejects_bad_input():
    data, mcz, _ = acs_sample1(n=50)
    codes = data.codes.copy()
    codes[0, 0] = data.schema.code("AGEP", "16")
    codes[0, 2] = data.schema.code("SCHL", "Doctorate degree")
    with pytest.raises(DataError):
        impute_zeros(data.with_codes(codes), mcz, 1000, m=2, seed=0, **SMALL)
    with pytest.raises(ConfigurationError):
        impute_zeros(data, mcz, 0, m=2, seed=0, **SMALL)


def test_synthesize_partial_and_empty():
    data, _ = acs_sample2(n=200)
    out = synthesize(data, vars=["MAR", "WKL"], m=2, seed=837, **SMALL)
    j = data.schema.index("SEX")
    for ds in out.datasets:
        np.testing.assert_array_equal(ds.codes[:, j], data.codes[:, j])
    none = synthesize(data, vars=[], m=2, seed=837, **SMALL)
    assert all(ds.equals(data) for ds in none.datasets)
    with pytest.raises(ConfigurationError):
        synthesize(data, vars=["BOGUS"], m=2, seed=1, **SMALL)
    with pytest.raises(DataError):
        synthesize(acs_sample2(n=50, mcar=0.1)[0], vars=None, m=2, seed=1, **SMALL)


def test_full_synthesis_marginals_match_single_class_truth():
    data, _ = acs_sample2(n=100)
    schema = data.schema
    pmfs = (np.array([0.5, 0.2, 0.1, 0.1, 0.1]), np.array([0.3, 0.7]), np.array([0.6, 0.3, 0.1]))
    truth = MixtureTruth(np.array([1.0]), (pmfs,))
    X = generate_from_mixture(truth, 4000, schema, 5)
    out = synthesize(X, nrun=40, burn=20, thin=10, K=5, aalpha=0.25, balpha=0.25,
                     m=2, vars=None, seed=9)
    for ds in out.datasets:
        for j, p in enumerate(pmfs):
            freq = np.bincount(X.codes[:, j], minlength=p.size) / X.n
            syn = np.bincount(ds.codes[:, j], minlength=p.size) / ds.n
            assert np.abs(syn - freq).max() < 4 * np.sqrt(0.25 / X.n) * np.sqrt(2) + 0.01


def test_write_outputs(tmp_path):
    data, _ = acs_sample2(n=100, mcar=0.2)
    out = impute_nozeros(data, m=2, seed=3, **SMALL)
    paths = write_outputs(out, str(tmp_path / "run" / "x"), "impute", {"seed": 3})
    names = sorted(p.split("/")[-1] for p in paths)
    assert names == ["x_imp1.csv", "x_imp2.csv", "x_report.json", "x_trace.csv"]
    report = json.loads((tmp_path / "run" / "x_report.json").read_text())
    assert report["dj"] == [5, 2, 3] and report["seed"] == 3
    assert report["selected_iterations"] == [40, 60]
    assert "runtime_seconds" not in report
    header = (tmp_path / "run" / "x_trace.csv").read_text().splitlines()[0]
    assert header == "iter,kstar,alpha,nmis"
