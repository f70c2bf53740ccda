import ast
from pathlib import Path

import numpy as np
import pytest

import dpmpm.oracle as oracle
from dpmpm.catdata import DisallowedPatternSet, MixtureTruth, Schema
from dpmpm.errors import OracleRefusal
from dpmpm.oracle import exact_completion_posterior, exact_joint, total_variation

from conftest import M, dataset

ONE = Schema.from_levels([("A", ["0", "1"])])


def two_class_truth():
    c1 = (np.array([0.9, 0.1]), np.array([0.9, 0.1]))
    c2 = (np.array([0.1, 0.9]), np.array([0.1, 0.9]))
    return MixtureTruth(np.array([0.5, 0.5]), (c1, c2))


def test_exact_joint_hand_value(binary_schema):
    joint = exact_joint(two_class_truth())
    assert joint[0, 0] == pytest.approx(0.41, abs=1e-15)
    assert joint.sum() == pytest.approx(1.0, abs=1e-12)
    mcz = DisallowedPatternSet(binary_schema, np.array([[0, 0]]))
    trunc = exact_joint(two_class_truth(), mcz)
    assert trunc[0, 0] == 0.0
    np.testing.assert_allclose(trunc[1, 1], joint[1, 1] / 0.59, rtol=1e-13)
    assert trunc.sum() == pytest.approx(1.0, abs=1e-12)


def test_exact_joint_single_class():
    a, b = np.array([0.2, 0.8]), np.array([0.3, 0.3, 0.4])
    joint = exact_joint(MixtureTruth(np.array([1.0]), ((a, b),)))
    np.testing.assert_allclose(joint, np.outer(a, b), atol=1e-15)


def test_total_variation():
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == 0.5


def test_no_missing_is_point_mass(binary_schema):
    ds = dataset(binary_schema, [[0, 1], [1, 1]])
    fills, probs = exact_completion_posterior(ds, K=2, alpha=1.0)
    assert fills.shape == (1, 0) and probs.tolist() == [1.0]


def test_symmetric_single_missing_cell():
    ds = dataset(ONE, [[0], [1], [M]])
    for method in ("analytic", "grid"):
        _, probs = exact_completion_posterior(ds, K=2, alpha=1.0, method=method)
        np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-12)


def test_grid_agrees_with_analytic(binary_schema):
    ds = dataset(binary_schema, [[0, 0], [0, M], [1, 1], [M, 1], [1, 0]])
    _, pa = exact_completion_posterior(ds, K=2, alpha=1.0, method="analytic")
    _, pg = exact_completion_posterior(ds, K=2, alpha=1.0, method="grid", grid=20)
    assert np.abs(pa - pg).max() < 1e-10


@pytest.mark.slow
def test_grid_refinement_truncated(binary_schema):
    ds = dataset(binary_schema, [[0, 0], [0, M], [1, 0], [M, 1], [0, 1], [M, M]])
    mcz = DisallowedPatternSet(binary_schema, np.array([[1, 1]]))
    fills, p20 = exact_completion_posterior(ds, K=2, alpha=1.0, mcz=mcz, grid=20)
    _, p40 = exact_completion_posterior(ds, K=2, alpha=1.0, mcz=mcz, grid=40)
    assert np.abs(p20 - p40).max() < 1e-3


def test_truncated_excludes_disallowed(binary_schema):
    ds = dataset(binary_schema, [[0, 0], [1, M], [M, 1]])
    mcz = DisallowedPatternSet(binary_schema, np.array([[1, 1]]))
    fills, probs = exact_completion_posterior(ds, K=2, alpha=1.0, mcz=mcz, grid=12)
    # cells: (1,1) missing B -> B=1 forbidden; (2,0) missing A -> A=1 forbidden
    assert probs[(fills[:, 0] == 1) | (fills[:, 1] == 1)].sum() == 0.0
    assert probs.sum() == pytest.approx(1.0)


def test_refuses_large_instances(binary_schema):
    with pytest.raises(OracleRefusal):
        exact_completion_posterior(dataset(binary_schema, [[0, 0]] * 9), K=2, alpha=1.0)
    with pytest.raises(OracleRefusal):
        exact_completion_posterior(dataset(binary_schema, [[0, 0]]), K=3, alpha=1.0)


def test_oracle_is_independent_of_sampler():
    tree = ast.parse(Path(oracle.__file__).read_text())
    mods = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom)}
    mods |= {a.name for n in ast.walk(tree) if isinstance(n, ast.Import) for a in n.names}
    assert not {m for m in mods if m and ("sampler" in m or "truncation" in m or "engines" in m)}
