import io

import numpy as np
import pytest
from scipy import stats

from dpmpm.catdata import MISSING, CategoricalDataset, Schema
from dpmpm.errors import ConfigurationError, ContractViolation
from dpmpm.sampler import (
    HyperParams,
    alpha_conditional,
    candidate_count,
    gibbs_step,
    impute_missing_cells,
    init_state,
    run,
    sample_alpha,
    sample_theta,
    sample_V_and_pi,
    sample_z,
    selected_candidates,
    stick_breaking,
)

from conftest import M, dataset, make_state

ONE = Schema.from_levels([("A", ["0", "1"])])
THREE = Schema.from_levels([("A", ["0", "1", "2"])])


@pytest.mark.parametrize("V, pi", [
    ([1.0], [1.0]),
    ([0.5, 0.5, 1.0], [0.5, 0.25, 0.25]),
    ([0.2, 0.4, 1.0], [0.2, 0.32, 0.48]),
])
def test_stick_breaking(V, pi):
    np.testing.assert_allclose(stick_breaking(V), pi, atol=1e-15)


def test_stick_breaking_needs_unit_last():
    with pytest.raises(ContractViolation):
        stick_breaking([0.5, 0.5])


def test_init_state_single_class(binary_schema):
    ds = dataset(binary_schema, [[0, 1], [1, M]])
    for seed in range(3):
        s = init_state(ds, HyperParams(K=1), seed)
        assert (s.z == 0).all()
        s.check(ds)


def test_sample_z_two_class_enumeration():
    n = 40000
    ds = dataset(ONE, np.zeros((n, 1)))
    s = make_state([[[0.9, 0.1], [0.2, 0.8]]], [0.5, 0.5], np.zeros(n), ds.codes, seed=5)
    z = sample_z(s, ds)
    p = 9 / 11
    assert abs((z == 0).mean() - p) < 5 * np.sqrt(p * (1 - p) / n)


def test_sample_z_all_missing_uses_pi():
    n = 40000
    ds = dataset(ONE, np.full((n, 1), M))
    s = make_state([[[0.9, 0.1], [0.2, 0.8]]], [0.3, 0.7], np.zeros(n), np.zeros((n, 1)), seed=6)
    z = sample_z(s, ds)
    assert abs((z == 0).mean() - 0.3) < 5 * np.sqrt(0.21 / n)


def test_sample_z_degenerate_weights():
    ds = dataset(ONE, [[0], [1], [1]])
    s = make_state([[[0.5, 0.5]] * 3], [1.0, 0.0, 0.0], [2, 2, 2], ds.codes)
    assert (sample_z(s, ds) == 0).all()


def test_sample_theta_dirichlet_3_2():
    ds = dataset(ONE, [[0], [0], [1]])
    s = make_state([[[0.5, 0.5], [0.5, 0.5]]], [0.5, 0.5], [0, 0, 0], ds.codes, seed=7)
    draws = np.array([sample_theta(s, ds)[0][0, 0] for _ in range(4000)])
    assert stats.kstest(draws, stats.beta(3, 2).cdf).pvalue > 0.01


def test_sample_theta_empty_class_is_prior():
    ds = dataset(THREE, [[0], [2]])
    s = make_state([np.full((2, 3), 1 / 3)], [0.5, 0.5], [0, 0], ds.codes, seed=8)
    draws = np.array([sample_theta(s, ds)[0][1] for _ in range(3000)])
    np.testing.assert_allclose(draws.mean(axis=0), [1 / 3] * 3, atol=0.03)
    assert stats.kstest(draws[:, 0], stats.beta(1, 2).cdf).pvalue > 0.01


def test_sample_theta_posterior_mean():
    ds = dataset(THREE, [[0], [0], [1], [2], [2], [2]])
    s = make_state([np.full((1, 3), 1 / 3)], [1.0], np.zeros(6), ds.codes, seed=9)
    s.a = [np.array([0.5, 1.0, 2.0])]
    draws = np.array([sample_theta(s, ds)[0][0] for _ in range(5000)])
    target = np.array([2.5, 2.0, 5.0]) / 9.5
    np.testing.assert_allclose(draws.mean(axis=0), target, atol=0.01)


def test_sample_V_beta_4_3():
    ds = dataset(ONE, [[0]] * 4)
    s = make_state([[[0.5, 0.5]] * 2], [0.5, 0.5], [0, 0, 0, 1], ds.codes, alpha=2.0, seed=10)
    draws = []
    for _ in range(4000):
        V, pi = sample_V_and_pi(s)
        assert V[1] == 1.0
        draws.append(V[0])
    assert stats.kstest(draws, stats.beta(4, 3).cdf).pvalue > 0.01


def test_sample_V_single_class():
    ds = dataset(ONE, [[0]])
    s = make_state([[[0.5, 0.5]]], [1.0], [0], ds.codes)
    V, pi = sample_V_and_pi(s)
    assert V.tolist() == [1.0] and pi.tolist() == [1.0]


def test_alpha_conditional_hand_value():
    shape, rate = alpha_conditional(np.array([0.5, 0.5, 1.0]), 0.25, 0.25)
    assert shape == 2.25
    assert rate == pytest.approx(0.25 + 2 * np.log(2), abs=1e-14)
    assert shape / rate == pytest.approx(1.375058, abs=1e-6)


def test_alpha_prior_when_K_is_one():
    assert alpha_conditional(np.ones(1), 0.25, 0.5) == (0.25, 0.5)


def test_alpha_mean_increases_as_sticks_shrink():
    means = [np.divide(*alpha_conditional(np.array([v, v, 1.0]), 0.25, 0.25))
             for v in (0.9, 0.5, 0.1, 1e-6)]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_sample_alpha_fixed_mode():
    ds = dataset(ONE, [[0]])
    s = make_state([[[0.5, 0.5]] * 2], [0.5, 0.5], [0], ds.codes)
    assert sample_alpha(s, HyperParams(K=2, fixed_alpha=3.0)) == 3.0


def test_impute_point_mass_and_noop():
    ds = dataset(THREE, [[M], [1]])
    s = make_state([[[0, 0, 1.0]]], [1.0], [0, 0], [[0], [1]])
    impute_missing_cells(s, ds)
    assert s.completed.tolist() == [[2], [1]]
    full = dataset(THREE, [[0], [1]])
    s2 = make_state([[[0, 0, 1.0]]], [1.0], [0, 0], full.codes)
    assert impute_missing_cells(s2, full).tolist() == [[0], [1]]


def test_gibbs_step_keeps_invariants(binary_schema):
    rng = np.random.default_rng(1)
    codes = rng.integers(0, 2, (60, 2))
    codes[rng.random(codes.shape) < 0.3] = M
    ds = CategoricalDataset(binary_schema, codes)
    hp = HyperParams(K=5)
    s = init_state(ds, hp, 3)
    for _ in range(50):
        gibbs_step(s, ds, hp)
        s.check(ds)
        assert (s.completed != MISSING).all()


def test_candidates_and_selection():
    assert candidate_count(10000, 5000, 50) == 100
    assert selected_candidates(10000, 5000, 50, 10) == list(range(10, 101, 10))
    assert candidate_count(7, 2, 1) == 5
    with pytest.raises(ConfigurationError):
        selected_candidates(100, 90, 5, 10)
    with pytest.raises(ConfigurationError):
        selected_candidates(100, 100, 5, 1)


def test_run_trace_and_progress(binary_schema):
    ds = dataset(binary_schema, [[0, 1], [1, M], [M, 0], [1, 1]])
    hp = HyperParams(K=3)
    buf = io.StringIO()
    out = run(init_state(ds, hp, 0), ds, hp, 7, 2, 1, 2, silent=False, stream=buf)
    assert out.trace.kept == [3, 4, 5, 6, 7]
    assert len(out.datasets) == 2
    lines = buf.getvalue().splitlines()
    assert lines[0] == "Initializing..."
    assert lines[2].startswith("iter = 0  kstar = ")
    assert len(lines) == 3 + 7


def test_run_is_deterministic(binary_schema):
    ds = dataset(binary_schema, [[0, 1], [1, M], [M, 0], [1, 1]] * 5)
    hp = HyperParams(K=4)
    a = run(init_state(ds, hp, 42), ds, hp, 60, 30, 5, 3)
    b = run(init_state(ds, hp, 42), ds, hp, 60, 30, 5, 3)
    assert a.trace.to_csv() == b.trace.to_csv()
    for x, y in zip(a.datasets, b.datasets):
        assert x.equals(y)


def test_core_sweep_matches_exact_posterior(binary_schema):
    from dpmpm.oracle import completions, exact_completion_posterior, total_variation
    ds = dataset(binary_schema, [[0, 0], [0, M], [1, 1], [M, 1], [1, 0], [M, M]])
    fills, probs = exact_completion_posterior(ds, K=2, alpha=1.0)
    index = {tuple(f): i for i, f in enumerate(fills.tolist())}
    cells, _ = completions(ds)
    hp = HyperParams(K=2, fixed_alpha=1.0)
    s = init_state(ds, hp, 8)
    counts = np.zeros(len(fills))
    for t in range(31000):
        gibbs_step(s, ds, hp)
        if t >= 1000:
            counts[index[tuple(s.completed[cells[:, 0], cells[:, 1]].tolist())]] += 1
    assert total_variation(counts / counts.sum(), probs) < 0.02
