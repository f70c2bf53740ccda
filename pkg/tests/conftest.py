import numpy as np
import pytest

from dpmpm.catdata import MISSING, CategoricalDataset, Schema
from dpmpm.sampler import DpmpmState, stick_breaking


@pytest.fixture
def binary_schema():
    return Schema.from_levels([("A", ["0", "1"]), ("B", ["0", "1"])])


def make_state(theta, pi, z, completed, alpha=1.0, seed=0):
    """Hand-built sampler state; ``pi`` is converted to stick fractions."""
    pi = np.asarray(pi, float)
    rem = np.concatenate(([1.0], 1.0 - np.cumsum(pi)[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        V = np.where(rem > 0, pi / rem, 1.0)
    V[-1] = 1.0
    theta = [np.asarray(t, float) for t in theta]
    return DpmpmState(z=np.asarray(z, np.int64), V=V, pi=stick_breaking(V), alpha=alpha,
                      theta=theta, completed=np.asarray(completed, np.int64),
                      rng=np.random.default_rng(seed), a=[np.ones(t.shape[1]) for t in theta])


def dataset(schema, rows):
    return CategoricalDataset(schema, np.asarray(rows, np.int64).reshape(-1, schema.p))


M = MISSING
