"""Checking the sampler against brute-force answers on a toy problem.

Two binary variables, six records with four missing cells, and the cell
(A=1, B=1) declared impossible.  The oracle integrates the model exactly
(on a quadrature grid) over every completion; the truncated Gibbs sampler
should visit completions in the same proportions.
"""

# %%
import numpy as np

from dpmpm.catdata import MISSING as M, CategoricalDataset, DisallowedPatternSet, Schema
from dpmpm.oracle import completions, exact_completion_posterior, total_variation
from dpmpm.sampler import HyperParams, init_state
from dpmpm.truncation import gibbs_step_truncated, impute_missing_truncated

schema = Schema.from_levels([("A", ["0", "1"]), ("B", ["0", "1"])])
X = CategoricalDataset(schema, np.array([[0, 0], [0, M], [1, 0], [M, 1], [0, 1], [M, M]]))
mcz = DisallowedPatternSet(schema, np.array([[1, 1]]))

# %%
fills, probs = exact_completion_posterior(X, K=2, alpha=1.0, mcz=mcz, grid=20)
for f, p in zip(fills, probs):
    if p > 0:
        print(f, round(p, 4))

# %% [markdown]
# Same model in the sampler: K = 2 and alpha pinned at 1 to match the oracle.

# %%
hp = HyperParams(K=2, fixed_alpha=1.0)
state = init_state(X, hp, 0)
impute_missing_truncated(state, X, mcz)
cells, _ = completions(X)
index = {tuple(f): i for i, f in enumerate(fills.tolist())}
counts = np.zeros(len(fills))
for t in range(21000):
    gibbs_step_truncated(state, X, mcz, hp, 10**5)
    if t >= 1000:
        counts[index[tuple(state.completed[cells[:, 0], cells[:, 1]].tolist())]] += 1
print("total variation distance:", round(total_variation(counts / counts.sum(), probs), 4))
