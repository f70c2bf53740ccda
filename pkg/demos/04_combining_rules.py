"""The three combining rules on a hand-checkable example.

Three datasets give estimates q = 1, 2, 3 with within-dataset variance 0.5,
so qbar = 2, b = 1, ubar = 0.5.
"""

# %%
from dpmpm.pooling import PerDatasetEstimate, combine, t_quantile

est = [PerDatasetEstimate("theta", q, 0.5) for q in (1.0, 2.0, 3.0)]

# %%
for method in ("imputation", "synthesis_partial", "synthesis_full"):
    r = combine(est, method)
    print(f"{method:18s} T = {r.std_error ** 2:.4f}  df = {r.df:.5f}  "
          f"95% CI = ({r.ci_lower:.3f}, {r.ci_upper:.3f})")

# %% [markdown]
# imputation:        T = (1 + 1/3) 1 + 0.5 = 1.8333, df = 2 (1 + 0.375)^2 = 3.78125
# synthesis_partial: T = 1/3 + 0.5 = 0.8333,         df = 2 (1 + 1.5)^2 = 12.5
# synthesis_full:    T = (1 + 1/3) 1 - 0.5 = 0.8333, df = 2 (1 - 0.375)^2 = 0.78125

# %%
print("t quantiles:", [round(t_quantile(0.975, df), 6) for df in (1, 10, float("inf"))])

# %% [markdown]
# When the estimates agree exactly the between variance is zero; the
# degrees of freedom are then capped and the interval is a normal one.

# %%
print(combine([PerDatasetEstimate("theta", 2.0, 0.25)] * 4, "imputation"))
