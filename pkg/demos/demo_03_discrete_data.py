"""
Discrete predictors and a binary outcome
=========================================

The test is picked from the column types: G^2 on contingency tables when
everything is categorical, and nested logistic models for a binary target
with continuous predictors.
"""

# %%
import numpy as np

from equivsig import Dataset, Target, categorical, ses

rng = np.random.default_rng(7)
n = 3000

# %%
# A categorical chain: W drives X, X drives the outcome. A relabelled copy
# of X carries exactly the same information, and an unrelated column
# completes the table.
w = rng.integers(0, 3, n)
x = np.where(rng.random(n) < 0.8, w, rng.integers(0, 3, n))
x_copy = (x + 1) % 3
noise = rng.integers(0, 3, n)
y = np.where(rng.random(n) < 0.85, x, rng.integers(0, 3, n))
table = Dataset(np.column_stack([w, x, x_copy, noise]).astype(float), ["W", "X", "Xcopy", "noise"],
                [categorical(3)] * 4)
out = ses(table, Target.categorical(y, 3), threshold=0.05, max_k=2)
print(out.test, [table.names[v] for v in out.selected_vars],
      [[table.names[m] for m in q] for q in out.queues])

# %%
# Binary outcome, continuous predictors: the logistic likelihood-ratio test.
z = rng.normal(size=(500, 5))
z[:, 4] = z[:, 1]
p = 1 / (1 + np.exp(-(1.5 * z[:, 0] - z[:, 1])))
label = (rng.random(500) < p).astype(float)
out = ses(Dataset(z), Target.binary(label), threshold=0.05, max_k=2)
print(out.test, out.selected_vars, out.queues)
