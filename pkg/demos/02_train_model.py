# %% [markdown]
# # Training the noise-variance ensemble
#
# Four baseline trajectories, 15 noise variances and six channels give 72,000
# labelled windows. Thirty bagged regression trees map the 24 features of a
# window to its noise variance. Training takes about a minute on one core.

# %%
import time

import numpy as np

from hcfnav.datagen import build_dataset
from hcfnav.trees import evaluate_mse, fit_ensemble

train, test = build_dataset(seed=0)
print(len(train), len(test))

# %%
t0 = time.perf_counter()
ens = fit_ensemble(train.features, train.label, n_trees=30, min_leaf=8, seed=0)
print(f"fit in {time.perf_counter() - t0:.0f} s, {sum(t.n_nodes for t in ens.trees)} nodes")

# %%
mse = evaluate_mse(ens, test.features, test.label)
mean_mse = np.mean((test.label - train.label.mean()) ** 2)
print(f"test MSE {mse:.2e}, mean predictor {mean_mse:.2e} ({100 * mse / mean_mse:.1f}%)")

# relative error per noise level
pred = ens.predict(test.features)
for q in np.unique(test.label):
    m = test.label == q
    print(f"q={q:.4f}  median rel. error {np.median(np.abs(pred[m] - q) / q):.3f}")

# %%
ens.save("model.json")
