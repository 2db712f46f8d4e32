# %% [markdown]
# # Comparing process-noise strategies
#
# Each strategy runs the same INS/DVL error-state filter on identical noisy
# streams along the held-out lawnmower trajectory (330 s, DVL at 1 Hz).
# Needs `model.json` from 02_train_model.py.

# %%
import numpy as np

from hcfnav.harness import RunConfig, default_strategies, monte_carlo, run_filter
from hcfnav.qstrategy import Learned
from hcfnav.trees import TreeEnsemble

ens = TreeEnsemble.load("model.json")
cfg = RunConfig(runs=5, seed=0)

# %%
# one run, learned strategy: the Q trace after the first full window
run = cfg.make_run(np.random.SeedSequence(0))
m = run_filter(cfg, run, Learned(ens))
print(f"srmse {m.srmse:.4f} m/s, q trace {m.q_trace[5:10]}")

# %%
report = monte_carlo(cfg, default_strategies(ens))
print(report.to_text())
