# %% [markdown]
# # Handcrafted features of an IMU window
#
# A window is 200 samples (2 s at 100 Hz) of one IMU channel. Three transforms
# (detrend, Gaussian normalize, absolute value) each feed eight statistics,
# giving 24 numbers per window.

# %%
import numpy as np

from hcfnav.datagen import corrupt, generate_baselines, noise_grid
from hcfnav.features import FEATURE_NAMES, Window, extract_features

baselines = generate_baselines()
traj_id, imu, truth = baselines[1]
print(traj_id, imu.channels.shape)

# %%
# the same stretch of the z accelerometer at the lowest and highest noise level
lo, hi = noise_grid()[[0, -1]]
for q in (lo, hi):
    az = corrupt(imu, q, seed=1).f_b[:200, 2]
    f = extract_features(Window(az, "az"))
    print(f"q={q:.3f}", {k: round(float(v), 4) for k, v in zip(FEATURE_NAMES, f) if k.endswith("std")})

# %%
# with one seed the noise is the same draw scaled by sqrt(q), so std^2 / q is flat
qs = noise_grid()
stds = [extract_features(corrupt(imu, q, seed=2).f_b[:200, 0])[3] for q in qs]
print(np.round(np.array(stds) ** 2 / qs, 3))
