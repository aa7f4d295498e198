# # The same model, one cell at a time
#
# The agent engine draws every death, conversion and division. Averaging a
# seeded ensemble should recover the stock-flow curve, with visible spread.

# In[1]:

import numpy as np

from thymodyn import AbsConfig, SdConfig, preset_params, run_abs, run_sd

p = preset_params(2)
ensemble = run_abs(AbsConfig(seed=7, replicates=30), p, workers=4)
sd = run_sd(SdConfig(), p)
stats = ensemble.stats


# Mean and standard deviation of Np next to the deterministic value.

# In[2]:

for a in (1, 5, 20, 50, 100):
    i = int(np.searchsorted(stats.t, a))
    print(f"t={a:>3}  SD Np={sd.np[i]:9.1f}  ABS mean={stats.mean['np'][i]:9.1f} +/- {stats.sd['np'][i]:6.1f}")


# How far is the ensemble mean from the deterministic curve, in standard errors?

# In[3]:

mask = sd.window(1.0, 100.0)
for col in ("n", "np", "trec_pct"):
    ref = sd.trec_pct if col == "trec_pct" else getattr(sd, col)
    z = (stats.mean[col][mask] - ref[mask]) / stats.stderr(col)[mask]
    print(f"{col:>9}: mean z = {z.mean():+.2f}, max |z| = {np.abs(z).max():.2f}")


# Coarser agents (each worth 10 cells) keep the mean but inflate the noise.

# In[4]:

coarse = run_abs(AbsConfig(seed=7, replicates=30, scale=10.0), p, workers=4).stats
late = stats.t >= 5
print("median sd ratio Np (scale 10 / scale 1):",
      float(np.median(coarse.sd["np"][late] / stats.sd["np"][late])))
