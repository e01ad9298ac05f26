"""
How the momentum factor sets the consensus floor
================================================

With a constant step size, the tracking variables keep absorbing fresh
estimator noise, so agents never agree exactly. Momentum averages that noise
before it enters the tracker; the residual disagreement shrinks roughly like
(1 - beta)^2. This script sweeps beta on the default a9a setup and fits the
log-log slope.
"""

import numpy as np

from zomgt.harness import build_problem, build_topology, parse_config, sweep_beta

cfg = parse_config("")
problem, w = build_problem(cfg), build_topology(cfg)

# %%
# Five runs of 1000 iterations each, same seed, shards and graph.
sw = sweep_beta(cfg, betas=[0.0, 0.5, 0.8, 0.9, 0.98], problem=problem, w=w)

print(" beta   1-beta   floor")
for b in sw.betas:
    print(f"{b:5.2f}   {1 - b:6.2f}   {sw.floors[b]:.3e}")

# %%
# beta = 0 is plain tracking; the fit that matters uses the momentum regime.
print(f"\nslope over beta >= 0.5: {sw.slope:.2f}")
print(f"slope over all betas:   {sw.slope_all:.2f}")
print("floors strictly decreasing:", sw.monotone)

# %%
# A quick check of the fit: predicted floor at beta = 0.95 from the power law.
lx = np.log([1 - b for b in sw.betas if b >= 0.5])
ly = np.log([sw.floors[b] for b in sw.betas if b >= 0.5])
intercept = ly.mean() - sw.slope * lx.mean()
print(f"power-law prediction at beta = 0.95: {np.exp(intercept) * 0.05 ** sw.slope:.2e}")
