"""
Communication graphs and mixing matrices
========================================

Agents only talk to graph neighbours. This script samples connected
Erdos-Renyi graphs, turns them into Metropolis mixing matrices and looks at
how fast repeated mixing drives a set of vectors to their average.
"""

import numpy as np

from zomgt.topology import (
    complete_graph,
    generate_erdos_renyi,
    metropolis_weights,
    path_graph,
    spectral_gap,
    validate_mixing,
)

# %%
# One graph with 20 agents and edge probability 0.3. Disconnected draws are
# rejected and resampled; ``attempts`` says how many draws that took.
g = generate_erdos_renyi(20, 0.3, seed=225)
w = metropolis_weights(g)
print(f"{len(g.edges)} edges after {g.attempts} draw(s); degrees {g.degrees.min()}..{g.degrees.max()}")
print(f"rho = ||W - J||_2 = {w.rho:.4f}")
print(validate_mixing(w))

# %%
# rho governs the contraction of disagreement: each mixing step shrinks the
# deviation from the average by at most a factor rho.
rng = np.random.default_rng(0)
x = rng.standard_normal((20, 5))
dev0 = np.linalg.norm(x - x.mean(axis=0))
for k in range(1, 31):
    x = w.w @ x
    if k % 10 == 0:
        dev = np.linalg.norm(x - x.mean(axis=0))
        print(f"after {k:2d} rounds: deviation ratio {dev / dev0:.2e}   rho^k {w.rho ** k:.2e}")

# %%
# Sparser graphs mix slower. The path is the slow extreme, the complete graph
# reaches the average in a single round.
for name, graph in [("path(20)", path_graph(20)), ("ER(20, 0.15)", generate_erdos_renyi(20, 0.15, 1)),
                    ("ER(20, 0.3)", g), ("ER(20, 0.6)", generate_erdos_renyi(20, 0.6, 1)),
                    ("complete(20)", complete_graph(20))]:
    print(f"{name:>14}: rho = {metropolis_weights(graph).rho:.4f}")

# %%
# Across seeds rho varies quite a bit even at fixed (n, p).
rhos = np.array([metropolis_weights(generate_erdos_renyi(20, 0.3, s)).rho for s in range(200)])
print(f"ER(20, 0.3) over 200 seeds: rho in [{rhos.min():.3f}, {rhos.max():.3f}], median {np.median(rhos):.3f}")

# %%
# Power iteration (used for large networks) agrees with the dense solver.
big = metropolis_weights(generate_erdos_renyi(300, 0.03, 7))
print(f"n=300: dense {spectral_gap(big, 'dense'):.10f}  power {spectral_gap(big, 'power'):.10f}")
