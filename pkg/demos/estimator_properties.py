"""
Gradient estimates from function values
=======================================

Three ways to estimate a gradient without derivatives, and what each costs:

* Rademacher forward difference: 2 queries, reuses f(x) for free loss logging.
* Spherical central difference: 2 queries, f(x) not available.
* Full coordinate central difference: 2d queries, deterministic.
"""

import numpy as np

from zomgt.estimators import (
    EstimatorBounds,
    coordinate_full,
    rademacher_draws,
    rademacher_expectation,
    rademacher_forward,
    sphere_central,
)
from zomgt.problem import CubicSum, Quadratic
from zomgt.rng import stream

rng = np.random.default_rng(0)
d = 10
q, _ = np.linalg.qr(rng.standard_normal((d, d)))
A = (q * np.linspace(0.1, 1.0, d)) @ q.T
quad = Quadratic(A, rng.standard_normal(d))
x = rng.standard_normal(d)
grad = quad.gradient(x)


class Counter:
    def __init__(self, f):
        self.f, self.n = f, 0

    def __call__(self, z):
        self.n += 1
        return self.f(z)


# %%
# Single estimates: all three are noisy except the coordinate one, which is
# exact on a quadratic but pays 2d queries for it.
for name, call in [
    ("rademacher", lambda f: rademacher_forward(f, x, 0.01, stream(0, 0, 1))),
    ("sphere", lambda f: sphere_central(f, x, 0.01, stream(0, 0, 1))),
    ("coordinate", lambda f: coordinate_full(f, x, 0.01)),
]:
    f = Counter(quad.value)
    res = call(f)
    cos = res.g_hat @ grad / (np.linalg.norm(res.g_hat) * np.linalg.norm(grad))
    print(f"{name:>10}: {f.n:3d} queries, cosine to true gradient {cos:+.3f}")

# %%
# Averaging many Rademacher estimates recovers the gradient. On quadratics the
# estimator has no bias at all, so only sampling noise remains.
for m in (10, 1000, 100000):
    est = rademacher_draws(quad, x, 0.01, m, rng).mean(axis=0)
    print(f"m={m:>6}: |mean - grad| = {np.linalg.norm(est - grad):.4f}")
print("exact expectation by enumerating all 2^10 directions:",
      f"{np.linalg.norm(rademacher_expectation(quad.value, x, 0.01) - grad):.1e}")

# %%
# A cubic has bias. For sum(x^3) it is exactly mu^2 * sqrt(d), well inside
# the generic bound mu * L * d^1.5 / 2.
cubic = CubicSum(d)
xc = rng.uniform(-1, 1, d)
for mu in (1e-1, 1e-2, 1e-3):
    bias = np.linalg.norm(rademacher_expectation(cubic.value, xc, mu) - cubic.gradient(xc))
    bound = EstimatorBounds(mu, CubicSum.smoothness(np.abs(xc).max() + mu), d).delta_mu
    print(f"mu={mu:g}: bias {bias:.2e}  (mu^2 sqrt(d) = {mu * mu * np.sqrt(d):.2e}, bound {bound:.2e})")

# %%
# Second moment versus its cap. The cap grows like d, which is the price of
# using one random direction instead of d coordinates.
for dim in (5, 50):
    qd, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    f = Quadratic((qd * rng.uniform(0.1, 1, dim)) @ qd.T, rng.standard_normal(dim))
    z = rng.standard_normal(dim)
    g = f.gradient(z)
    sq = np.sum(rademacher_draws(f, z, 0.01, 100000, rng) ** 2, axis=1).mean()
    print(f"d={dim}: E|g_hat|^2 = {sq:.1f}, cap {EstimatorBounds(0.01, 1.0, dim).second_moment_cap(g):.1f}, "
          f"|grad|^2 = {g @ g:.2f}")
