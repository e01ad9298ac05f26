"""Derivative-free gradient estimators with exact query accounting.

``f`` is always a plain scalar callable; every call to it is one query.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], float]


class NonFiniteObjectiveError(FloatingPointError):
    def __init__(self, value: float, point: np.ndarray):
        super().__init__(f"objective returned {value} at a point with norm {np.linalg.norm(point):.3e}")
        self.value = value
        self.point = point


@dataclass(frozen=True)
class EstimateResult:
    g_hat: np.ndarray
    queries: int
    f_at_x: float | None = None


def _query(f: Objective, x: np.ndarray) -> float:
    v = float(f(x))
    if not np.isfinite(v):
        raise NonFiniteObjectiveError(v, x)
    return v


def rademacher_sample(d: int, rng: np.random.Generator) -> np.ndarray:
    """Independent +/-1 coordinates, each with probability 1/2."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 2.0 * rng.integers(0, 2, size=d) - 1.0


def sphere_sample(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(d)
    return g / np.linalg.norm(g)


def rademacher_forward(f: Objective, x: np.ndarray, mu: float, rng: np.random.Generator) -> EstimateResult:
    """Two-point forward difference ``(f(x + mu u) - f(x)) / mu * u`` with Rademacher ``u``.

    ``f(x)`` is returned alongside the estimate so callers can log the loss
    without another query.
    """
    if mu <= 0:
        raise ValueError("smoothing radius must be positive")
    u = rademacher_sample(x.shape[0], rng)
    f_plus = _query(f, x + mu * u)
    f_x = _query(f, x)
    return EstimateResult((f_plus - f_x) / mu * u, 2, f_x)


def sphere_central(f: Objective, x: np.ndarray, mu: float, rng: np.random.Generator) -> EstimateResult:
    """Central difference along a uniform unit direction, scaled by ``d / (2 mu)``."""
    if mu <= 0:
        raise ValueError("smoothing radius must be positive")
    d = x.shape[0]
    u = sphere_sample(d, rng)
    diff = _query(f, x + mu * u) - _query(f, x - mu * u)
    return EstimateResult(d / (2.0 * mu) * diff * u, 2)


def coordinate_full(f: Objective, x: np.ndarray, mu: float) -> EstimateResult:
    """Central difference on every coordinate axis (``2d`` queries, no randomness)."""
    if mu <= 0:
        raise ValueError("smoothing radius must be positive")
    d = x.shape[0]
    g = np.empty(d)
    e = np.zeros(d)
    for j in range(d):
        e[j] = mu
        g[j] = (_query(f, x + e) - _query(f, x - e)) / (2.0 * mu)
        e[j] = 0.0
    return EstimateResult(g, 2 * d)


QUERIES_PER_CALL = {"rademacher_forward": 2, "sphere_central": 2}


@dataclass(frozen=True)
class EstimatorBounds:
    """Bias and moment caps of the Rademacher forward estimator for an L-smooth ``f``."""

    mu: float
    L: float
    d: int

    @property
    def delta_mu(self) -> float:
        return self.mu * self.L * self.d ** 1.5 / 2.0

    def second_moment_cap(self, grad: np.ndarray) -> float:
        return 2.0 * self.d * float(grad @ grad) + self.mu ** 2 * self.L ** 2 * self.d ** 3 / 2.0

    def sigma_zo_sq(self, zeta_sq: float) -> float:
        return 4.0 * self.d * zeta_sq + self.mu ** 2 * self.L ** 2 * self.d ** 3 / 2.0


def rademacher_expectation(f: Objective, x: np.ndarray, mu: float) -> np.ndarray:
    """Exact ``E_u[g_hat]`` by summing over all ``2^d`` sign vectors (small ``d`` only)."""
    d = x.shape[0]
    if d > 16:
        raise ValueError("enumeration is limited to d <= 16")
    fx = f(x)
    total = np.zeros(d)
    for signs in itertools.product((-1.0, 1.0), repeat=d):
        u = np.array(signs)
        total += (f(x + mu * u) - fx) / mu * u
    return total / 2 ** d


def _values(f, pts: np.ndarray) -> np.ndarray:
    batch = getattr(f, "values", None)
    if batch is not None:
        return np.asarray(batch(pts), dtype=float)
    fn = f.value if hasattr(f, "value") else f
    return np.array([fn(p) for p in pts])


def rademacher_draws(f, x: np.ndarray, mu: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent Rademacher forward estimates at ``x`` as an ``(m, d)`` array."""
    u = 2.0 * rng.integers(0, 2, size=(m, x.shape[0])) - 1.0
    fx = _values(f, x[None, :])[0]
    fp = _values(f, x + mu * u)
    return ((fp - fx) / mu)[:, None] * u


@dataclass(frozen=True)
class BiasReport:
    scheme: str
    d: int
    mu: float
    empirical_bias: float
    delta_mu: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.empirical_bias <= self.delta_mu + self.margin

    CSV_HEADER = "scheme,d,mu,empirical_bias,delta_mu,margin,pass"

    def csv_row(self) -> str:
        return (f"{self.scheme},{self.d},{self.mu!r},{self.empirical_bias!r},"
                f"{self.delta_mu!r},{self.margin!r},{str(self.passed).lower()}")


def check_bias_bound(f, grad: np.ndarray, L: float, x: np.ndarray, mu: float, m: int,
                     rng: np.random.Generator) -> BiasReport:
    """Compare the sample-mean estimate against ``delta_mu`` plus a 5-sigma margin.

    The margin is ``5 * sqrt(second_moment_cap / m)``, which bounds the
    Euclidean norm of the mean's fluctuation in the same units as the bias.
    """
    bounds = EstimatorBounds(mu, L, x.shape[0])
    est = rademacher_draws(f, x, mu, m, rng)
    bias = float(np.linalg.norm(est.mean(axis=0) - grad))
    margin = 5.0 * np.sqrt(bounds.second_moment_cap(grad) / m)
    return BiasReport("rademacher_forward", x.shape[0], mu, bias, bounds.delta_mu, float(margin))
