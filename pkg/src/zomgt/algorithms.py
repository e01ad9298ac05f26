"""Decentralized zeroth-order methods as synchronous network state machines.

* ``zomgt``: momentum gradient tracking with the Rademacher forward estimator.
* ``zogt``: the same tracking recursion without momentum.
* ``tang1``: decentralized gradient descent with the spherical central estimator.
* ``tang2``: gradient tracking with the full coordinate estimator.

Each step reads only iteration ``k-1`` values from neighbours; the matrix
products ``W @ X`` and ``W @ Y`` are taken on the frozen previous arrays
before any agent writes its new state.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from . import rng as rngmod
from .estimators import (
    EstimateResult,
    NonFiniteObjectiveError,
    coordinate_full,
    rademacher_forward,
    sphere_central,
)
from .metrics import MetricsRow, metrics_row
from .problem import Problem, local_loss
from .topology import MixingMatrix

ALGORITHMS = ("zomgt", "zogt", "tang1", "tang2")


class DivergenceError(FloatingPointError):
    """A non-finite value appeared in the network state."""

    def __init__(self, algorithm: str, agent: int, iteration: int, vector: np.ndarray | None, what: str):
        super().__init__(f"{algorithm}: non-finite {what} at agent {agent}, iteration {iteration}")
        self.algorithm = algorithm
        self.agent = agent
        self.iteration = iteration
        self.vector = vector


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HyperParams:
    eta: float = 0.05
    beta: float = 0.9
    mu: float = 0.01
    T: int = 1000

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if int(self.T) != self.T or self.T < 0:
            raise ValueError(f"T must be a non-negative integer, got {self.T}")

    def step_size_advice(self, L: float) -> list[str]:
        """Compare eta against ``min(1/(2L), (1-beta)/(sqrt(8) beta L))``; advisory only."""
        limit = 1.0 / (2.0 * L)
        if self.beta > 0:
            limit = min(limit, (1.0 - self.beta) / (math.sqrt(8.0) * self.beta * L))
        if self.eta > limit:
            return [f"eta={self.eta} exceeds the conservative bound {limit:.4g} for L~{L:.4g}"]
        return []


@dataclass(frozen=True)
class AgentState:
    x: np.ndarray
    m: np.ndarray | None
    y: np.ndarray | None
    m_prev: np.ndarray | None
    g_prev: np.ndarray | None
    stream_key: tuple


@dataclass
class NetworkState:
    """All agent vectors stacked row-wise, shape ``(N, d)``.

    ``m`` holds the momentum (or, for the momentum-free trackers, the last
    raw estimate). ``m_prev`` is the momentum one iteration earlier and
    ``g_prev`` the previous raw estimate.
    """

    algorithm: str
    x: np.ndarray
    m: np.ndarray | None
    y: np.ndarray | None
    m_prev: np.ndarray | None
    g_prev: np.ndarray | None
    k: int
    queries_total: int
    seed: int
    loss: float | None = None
    shared_stream: bool = False

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    def stream_key(self, agent: int, iteration: int) -> tuple:
        return (self.seed, rngmod.SHARED_AGENT if self.shared_stream else agent, iteration)

    def agent(self, i: int) -> AgentState:
        pick = lambda a: None if a is None else a[i]
        return AgentState(self.x[i], pick(self.m), pick(self.y), pick(self.m_prev), pick(self.g_prev),
                          self.stream_key(i, self.k))


def _oracles(problem: Problem) -> list[Callable[[np.ndarray], float]]:
    return [partial(local_loss, problem, i) for i in range(problem.n_agents)]


def _map_agents(fn, n: int, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def _estimate_all(algorithm: str, scheme: str, problem: Problem, points: np.ndarray, mu: float,
                  keys: list[tuple], iteration: int, workers: int) -> list[EstimateResult]:
    oracles = _oracles(problem)

    def one(i: int) -> EstimateResult:
        try:
            if scheme == "rademacher":
                return rademacher_forward(oracles[i], points[i], mu, rngmod.stream(*keys[i]))
            if scheme == "sphere":
                return sphere_central(oracles[i], points[i], mu, rngmod.stream(*keys[i]))
            return coordinate_full(oracles[i], points[i], mu)
        except NonFiniteObjectiveError as exc:
            raise DivergenceError(algorithm, i, iteration, exc.point, "objective value") from exc

    return _map_agents(one, problem.n_agents, workers)


def _check_finite(algorithm: str, k: int, **arrays) -> None:
    for what, a in arrays.items():
        if a is None:
            continue
        bad = ~np.all(np.isfinite(a), axis=1)
        if bad.any():
            i = int(np.argmax(bad))
            raise DivergenceError(algorithm, i, k, a[i].copy(), what)


def initial_points(problem: Problem, seed: int, policy: str = "zeros") -> np.ndarray:
    n, d = problem.n_agents, problem.d
    if policy == "zeros":
        return np.zeros((n, d))
    if policy == "gaussian":
        return np.stack([0.1 * rngmod.stream(seed, i, 0, tag=1).standard_normal(d) for i in range(n)])
    raise ValueError(f"unknown x0 policy {policy!r}")


def _monitor_loss(problem: Problem, x: np.ndarray, workers: int) -> float:
    oracles = _oracles(problem)
    return float(np.mean(_map_agents(lambda i: oracles[i](x[i]), problem.n_agents, workers)))


def init(algorithm: str, problem: Problem, w: MixingMatrix | np.ndarray, hp: HyperParams, seed: int,
         x0: str | np.ndarray = "zeros", monitor: bool = True, shared_stream: bool = False,
         workers: int = 1) -> NetworkState:
    """Iteration-0 state: ``x_0`` plus, for trackers, ``m_0 = y_0 = g_0``."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    wm = np.asarray(getattr(w, "w", w))
    if wm.shape != (problem.n_agents, problem.n_agents):
        raise ValueError(f"mixing matrix is {wm.shape}, problem has {problem.n_agents} agents")
    x = np.array(x0, dtype=float) if isinstance(x0, np.ndarray) else initial_points(problem, seed, x0)
    if x.shape != (problem.n_agents, problem.d):
        raise ValueError(f"x0 must have shape {(problem.n_agents, problem.d)}, got {x.shape}")

    state = NetworkState(algorithm, x, None, None, None, None, 0, 0, seed, None, shared_stream)
    keys = [state.stream_key(i, 0) for i in range(problem.n_agents)]
    if algorithm == "tang1":
        if monitor:
            state.loss = _monitor_loss(problem, x, workers)
            state.queries_total += problem.n_agents
        return state

    scheme = "coordinate" if algorithm == "tang2" else "rademacher"
    res = _estimate_all(algorithm, scheme, problem, x, hp.mu, keys, 0, workers)
    g = np.stack([r.g_hat for r in res])
    _check_finite(algorithm, 0, estimate=g)
    state.m = g
    state.y = g.copy()
    state.m_prev = g.copy()
    state.g_prev = g.copy()
    state.queries_total = sum(r.queries for r in res)
    if scheme == "rademacher":
        state.loss = float(np.mean([r.f_at_x for r in res]))
    return state


def zomgt_step(state: NetworkState, w, hp: HyperParams, problem: Problem, workers: int = 1) -> NetworkState:
    """One synchronous round: mix-and-descend, estimate, momentum, track."""
    wm = np.asarray(getattr(w, "w", w))
    k = state.k + 1
    x = wm @ state.x - hp.eta * state.y
    keys = [state.stream_key(i, k) for i in range(state.n_agents)]
    res = _estimate_all(state.algorithm, "rademacher", problem, x, hp.mu, keys, k, workers)
    g = np.stack([r.g_hat for r in res])
    if state.algorithm == "zogt":
        m = g
    else:
        m = hp.beta * state.m + (1.0 - hp.beta) * g
    y = wm @ state.y + (m - state.m)
    _check_finite(state.algorithm, k, x=x, estimate=g, m=m, y=y)
    return replace(state, x=x, m=m, y=y, m_prev=state.m, g_prev=g, k=k,
                   queries_total=state.queries_total + sum(r.queries for r in res),
                   loss=float(np.mean([r.f_at_x for r in res])))


def zogt_step(state: NetworkState, w, hp: HyperParams, problem: Problem, workers: int = 1) -> NetworkState:
    if state.algorithm != "zogt":
        state = replace(state, algorithm="zogt")
    return zomgt_step(state, w, hp, problem, workers)


def tang1_step(state: NetworkState, w, hp: HyperParams, problem: Problem, workers: int = 1,
               monitor: bool = True) -> NetworkState:
    """``x_i <- sum_j w_ij x_j - eta g_i`` with ``g_i`` estimated at the pre-mix point."""
    wm = np.asarray(getattr(w, "w", w))
    k = state.k + 1
    keys = [state.stream_key(i, k) for i in range(state.n_agents)]
    res = _estimate_all(state.algorithm, "sphere", problem, state.x, hp.mu, keys, k, workers)
    g = np.stack([r.g_hat for r in res])
    x = wm @ state.x - hp.eta * g
    _check_finite(state.algorithm, k, x=x, estimate=g)
    queries = state.queries_total + sum(r.queries for r in res)
    loss = None
    if monitor:
        loss = _monitor_loss(problem, x, workers)
        queries += state.n_agents
    return replace(state, x=x, g_prev=g, k=k, queries_total=queries, loss=loss)


def tang2_step(state: NetworkState, w, hp: HyperParams, problem: Problem, workers: int = 1) -> NetworkState:
    """Gradient tracking driven by the ``2d``-query coordinate estimator."""
    wm = np.asarray(getattr(w, "w", w))
    k = state.k + 1
    x = wm @ state.x - hp.eta * state.y
    res = _estimate_all(state.algorithm, "coordinate", problem, x, hp.mu, [()] * state.n_agents, k, workers)
    g = np.stack([r.g_hat for r in res])
    y = wm @ state.y + (g - state.m)
    _check_finite(state.algorithm, k, x=x, estimate=g, y=y)
    return replace(state, x=x, m=g, y=y, m_prev=state.m, g_prev=g, k=k,
                   queries_total=state.queries_total + sum(r.queries for r in res), loss=None)


def step(state: NetworkState, w, hp: HyperParams, problem: Problem, workers: int = 1,
         monitor: bool = True) -> NetworkState:
    if state.algorithm in ("zomgt", "zogt"):
        return zomgt_step(state, w, hp, problem, workers)
    if state.algorithm == "tang1":
        return tang1_step(state, w, hp, problem, workers, monitor)
    if state.algorithm == "tang2":
        return tang2_step(state, w, hp, problem, workers)
    raise ValueError(f"unknown algorithm {state.algorithm!r}")


def expected_queries(algorithm: str, n_agents: int, d: int, k: int, monitor: bool = True) -> int:
    """Closed-form cumulative query count after iteration ``k`` (``k = 0`` is the init)."""
    if algorithm in ("zomgt", "zogt"):
        return 2 * n_agents * (k + 1)
    if algorithm == "tang1":
        return (3 * n_agents * k + n_agents) if monitor else 2 * n_agents * k
    if algorithm == "tang2":
        return 2 * d * n_agents * (k + 1)
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class Trajectory:
    algorithm: str
    rows: list[MetricsRow] = field(default_factory=list)
    final: NetworkState | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def run(algorithm: str, problem: Problem, w, hp: HyperParams, seed: int, monitor: bool = True,
        x0: str | np.ndarray = "zeros", cap: int | None = None, workers: int = 1,
        metrics_stride: int = 1, wall_clock: bool = True, shared_stream: bool = False,
        lipschitz: float | None = None,
        callback: Callable[[NetworkState], None] | None = None) -> Trajectory:
    """Drive ``T`` iterations (or ``cap`` if smaller) and record one metrics row per iteration.

    Wall time is measured around the step and its monitoring queries only.
    With ``wall_clock=False`` it is recorded as 0 so reruns are byte-identical.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if lipschitz is not None:
        for msg in hp.step_size_advice(lipschitz):
            warnings.warn(msg, StepSizeWarning, stacklevel=2)
    iters = hp.T if cap is None else min(hp.T, cap)

    clock = time.perf_counter
    t0 = clock()
    state = init(algorithm, problem, w, hp, seed, x0=x0, monitor=monitor,
                 shared_stream=shared_stream, workers=workers)
    elapsed = clock() - t0
    traj = Trajectory(algorithm)
    ms = lambda: elapsed * 1e3 if wall_clock else 0.0
    traj.rows.append(metrics_row(state, problem, algorithm, ms()))
    if callback:
        callback(state)
    for _ in range(iters):
        t0 = clock()
        state = step(state, w, hp, problem, workers, monitor)
        elapsed += clock() - t0
        with_grad = state.k % metrics_stride == 0 or state.k == iters
        traj.rows.append(metrics_row(state, problem, algorithm, ms(), with_grad))
        if callback:
            callback(state)
    traj.final = state
    return traj
