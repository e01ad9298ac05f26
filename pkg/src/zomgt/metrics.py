"""Evaluation quantities computed with the analytic oracle.

Nothing here touches a query counter: these are white-box measurements of a
black-box optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .problem import Problem, global_gradient

CSV_COLUMNS = (
    "k", "algorithm", "grad_norm_sq", "consensus_err", "tracking_err",
    "conservation_resid", "queries_cum", "wall_ms", "loss",
)


@dataclass(frozen=True)
class MetricsRow:
    k: int
    algorithm: str
    grad_norm_sq: float
    consensus_err: float
    tracking_err: float
    conservation_resid: float
    queries_cum: int
    wall_ms: float
    loss: float

    def csv_line(self) -> str:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return ",".join(out)

    @classmethod
    def from_csv_line(cls, line: str) -> "MetricsRow":
        parts = line.rstrip("\n").split(",")
        kw = {}
        for f, raw in zip(fields(cls), parts):
            kw[f.name] = int(raw) if f.type in ("int", int) else raw if f.name == "algorithm" else float(raw)
        return cls(**kw)


def _x(state_or_x) -> np.ndarray:
    return np.asarray(getattr(state_or_x, "x", state_or_x), dtype=float)


def consensus_error(state_or_x) -> float:
    """``(1/N) sum_i ||x_i - x_bar||^2``."""
    x = _x(state_or_x)
    dev = x - x.mean(axis=0)
    return float(np.sum(dev * dev) / x.shape[0])


def consensus_error_matrix_form(state_or_x) -> float:
    """``(1/N) ||(I - J) X||_F^2`` with the projector built explicitly."""
    x = _x(state_or_x)
    n = x.shape[0]
    proj = np.eye(n) - np.full((n, n), 1.0 / n)
    return float(np.linalg.norm(proj @ x, "fro") ** 2 / n)


def grad_norm_sq(state_or_x, problem: Problem) -> float:
    g = global_gradient(problem, _x(state_or_x).mean(axis=0))
    return float(g @ g)


def tracking_error(state, problem: Problem) -> float:
    """``||m_bar - grad F(x_bar)||^2``; NaN for algorithms without a momentum state."""
    if state.m is None:
        return math.nan
    e = state.m.mean(axis=0) - global_gradient(problem, state.x.mean(axis=0))
    return float(e @ e)


def conservation_residual(state) -> float:
    """``||y_bar - m_bar||``, zero in exact arithmetic for tracking methods."""
    if state.y is None or state.m is None:
        return math.nan
    return float(np.linalg.norm(state.y.mean(axis=0) - state.m.mean(axis=0)))


def metrics_row(state, problem: Problem, algorithm: str, wall_ms: float, with_grad: bool = True) -> MetricsRow:
    return MetricsRow(
        k=state.k,
        algorithm=algorithm,
        grad_norm_sq=grad_norm_sq(state, problem) if with_grad else math.nan,
        consensus_err=consensus_error(state),
        tracking_err=tracking_error(state, problem) if with_grad else math.nan,
        conservation_resid=conservation_residual(state),
        queries_cum=state.queries_total,
        wall_ms=float(wall_ms),
        loss=math.nan if state.loss is None else float(state.loss),
    )


@dataclass(frozen=True)
class FloorEstimate:
    value: float
    window: int


def steady_state_floor(series: Sequence[float], window: int = 100) -> FloorEstimate:
    """Median of the last ``window`` values."""
    if window < 1:
        raise ValueError("window must be >= 1")
    arr = np.asarray(series, dtype=float)
    if arr.shape[0] < window:
        raise ValueError(f"series has {arr.shape[0]} values, window needs {window}")
    return FloorEstimate(float(np.median(arr[-window:])), window)


def loglog_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    if len(points) < 2:
        raise ValueError("need at least two points")
    pts = np.asarray(points, dtype=float)
    if np.any(pts <= 0):
        raise ValueError("log-log fit needs strictly positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all be equal")
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))
