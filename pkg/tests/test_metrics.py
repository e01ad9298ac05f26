import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from zomgt import algorithms as alg
from zomgt.algorithms import HyperParams, init, run
from zomgt.estimators import EstimateResult
from zomgt.metrics import (
    CSV_COLUMNS,
    MetricsRow,
    consensus_error,
    consensus_error_matrix_form,
    conservation_residual,
    grad_norm_sq,
    loglog_slope,
    steady_state_floor,
    tracking_error,
)
from zomgt.problem import synthetic_quadratic_problem
from zomgt.topology import generate_erdos_renyi, metropolis_weights


def test_consensus_identical_agents():
    assert consensus_error(np.tile([1.0, -3.0], (5, 1))) == 0.0


def test_consensus_two_scalars():
    assert consensus_error(np.array([[0.0], [2.0]])) == 1.0


def test_consensus_matches_matrix_projection(rng):
    for _ in range(100):
        n, d = rng.integers(1, 30), rng.integers(1, 20)
        x = rng.standard_normal((n, d)) * rng.uniform(0.1, 10)
        assert consensus_error(x) == pytest.approx(consensus_error_matrix_form(x), rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12),
                  elements=st.floats(-1e3, 1e3)))
def test_consensus_nonnegative(x):
    assert consensus_error(x) >= 0.0


def test_tracking_error_brute_force(rng):
    pb = synthetic_quadratic_problem(4, 3, 1.0, 1.0, seed=0)
    for _ in range(20):
        x, m = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
        state = SimpleNamespace(x=x, m=m)
        xbar = x.mean(axis=0)
        g = sum(f.gradient(xbar) for f in pb.locals) / 4
        e = m.mean(axis=0) - g
        assert tracking_error(state, pb) == pytest.approx(e @ e, rel=1e-12, abs=1e-12)


def test_tracking_error_zero_with_exact_estimates(monkeypatch):
    pb = synthetic_quadratic_problem(3, 2, 1.0, 1.0, seed=1)

    def exact(f, x, mu, rng):
        agent = f.args[1]  # the per-agent oracle is partial(local_loss, problem, i)
        return EstimateResult(pb.locals[agent].gradient(x), 2, f(x))

    monkeypatch.setattr(alg, "rademacher_forward", exact)
    x0 = np.tile([0.7, -1.2], (3, 1))
    st0 = init("zomgt", pb, metropolis_weights(generate_erdos_renyi(3, 1.0, 0)), HyperParams(), seed=0, x0=x0)
    assert tracking_error(st0, pb) == pytest.approx(0.0, abs=1e-28)


def test_tracking_absent_without_momentum():
    assert math.isnan(tracking_error(SimpleNamespace(x=np.zeros((2, 2)), m=None), None))
    assert math.isnan(conservation_residual(SimpleNamespace(y=None, m=None)))


def test_metrics_do_not_touch_query_counter():
    pb = synthetic_quadratic_problem(3, 4, 1.0, 1.0, seed=2)
    w = metropolis_weights(generate_erdos_renyi(3, 1.0, 0))
    st0 = init("zomgt", pb, w, HyperParams(), seed=0)
    before = st0.queries_total
    grad_norm_sq(st0, pb), tracking_error(st0, pb), consensus_error(st0)
    assert st0.queries_total == before


def test_metric_rows_are_nonnegative_and_queries_nondecreasing():
    pb = synthetic_quadratic_problem(5, 4, 1.0, 1.0, seed=2)
    w = metropolis_weights(generate_erdos_renyi(5, 0.6, 1))
    traj = run("zomgt", pb, w, HyperParams(T=50), seed=0, x0="gaussian")
    assert np.all(traj.column("consensus_err") >= 0)
    assert np.all(traj.column("grad_norm_sq") >= 0)
    assert np.all(np.diff(traj.column("queries_cum")) >= 0)


def test_row_csv_round_trip():
    row = MetricsRow(3, "zomgt", 0.1, 1e-5, math.nan, 0.0, 120, 1.5, 0.2)
    line = row.csv_line()
    assert len(line.split(",")) == len(CSV_COLUMNS)
    back = MetricsRow.from_csv_line(line)
    assert back.k == 3 and back.queries_cum == 120 and back.algorithm == "zomgt"
    assert back.consensus_err == row.consensus_err and math.isnan(back.tracking_err)


# --- floors ---------------------------------------------------------------------

def test_floor_of_constant_series():
    assert steady_state_floor([4.0] * 150).value == 4.0


def test_floor_median_of_tail():
    f = steady_state_floor([9.0, 9.0, 1.0, 2.0, 3.0], window=3)
    assert f.value == 2.0 and f.window == 3


def test_floor_rejects_short_series():
    with pytest.raises(ValueError):
        steady_state_floor([1.0, 2.0], window=3)
    with pytest.raises(ValueError):
        steady_state_floor([1.0], window=0)


def test_floor_robust_to_spikes(rng):
    k = np.arange(1000)
    series = 1e-4 + np.exp(-k / 50) + 1e-5 * rng.standard_normal(1000) ** 2
    series[rng.integers(900, 1000, 5)] += 1.0
    floor = steady_state_floor(series).value
    assert floor <= series[-100:].mean()


# --- log-log slope --------------------------------------------------------------

XS = [0.02, 0.1, 0.2, 0.5]


def test_slope_exact_power_law():
    assert loglog_slope([(x, x**2) for x in XS]) == pytest.approx(2.0, abs=1e-10)


def test_slope_flat():
    assert loglog_slope([(x, 3.0) for x in XS]) == pytest.approx(0.0, abs=1e-12)


def test_slope_noisy_power_law():
    for seed in range(200):
        r = np.random.default_rng(seed)
        pts = [(x, x**2 * (1 + 0.1 * r.standard_normal())) for x in XS]
        assert abs(loglog_slope(pts) - 2.0) <= 0.15


@pytest.mark.parametrize("pts", [[(1.0, 1.0)], [(1.0, 0.0), (2.0, 1.0)], [(-1.0, 1.0), (2.0, 1.0)],
                                 [(2.0, 1.0), (2.0, 3.0)]])
def test_slope_errors(pts):
    with pytest.raises(ValueError):
        loglog_slope(pts)
