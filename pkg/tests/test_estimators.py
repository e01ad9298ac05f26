import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zomgt.estimators import (
    BiasReport,
    EstimatorBounds,
    NonFiniteObjectiveError,
    check_bias_bound,
    coordinate_full,
    rademacher_draws,
    rademacher_expectation,
    rademacher_forward,
    rademacher_sample,
    sphere_central,
)
from zomgt.problem import CubicSum, Quadratic
from zomgt.rng import stream


class Counted:
    """Wraps an objective and counts every evaluation."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.fn(x)


def random_psd(d, rng, top=1.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = rng.uniform(0.1, 1.0, d)
    ev *= top / ev.max()
    return (q * ev) @ q.T


# --- sampling ---------------------------------------------------------------

def test_rademacher_scalar_mean():
    rng = stream(0, 0, 0)
    draws = 2.0 * rng.integers(0, 2, size=10**6) - 1.0
    assert abs(draws.mean()) <= 0.005
    # same generator through the public sampler
    one = np.array([rademacher_sample(1, stream(0, 0, k))[0] for k in range(2000)])
    assert set(one) == {-1.0, 1.0}


@pytest.mark.parametrize("d", [1, 7, 124])
def test_rademacher_norm_and_determinism(d):
    u = rademacher_sample(d, stream(3, 1, 2))
    assert u @ u == d
    np.testing.assert_array_equal(u, rademacher_sample(d, stream(3, 1, 2)))


def test_rademacher_rejects_empty():
    with pytest.raises(ValueError):
        rademacher_sample(0, stream(0, 0, 0))


# --- rademacher forward -----------------------------------------------------

@pytest.mark.parametrize("mu", [1e-4, 0.01, 3.0])
def test_forward_exact_on_linear(mu, rng):
    c = rng.standard_normal(6)
    x = rng.standard_normal(6)
    st_ = stream(1, 2, 3)
    res = rademacher_forward(lambda z: c @ z, x, mu, st_)
    u = rademacher_sample(6, stream(1, 2, 3))
    np.testing.assert_allclose(res.g_hat, (c @ u) * u, rtol=1e-8, atol=1e-10 / mu)
    assert res.queries == 2
    assert res.f_at_x == pytest.approx(c @ x)


def test_forward_constant_gives_zero():
    res = rademacher_forward(lambda z: 4.2, np.ones(5), 0.01, stream(0, 0, 0))
    assert np.all(res.g_hat == 0.0)


def test_forward_quadratic_mean_matches_gradient(rng):
    d, m, mu = 10, 10**6, 1e-3
    a = random_psd(d, rng)
    f = Quadratic(a, np.zeros(d))
    x = rng.standard_normal(d)
    grad = f.gradient(x)
    est = np.zeros(d)
    gen = np.random.default_rng(7)
    for _ in range(10):
        est += rademacher_draws(f, x, mu, m // 10, gen).sum(axis=0)
    est /= m
    assert np.linalg.norm(est - grad) <= 5 * np.linalg.norm(grad) * np.sqrt(d / m)


@pytest.mark.parametrize("d", [2, 5, 10])
def test_enumeration_quadratic_form_is_uncorrelated_with_direction(d, rng):
    a = rng.standard_normal((d, d))
    a = a + a.T
    total = np.zeros(d)
    for signs in itertools.product((-1.0, 1.0), repeat=d):
        u = np.array(signs)
        total += (u @ a @ u) * u
    np.testing.assert_allclose(total / 2**d, 0.0, atol=1e-12)


@pytest.mark.parametrize("d", [3, 8, 12])
def test_enumeration_quadratic_bias_is_zero(d, rng):
    a = random_psd(d, rng, top=2.0)
    f = Quadratic(a, rng.standard_normal(d))
    x = rng.standard_normal(d)
    exact = rademacher_expectation(f.value, x, 0.05)
    np.testing.assert_allclose(exact, f.gradient(x), atol=1e-9)


@pytest.mark.parametrize("d", [4, 9, 12])
@pytest.mark.parametrize("mu", [1e-1, 1e-2])
def test_enumeration_cubic_bias_within_bound(d, mu, rng):
    f = CubicSum(d)
    x = rng.uniform(-1, 1, d)
    exact = rademacher_expectation(f.value, x, mu)
    bias = np.linalg.norm(exact - f.gradient(x))
    assert bias == pytest.approx(mu**2 * np.sqrt(d), rel=1e-6)
    L = CubicSum.smoothness(np.max(np.abs(x)) + mu)
    assert bias <= EstimatorBounds(mu, L, d).delta_mu


def test_expectation_refuses_large_dimension():
    with pytest.raises(ValueError):
        rademacher_expectation(lambda z: 0.0, np.zeros(17), 0.1)


@pytest.mark.parametrize("d", [5, 50])
@pytest.mark.parametrize("mu", [1e-2, 1e-3])
def test_second_moment_below_cap(d, mu):
    rng = np.random.default_rng(d)
    a = random_psd(d, rng)
    f = Quadratic(a, rng.standard_normal(d))
    x = rng.standard_normal(d)
    sq = np.sum(rademacher_draws(f, x, mu, 10**5, rng) ** 2, axis=1)
    cap = EstimatorBounds(mu, 1.0, d).second_moment_cap(f.gradient(x))
    assert sq.mean() <= cap + 5 * sq.std() / np.sqrt(sq.size)


def test_non_finite_objective_reports_point():
    def f(z):
        return np.inf if z[0] > 0.5 else 0.0

    with pytest.raises(NonFiniteObjectiveError) as exc:
        rademacher_forward(f, np.ones(3), 0.1, stream(0, 0, 0))
    assert exc.value.point.shape == (3,)
    with pytest.raises(NonFiniteObjectiveError):
        coordinate_full(lambda z: np.nan, np.zeros(2), 0.1)


@pytest.mark.parametrize("fn", [rademacher_forward, sphere_central])
def test_nonpositive_radius_rejected(fn):
    with pytest.raises(ValueError):
        fn(lambda z: 0.0, np.zeros(2), 0.0, stream(0, 0, 0))


# --- spherical central -------------------------------------------------------

def test_sphere_exact_on_linear_and_quadratic(rng):
    d = 7
    c = rng.standard_normal(d)
    x = rng.standard_normal(d)
    res = sphere_central(lambda z: c @ z, x, 0.01, stream(2, 0, 0))
    # recover u from the estimate direction
    u = res.g_hat / np.linalg.norm(res.g_hat)
    assert abs(np.linalg.norm(u) - 1.0) <= 1e-12
    np.testing.assert_allclose(res.g_hat, d * (c @ u) * u, rtol=1e-7)
    assert res.queries == 2 and res.f_at_x is None

    a = random_psd(d, rng)
    f = Quadratic(a, c)
    for mu in (1e-3, 0.5):
        g = sphere_central(f.value, x, mu, stream(2, 0, 5)).g_hat
        u = g / np.linalg.norm(g)
        np.testing.assert_allclose(g, d * (u @ f.gradient(x)) * u, rtol=1e-7)


# --- full coordinate ---------------------------------------------------------

def test_coordinate_exact_on_linear_and_quadratic(rng):
    d = 9
    c = rng.standard_normal(d)
    res = coordinate_full(lambda z: c @ z, rng.standard_normal(d), 0.01)
    np.testing.assert_allclose(res.g_hat, c, atol=1e-10)
    a = random_psd(d, rng)
    x = rng.standard_normal(d)
    res = coordinate_full(lambda z: 0.5 * z @ a @ z, x, 0.1)
    np.testing.assert_allclose(res.g_hat, a @ x, atol=1e-12)
    assert res.f_at_x is None


def test_coordinate_query_count_at_a9a_dimension():
    f = Counted(lambda z: float(z @ z))
    res = coordinate_full(f, np.zeros(124), 0.01)
    assert res.queries == 248 == f.calls


# --- accounting and determinism ----------------------------------------------

@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 30), seed=st.integers(0, 2**32), calls=st.integers(1, 6))
def test_query_accounting_is_additive(d, seed, calls):
    f = Counted(lambda z: float(np.sum(np.sin(z))))
    x = np.linspace(-1, 1, d)
    total = 0
    for k in range(calls):
        for call in (lambda: rademacher_forward(f, x, 0.01, stream(seed, 0, k)),
                     lambda: sphere_central(f, x, 0.01, stream(seed, 1, k)),
                     lambda: coordinate_full(f, x, 0.01)):
            total += call().queries
            assert f.calls == total
    assert total == calls * (4 + 2 * d)


def test_estimators_deterministic_given_stream():
    f = CubicSum(6).value
    x = np.arange(6) / 6.0
    for fn in (rademacher_forward, sphere_central):
        a = fn(f, x, 0.01, stream(11, 4, 9)).g_hat
        b = fn(f, x, 0.01, stream(11, 4, 9)).g_hat
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(coordinate_full(f, x, 0.01).g_hat, coordinate_full(f, x, 0.01).g_hat)


# --- bounds and bias checks --------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(mu=st.floats(1e-6, 1.0), L=st.floats(1e-3, 100.0), d=st.integers(1, 500),
       zeta=st.floats(0.0, 10.0), factor=st.floats(1.01, 10.0))
def test_bounds_nonnegative_and_monotone(mu, L, d, zeta, factor):
    g = np.full(3, 0.5)
    base = EstimatorBounds(mu, L, d)
    vals = (base.delta_mu, base.second_moment_cap(g), base.sigma_zo_sq(zeta))
    assert min(vals) >= 0
    for bigger in (EstimatorBounds(mu * factor, L, d), EstimatorBounds(mu, L * factor, d),
                   EstimatorBounds(mu, L, d + 1)):
        assert bigger.delta_mu > base.delta_mu
        # the smoothing term can sit below one ulp of the gradient term
        assert bigger.second_moment_cap(g) >= vals[1]
        assert bigger.sigma_zo_sq(zeta) >= vals[2]


def test_bias_check_quadratic_passes_on_margin_alone(rng):
    d = 10
    a = random_psd(d, rng)
    f = Quadratic(a, np.zeros(d))
    x = rng.standard_normal(d)
    rep = check_bias_bound(f, f.gradient(x), 1.0, x, 0.01, 10**5, np.random.default_rng(1))
    assert rep.passed
    # zero true bias: the observed deviation is pure sampling noise, well inside the margin
    assert rep.empirical_bias <= rep.margin


def test_bias_check_cubic_on_box(rng):
    d = 10
    f = CubicSum(d)
    x = rng.uniform(-1, 1, d)
    mu = 0.01
    L = CubicSum.smoothness(np.max(np.abs(x)) + mu)
    rep = check_bias_bound(f, f.gradient(x), L, x, mu, 10**5, np.random.default_rng(2))
    assert rep.passed
    assert rep.delta_mu == pytest.approx(mu * L * d**1.5 / 2)


def test_cubic_bias_shrinks_with_radius():
    d = 10
    f = CubicSum(d)
    x = np.linspace(-0.8, 0.9, d)
    grad = f.gradient(x)
    exact = [np.linalg.norm(rademacher_expectation(f.value, x, mu) - grad) for mu in (1e-2, 1e-3, 1e-4)]
    assert exact[0] > exact[1] > exact[2]
    reps = [check_bias_bound(f, grad, CubicSum.smoothness(1.0), x, mu, 10**5, np.random.default_rng(3))
            for mu in (1e-2, 1e-3, 1e-4)]
    for hi, lo in zip(reps, reps[1:]):
        assert lo.empirical_bias <= hi.empirical_bias + hi.margin


def test_bias_report_csv_row():
    rep = BiasReport("rademacher_forward", 10, 0.01, 0.002, 0.05, 0.01)
    fields = rep.csv_row().split(",")
    assert len(fields) == len(BiasReport.CSV_HEADER.split(","))
    assert fields[0] == "rademacher_forward" and fields[-1] == "true"
    failing = BiasReport("rademacher_forward", 10, 0.01, 1.0, 0.05, 0.01)
    assert not failing.passed
