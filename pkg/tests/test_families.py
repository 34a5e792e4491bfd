import math

import numpy as np
import pytest

from subglm.data import Dataset, ParamSplit
from subglm.errors import DegenerateInputError, InvalidInputError
from subglm.families import GAUSSIAN, LOGISTIC, b_derivatives, family_from_name, neg_loglik


def test_gaussian_values():
    b, b1, b2, b3 = b_derivatives(GAUSSIAN, 3.0)
    assert (b, b1, b2, b3) == (4.5, 3.0, 1.0, 0.0)


def test_logistic_at_zero():
    b, b1, b2, b3 = b_derivatives(LOGISTIC, 0.0)
    assert math.isclose(b, math.log(2.0), rel_tol=1e-15)
    assert (b1, b2, b3) == (0.5, 0.25, 0.0)


def test_logistic_extreme_no_overflow():
    # oracle: 1/((1+e^t)(1+e^-t)) evaluated in extended precision at t=40
    import mpmath

    t = 40.0
    _, _, b2, _ = b_derivatives(LOGISTIC, t)
    oracle = float(1 / ((1 + mpmath.e**t) * (1 + mpmath.e**-t)))
    assert math.isclose(b2, oracle, rel_tol=1e-12)
    b, b1, b2, b3 = b_derivatives(LOGISTIC, 700.0)
    assert np.isfinite([b, b1, b2, b3]).all()
    assert b == pytest.approx(700.0)
    _, _, b2_hi, _ = b_derivatives(LOGISTIC, 750.0)
    assert b2_hi == 0.0  # graceful underflow


def test_nonfinite_rejected():
    with pytest.raises(InvalidInputError):
        b_derivatives(GAUSSIAN, np.nan)
    with pytest.raises(InvalidInputError):
        b_derivatives(LOGISTIC, np.inf)


@pytest.mark.parametrize("family", [GAUSSIAN, LOGISTIC])
def test_finite_difference_chain(family):
    rng = np.random.default_rng(0)
    t = rng.uniform(-8, 8, size=100)
    h = 1e-5
    b_p, b1_p, b2_p, _ = b_derivatives(family, t + h)
    b_m, b1_m, b2_m, _ = b_derivatives(family, t - h)
    _, b1, b2, b3 = b_derivatives(family, t)
    assert np.all(np.abs((b_p - b_m) / (2 * h) - b1) <= 1e-6 * (1 + np.abs(b1)))
    assert np.all(np.abs((b1_p - b1_m) / (2 * h) - b2) <= 1e-6 * (1 + np.abs(b2)))
    assert np.all(np.abs((b2_p - b2_m) / (2 * h) - b3) <= 1e-6 * (1 + np.abs(b3)))


def test_logistic_mean_bounds_and_symmetry():
    rng = np.random.default_rng(1)
    t = rng.uniform(-30, 30, size=200)
    _, b1, _, _ = b_derivatives(LOGISTIC, t)
    assert np.all((b1 > 0) & (b1 < 1))
    _, b1_neg, _, _ = b_derivatives(LOGISTIC, -t)
    assert np.all(np.abs(b1 + b1_neg - 1) <= 1e-12)


def test_neg_loglik_single_observation():
    data = Dataset(np.array([[1.0, 0.0]]), np.array([2.0]), d=1)
    beta = ParamSplit(np.array([2.0, 0.0]), d=1)
    assert neg_loglik(GAUSSIAN, data, beta) == pytest.approx(-2.0)


def test_neg_loglik_logistic_at_zero_is_log2():
    rng = np.random.default_rng(2)
    data = Dataset(rng.normal(size=(20, 4)), (rng.random(20) < 0.5).astype(float), d=2)
    beta = ParamSplit(np.zeros(4), d=2)
    assert neg_loglik(LOGISTIC, data, beta) == pytest.approx(math.log(2.0))


def test_neg_loglik_matches_naive_loop():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(13, 5))
    y = rng.normal(size=13)
    data = Dataset(X, y, d=2)
    beta = rng.normal(size=5)
    idx = np.array([2, 5, 9])
    w = np.array([0.5, 2.0, 1.0])
    total = 0.0
    for pos, i in enumerate(idx):
        t = sum(X[i - 1, j] * beta[j] for j in range(5))
        total += w[pos] * (0.5 * t * t - y[i - 1] * t)
    expected = total / 3
    got = neg_loglik(GAUSSIAN, data, ParamSplit(beta, 2), indices=idx, weights=w)
    assert got == pytest.approx(expected, rel=1e-12)


def test_neg_loglik_empty_indices():
    rng = np.random.default_rng(4)
    data = Dataset(rng.normal(size=(5, 3)), rng.normal(size=5), d=1)
    with pytest.raises(DegenerateInputError):
        neg_loglik(GAUSSIAN, data, ParamSplit(np.zeros(3), 1), indices=np.array([], dtype=int))


@pytest.mark.parametrize("family", [GAUSSIAN, LOGISTIC])
def test_neg_loglik_convex_along_segments(family):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 6))
    y = (rng.random(30) < 0.5).astype(float) if family is LOGISTIC else rng.normal(size=30)
    data = Dataset(X, y, d=2)
    for _ in range(20):
        b1 = ParamSplit(rng.normal(size=6), 2)
        b2 = ParamSplit(rng.normal(size=6), 2)
        lam = rng.uniform(0.05, 0.95)
        mid = ParamSplit(lam * b1.beta + (1 - lam) * b2.beta, 2)
        lhs = neg_loglik(family, data, mid)
        rhs = lam * neg_loglik(family, data, b1) + (1 - lam) * neg_loglik(family, data, b2)
        assert lhs <= rhs + 1e-10


def test_family_lookup():
    assert family_from_name("gaussian").kind == "gaussian"
    assert family_from_name("logistic").dispersion_known
    assert not family_from_name("gaussian").dispersion_known
    with pytest.raises(InvalidInputError):
        family_from_name("poisson")
