import math

import numpy as np
import pytest
from scipy import stats

from bmaster.errors import DomainError, InvalidInputError
from bmaster.model import (ConstraintMask, Hyperparameters, LatentState, RegressionData,
                           joint_log_density, residual_sums, residual_sums_gram)


def test_joint_density_scalar_hand_sum():
    x, y, b = 1.3, -0.4, 0.7
    d1, d2, s2, l1, l2 = 2.0, 0.5, 1.7, 0.9, 1.6
    hp = Hyperparameters(1.5, 0.8, 2.5, 1.2, 3.0, 2.0)
    data = RegressionData(np.array([[x]]), np.array([[y]]))
    state = LatentState(np.array([[d1]]), np.array([d2]), np.array([s2]), l1, l2)
    expected = (
        -0.5 * math.log(2 * math.pi * s2) - (y - x * b) ** 2 / (2 * s2)
        + stats.norm.logpdf(b, scale=math.sqrt(s2 / (d1 + d2)))
        + math.log(l1 / 2) - l1 / (2 * d1) - 2 * math.log(d1)
        + math.log(l2 / 2) - l2 / (2 * d2) - 2 * math.log(d2)
        - 0.5 * math.log(1 / d1 + 1 / d2)
        + stats.invgamma.logpdf(s2, 3.0, scale=2.0)
        + stats.gamma.logpdf(l1, 1.5, scale=1 / 0.8)
        + stats.gamma.logpdf(l2, 2.5, scale=1 / 1.2)
    )
    got = joint_log_density(data, ConstraintMask.full(1, 1), np.array([[b]]), state, hp)
    assert got == pytest.approx(expected, rel=1e-13)


def test_jeffreys_sigma_prior_term():
    data = RegressionData(np.ones((2, 1)), np.zeros((2, 1)))
    mask = ConstraintMask(np.zeros((1, 1)))
    state = LatentState(np.full((1, 1), np.nan), np.full(1, np.nan), np.array([2.0]), 1.0, 1.0)
    hp = Hyperparameters()
    got = joint_log_density(data, mask, np.zeros((1, 1)), state, hp)
    expected = -math.log(2 * math.pi * 2.0) - math.log(2.0) + 2 * stats.expon.logpdf(1.0)
    assert got == pytest.approx(expected, rel=1e-13)


def test_gram_residuals_match_direct(instance):
    data, _, B, _, _ = instance
    np.testing.assert_allclose(residual_sums_gram(data, B), residual_sums(data, B), rtol=1e-10)


def test_mask_counts():
    C = np.array([[1, 0, 1], [0, 0, 0]])
    m = ConstraintMask(C)
    assert m.row_counts.tolist() == [2, 0]
    assert m.col_counts.tolist() == [1, 0, 1]
    assert m.total == 2
    assert m.active_rows.tolist() == [True, False]


@pytest.mark.parametrize("C", [np.array([[2]]), np.ones(3)])
def test_mask_rejects_bad_input(C):
    with pytest.raises(InvalidInputError):
        ConstraintMask(C)


def test_data_validation_reports_location():
    X = np.ones((3, 2))
    X[1, 1] = np.nan
    with pytest.raises(InvalidInputError, match=r"\(1, 1\)"):
        RegressionData(X, np.ones((3, 1)))
    with pytest.raises(InvalidInputError, match="rows"):
        RegressionData(np.ones((3, 2)), np.ones((4, 1)))


@pytest.mark.parametrize("kw", [{"a1": 0}, {"b2": -1}, {"sigma_shape": 1.0}])
def test_hyperparameter_validation(kw):
    with pytest.raises(InvalidInputError):
        Hyperparameters(**kw)


def test_state_validation(instance):
    data, mask, B, state, hp = instance
    state.validate(mask)
    bad = state.copy()
    bad.sigma2[0] = -1.0
    with pytest.raises(DomainError):
        bad.validate(mask)
    bad = state.copy()
    bad.lambda1_sq = np.inf
    with pytest.raises(InvalidInputError):
        bad.validate(mask)


def test_initial_state_sentinels(instance):
    data, mask, *_ = instance
    s = LatentState.initial(data, mask)
    assert np.all(np.isnan(s.delta1[~mask.C]))
    assert np.all(s.delta1[mask.C] == 1.0)
    assert np.isnan(s.delta2[-1])
    np.testing.assert_allclose(s.sigma2, data.Y.var(axis=0, ddof=1))
