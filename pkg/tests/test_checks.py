import numpy as np
import pytest

from bmaster.checks import default_statistics, getting_it_right, gir_hyperparameters, prior_draw
from bmaster.errors import InvalidInputError
from bmaster.model import Hyperparameters


def test_prior_draw_shapes_and_validity():
    X = np.random.default_rng(0).standard_normal((6, 5))
    B, state, Y = prior_draw(X, 4, gir_hyperparameters(), np.random.default_rng(1))
    assert B.shape == (5, 4) and Y.shape == (6, 4)
    assert np.all(state.delta1 > 0) and np.all(state.delta2 > 0) and np.all(state.sigma2 > 0)
    assert default_statistics(B, state).shape == (20,)


def test_prior_draw_needs_proper_sigma_prior():
    with pytest.raises(InvalidInputError):
        prior_draw(np.ones((2, 2)), 2, Hyperparameters(), np.random.default_rng(0))


def test_prior_scale_single_entry():
    # P = Q = 1: u = beta / sigma has a Laplace(lambda1 + lambda2) law given the lambdas,
    # so E|u| = E[1 / (lambda1 + lambda2)] under the lambda marginal
    hp = gir_hyperparameters()
    g = np.random.default_rng(2)
    draws = [prior_draw(np.ones((1, 1)), 1, hp, g) for _ in range(20000)]
    u = np.array([abs(B[0, 0]) / np.sqrt(st.sigma2[0]) for B, st, _ in draws])
    lam = np.array([np.sqrt(st.lambda1_sq) + np.sqrt(st.lambda2_sq) for _, st, _ in draws])
    assert u.mean() == pytest.approx(np.mean(1 / lam), rel=0.03)


def test_small_getting_it_right_runs():
    X = np.random.default_rng(1).standard_normal((6, 3))
    out = getting_it_right(X, 4, gir_hyperparameters(), n_marginal=1500, n_successive=3000,
                           seed=4)
    assert out["z"].shape == (20,) and np.all(np.isfinite(out["z"]))
    assert np.mean(np.abs(out["z"]) < 4) >= 0.9
