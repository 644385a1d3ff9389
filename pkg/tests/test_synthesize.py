import numpy as np
import pytest

from bmaster.errors import InvalidInputError
from bmaster.sampler import SamplerConfig
from bmaster.synthesize import (SyntheticDesign, ar1_design, generate_design, generate_from_truth,
                                loglog_slope, run_scaling_benchmark, sample_size_sweep,
                                sparse_coefficients)


def test_ar1_correlation():
    X = ar1_design(20000, 4, 0.6, np.random.default_rng(0))
    C = np.corrcoef(X.T)
    np.testing.assert_allclose(C[0, 1:], [0.6, 0.36, 0.216], atol=0.02)
    np.testing.assert_allclose(X.var(axis=0), 1, atol=0.05)


def test_sparse_coefficients_pattern():
    B = sparse_coefficients(400, 300, 0.3, 0.5, 0.5, 2.0, np.random.default_rng(1))
    nz = B != 0
    active = nz.any(axis=1)
    assert active.mean() == pytest.approx(0.3, abs=0.07)
    assert nz[active].mean() == pytest.approx(0.5, abs=0.02)
    assert np.all((np.abs(B[nz]) >= 0.5) & (np.abs(B[nz]) <= 2.0))
    assert np.mean(B[nz] > 0) == pytest.approx(0.5, abs=0.02)


def test_generate_design_deterministic():
    d = SyntheticDesign(P=5, Q=4, N=12, seed=3)
    a, b = generate_design(d), generate_design(d)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    X, Btrue, Y = a
    np.testing.assert_array_equal(Y, generate_from_truth(X, Btrue, 1.0, 3))
    assert d.expected_sparsity == pytest.approx(0.9)


def test_generate_from_truth_noise():
    X = np.eye(3)
    Y = generate_from_truth(np.zeros((5000, 3)), np.ones((3, 2)), 2.0, 0)
    assert Y.std() == pytest.approx(2.0, rel=0.05)
    with pytest.raises(InvalidInputError):
        generate_from_truth(X, np.ones((4, 2)))


@pytest.mark.parametrize("kw", [dict(rho=1.0), dict(p_row=2.0), dict(lo=3.0), dict(N=0),
                                dict(noise_sd=0.0)])
def test_design_validation(kw):
    with pytest.raises(InvalidInputError):
        SyntheticDesign(**kw)


def test_loglog_slope_exact():
    p = np.array([10.0, 100.0, 1000.0])
    assert loglog_slope(p, 3 * p ** 1.25) == pytest.approx(1.25)
    with pytest.raises(InvalidInputError):
        loglog_slope([1.0], [1.0])


def test_benchmark_table():
    cfg = SamplerConfig(iterations=15, burn_in=5)
    table, slope = run_scaling_benchmark([3, 4, 6], config=cfg, min_seconds=0.0)
    assert table["params"].tolist() == [9, 16, 36]
    assert np.isfinite(slope) and (table["reps"] >= 1).all()
    sweep = sample_size_sweep(3, 3, (1, 4), config=cfg, min_seconds=0.0)
    assert sweep["N"].tolist() == [3, 12]
    with pytest.raises(InvalidInputError):
        run_scaling_benchmark([3, 4], config=cfg)
