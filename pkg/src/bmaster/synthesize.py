"""Synthetic designs and the runtime-scaling benchmark."""

import time
from dataclasses import asdict, dataclass, replace

import numpy as np
import pandas as pd

from bmaster.errors import InvalidInputError
from bmaster.model import ConstraintMask, RegressionData
from bmaster.sampler import SamplerConfig, run_chain


@dataclass
class SyntheticDesign:
    P: int = 20
    Q: int = 20
    N: int = 20
    rho: float = 0.0
    p_row: float = 0.2
    p_col: float = 0.5
    lo: float = 0.5
    hi: float = 2.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.P, self.Q, self.N) < 1:
            raise InvalidInputError("P, Q and N must be positive")
        if not 0 <= self.rho < 1:
            raise InvalidInputError(f"rho must lie in [0, 1), got {self.rho}")
        if not (0 <= self.p_row <= 1 and 0 <= self.p_col <= 1):
            raise InvalidInputError("activation probabilities must lie in [0, 1]")
        if self.lo > self.hi:
            raise InvalidInputError("magnitude range needs lo <= hi")
        if self.noise_sd <= 0:
            raise InvalidInputError("noise_sd must be positive")

    @property
    def expected_sparsity(self):
        return 1.0 - self.p_row * self.p_col

    def as_dict(self):
        return asdict(self)


def generate_from_truth(X, Btrue, noise_sd=1.0, seed=0):
    """Y = X Btrue + E with i.i.d. N(0, noise_sd^2) entries of E."""
    X = np.asarray(X, dtype=float)
    Btrue = np.asarray(Btrue, dtype=float)
    if X.shape[1] != Btrue.shape[0]:
        raise InvalidInputError(f"X has {X.shape[1]} columns but Btrue has {Btrue.shape[0]} rows")
    gen = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    return X @ Btrue + noise_sd * gen.standard_normal((X.shape[0], Btrue.shape[1]))


def ar1_design(N, P, rho, gen):
    """Rows i.i.d. N(0, S) with S_jk = rho^|j-k|."""
    Z = gen.standard_normal((N, P))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    c = np.sqrt(1.0 - rho ** 2)
    for j in range(1, P):
        X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
    return X


def sparse_coefficients(P, Q, p_row, p_col, lo, hi, gen):
    rows = gen.random(P) < p_row
    present = (gen.random((P, Q)) < p_col) & rows[:, None]
    mag = gen.uniform(lo, hi, (P, Q))
    sign = np.where(gen.random((P, Q)) < 0.5, -1.0, 1.0)
    return np.where(present, sign * mag, 0.0)


def generate_design(design):
    """Draw (X, Btrue, Y) for a :class:`SyntheticDesign`."""
    gen = np.random.default_rng(np.random.SeedSequence(design.seed, spawn_key=(0,)))
    X = ar1_design(design.N, design.P, design.rho, gen)
    Btrue = sparse_coefficients(design.P, design.Q, design.p_row, design.p_col,
                                design.lo, design.hi, gen)
    Y = generate_from_truth(X, Btrue, design.noise_sd, design.seed)
    return X, Btrue, Y


def loglog_slope(params, seconds):
    """Least-squares slope of log(seconds) on log(params)."""
    params = np.asarray(params, dtype=float)
    seconds = np.asarray(seconds, dtype=float)
    if params.size < 2:
        raise InvalidInputError("need at least two sizes to fit a slope")
    return float(np.polyfit(np.log(params), np.log(seconds), 1)[0])


def _time_chain(data, mask, config, min_seconds):
    """Seconds for one chain, repeating short runs until ``min_seconds`` elapse."""
    reps, total = 0, 0.0
    while True:
        t0 = time.perf_counter()
        run_chain(data, mask, config)
        total += time.perf_counter() - t0
        reps += 1
        if total >= min_seconds:
            return total / reps, reps


def run_scaling_benchmark(sizes, template=None, config=None, min_seconds=0.2, n_sweep=False):
    """Time the sampler over a grid of sizes.

    Parameters
    ----------
    sizes : sequence
        Either integers (P = Q = N = size) or (P, Q, N) triples.
    template : SyntheticDesign, optional
        Design whose non-size fields (rho, sparsity, noise, seed) are reused.
    config : SamplerConfig, optional
        Fixed iteration budget used at every size; defaults to 500 iterations.
    min_seconds : float
        Very short runs are repeated until at least this much time has
        accumulated, and the mean is reported.
    n_sweep : bool
        Require at least two sizes instead of three (for sample-size sweeps
        at fixed P, Q, where the slope is not the quantity of interest).

    Returns
    -------
    table : DataFrame
        Columns P, Q, N, params, seconds, per_iter, reps.
    slope : float
        Slope of log(seconds) against log(P*Q).
    """
    sizes = [(s, s, s) if np.isscalar(s) else tuple(s) for s in sizes]
    if len(sizes) < (2 if n_sweep else 3):
        raise InvalidInputError("the scaling benchmark needs at least three sizes")
    template = template or SyntheticDesign(rho=0.5)
    config = config or SamplerConfig(iterations=500, burn_in=100)
    rows = []
    for P, Q, N in sizes:
        X, _, Y = generate_design(replace(template, P=P, Q=Q, N=N))
        data = RegressionData(X, Y)
        secs, reps = _time_chain(data, ConstraintMask.full(P, Q), config, min_seconds)
        rows.append({"P": P, "Q": Q, "N": N, "params": P * Q, "seconds": secs,
                     "per_iter": secs / config.iterations, "reps": reps})
    table = pd.DataFrame(rows)
    params = table["params"].to_numpy()
    slope = loglog_slope(params, table["seconds"]) if np.ptp(params) > 0 else float("nan")
    return table, slope


def sample_size_sweep(P, Q, multipliers=(1, 5, 10), template=None, config=None, min_seconds=0.2):
    """Per-iteration time at fixed (P, Q) for N = m * P."""
    table, _ = run_scaling_benchmark([(P, Q, m * P) for m in multipliers], template, config,
                                     min_seconds, n_sweep=True)
    return table
