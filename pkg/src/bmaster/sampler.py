"""Blocked Gibbs sampler.

Each sweep updates, in order: the coefficient columns beta_q, the entrywise
precisions delta1, the rowwise precisions delta2, the error variances
sigma2 and the shrinkage levels (lambda1_sq, lambda2_sq). Every update is an
exact draw from the full conditional of the joint defined in
:mod:`bmaster.model`.

Randomness for block ``b`` at iteration ``t`` comes from the substream
``(seed, t, b)``; within a block each index reads a fixed slice of that
stream, so results do not depend on the number of worker threads.
"""

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.special import gammaln

from bmaster import rng as _rng
from bmaster.archive import PosteriorArchive
from bmaster.errors import BMasterError, InvalidInputError, SingularSystemError
from bmaster.model import Hyperparameters, LatentState, residual_sums_gram

BETA_FLOOR = 1e-12
RATE_FLOOR = 1e-24


@dataclass
class SamplerConfig:
    iterations: int = 1000
    burn_in: int = 100
    seed: int = 0
    thin: int = 1
    hp: Hyperparameters = field(default_factory=Hyperparameters)
    init: str = "default"
    workers: int = 1

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise InvalidInputError(
                f"need iterations > burn_in >= 0, got {self.iterations}, {self.burn_in}")
        if self.thin < 1:
            raise InvalidInputError("thin must be at least 1")
        if self.seed < 0:
            raise InvalidInputError("seed must be nonnegative")
        if self.workers < 1:
            raise InvalidInputError("workers must be at least 1")
        if self.init != "default":
            raise InvalidInputError(f"unknown init policy {self.init!r}")

    @classmethod
    def case_study(cls, **kw):
        """2000 iterations with 100 discarded, as used for the real-data fit."""
        return cls(iterations=2000, burn_in=100, **kw)

    @property
    def retained(self):
        return (self.iterations - self.burn_in) // self.thin

    def as_dict(self):
        """Configuration fields that determine the draws (worker count excluded)."""
        d = asdict(self)
        d.pop("workers")
        return d

    def hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()


# --- conditional parameters -------------------------------------------------

def penalty_precisions(mask, state):
    """D with D[p, q] = c_pq (delta1_pq + delta2_p); zero where unpenalized."""
    d2 = np.nan_to_num(np.asarray(state.delta2, dtype=float))[:, None]
    return np.where(mask.C, np.nan_to_num(state.delta1) + d2, 0.0)


def beta_conditional(q, data, mask, state):
    """Precision matrix A_q and mean of beta_q | rest (covariance sigma2_q A_q^-1)."""
    A = data.gram + np.diag(penalty_precisions(mask, state)[:, q])
    L = _cholesky(A.copy(), q, mask)
    mean, _ = lapack.dpotrs(L, data.xty[:, q], lower=1)
    return A, mean


def _cholesky(A, q, mask):
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=1)
    if info != 0:
        if not mask.C[:, q].any():
            why = "column has no penalized entries and X'X is rank deficient"
        else:
            why = "precision matrix X'X + D is not positive definite"
        raise SingularSystemError(f"beta column {q}: {why} (leading minor {info})")
    return L


def _draw_beta(gram, dq, xty_q, s2, z, q, mask):
    A = gram.copy()
    A.flat[::A.shape[0] + 1] += dq
    L = _cholesky(A, q, mask)
    mean, _ = lapack.dpotrs(L, xty_q, lower=1)
    # L^T v = z gives v ~ N(0, A^-1)
    v, _ = lapack.dtrtrs(L, z, lower=1, trans=1)
    return mean + np.sqrt(s2) * v


def delta1_params(state, B, mask=None):
    """Inverse Gaussian (mean, shape) for every delta1 entry, plus floor count."""
    absb = np.abs(B)
    clamped = absb < BETA_FLOOR
    if mask is not None:
        clamped &= mask.C
    absb = np.maximum(absb, BETA_FLOOR)
    mean = np.sqrt(state.lambda1_sq * state.sigma2[None, :]) / absb
    return mean, float(state.lambda1_sq), int(clamped.sum())


def delta2_params(state, B, mask):
    """Inverse Gaussian (mean, shape) for every delta2 entry, plus floor count."""
    w = np.sum(np.where(mask.C, B ** 2 / state.sigma2[None, :], 0.0), axis=1)
    clamped = (w < RATE_FLOOR) & mask.active_rows
    w = np.maximum(w, RATE_FLOOR)
    return np.sqrt(state.lambda2_sq / w), float(state.lambda2_sq), int(clamped.sum())


def sigma2_params(data, mask, state, B, hp):
    """Inverse gamma (shape, rate) for every sigma2_q, plus floor count."""
    shape = 0.5 * (data.N + mask.col_counts) + hp.sigma_shape
    penalty = np.sum(np.where(mask.C, B ** 2 * penalty_precisions(mask, state), 0.0), axis=0)
    rate = 0.5 * (residual_sums_gram(data, B) + penalty) + hp.sigma_rate
    clamped = int(np.sum(rate < RATE_FLOOR))
    return shape, np.maximum(rate, RATE_FLOOR), clamped


def lambda_params(state, mask, hp):
    """Gamma (shape, rate) pairs for lambda1_sq and lambda2_sq."""
    rows = mask.active_rows
    tau2 = 1.0 / state.delta1[mask.C]
    gam2 = 1.0 / np.asarray(state.delta2, dtype=float)[rows]
    shape1 = hp.a1 + mask.total
    rate1 = hp.b1 + 0.5 * tau2.sum()
    shape2 = hp.a2 + 0.5 * np.sum(mask.row_counts[rows] + 1.0)
    rate2 = hp.b2 + 0.5 * gam2.sum()
    return (shape1, rate1), (shape2, rate2)


# --- single-index updates ---------------------------------------------------

def update_beta_column(q, data, mask, state, rng):
    """Exact draw of beta_q from its Gaussian full conditional."""
    dq = penalty_precisions(mask, state)[:, q]
    z = rng.standard_normal(data.P)
    return _draw_beta(data.gram, dq, data.xty[:, q], state.sigma2[q], z, q, mask)


def update_delta1(p, q, state, B, rng):
    mean, shape, _ = delta1_params(state, B)
    return float(_rng.rinvgauss(rng, mean[p, q], shape))


def update_delta2(p, state, B, mask, rng):
    if mask.row_counts[p] < 1:
        raise InvalidInputError(f"row {p} has no penalized entries")
    mean, shape, _ = delta2_params(state, B, mask)
    return float(_rng.rinvgauss(rng, mean[p], shape))


def update_sigma2(q, data, mask, state, B, rng, hp=None):
    shape, rate, _ = sigma2_params(data, mask, state, B, hp or Hyperparameters())
    return float(rate[q] / rng.standard_gamma(shape[q]))


def update_lambdas(state, mask, hp, rng):
    (k1, r1), (k2, r2) = lambda_params(state, mask, hp)
    return float(rng.standard_gamma(k1) / r1), float(rng.standard_gamma(k2) / r2)


# --- log full conditionals (used to certify the updates) -------------------

def _log_invgauss(x, mean, shape):
    return 0.5 * (np.log(shape) - np.log(2 * np.pi) - 3 * np.log(x)) \
        - shape * (x - mean) ** 2 / (2 * mean ** 2 * x)


def _log_gamma(x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1) * np.log(x) - rate * x


def log_conditional_beta(q, beta_q, data, mask, state):
    A, mean = beta_conditional(q, data, mask, state)
    s2 = state.sigma2[q]
    L = np.linalg.cholesky(A)
    r = L.T @ (np.asarray(beta_q) - mean)
    P = data.P
    return float(-0.5 * P * np.log(2 * np.pi * s2) + np.sum(np.log(np.diag(L)))
                 - 0.5 * r @ r / s2)


def log_conditional_delta1(p, q, value, state, B):
    mean, shape, _ = delta1_params(state, B)
    return float(_log_invgauss(value, mean[p, q], shape))


def log_conditional_delta2(p, value, state, B, mask):
    mean, shape, _ = delta2_params(state, B, mask)
    return float(_log_invgauss(value, mean[p], shape))


def log_conditional_sigma2(q, value, data, mask, state, B, hp):
    shape, rate, _ = sigma2_params(data, mask, state, B, hp)
    a, b = shape[q], rate[q]
    return float(a * np.log(b) - gammaln(a) - (a + 1) * np.log(value) - b / value)


def log_conditional_lambdas(l1, l2, state, mask, hp):
    (k1, r1), (k2, r2) = lambda_params(state, mask, hp)
    return float(_log_gamma(l1, k1, r1) + _log_gamma(l2, k2, r2))


# --- full sweep -------------------------------------------------------------

def _beta_block(data, mask, state, gen, pool, workers):
    P, Q = data.P, data.Q
    D = penalty_precisions(mask, state)
    Z = gen.standard_normal((Q, P))
    B = np.empty((P, Q))

    def work(cols):
        for q in cols:
            B[:, q] = _draw_beta(data.gram, D[:, q], data.xty[:, q], state.sigma2[q],
                                 Z[q], q, mask)

    if pool is None or Q < 2:
        work(range(Q))
    else:
        chunks = [c for c in np.array_split(np.arange(Q), workers) if len(c)]
        for f in [pool.submit(work, c) for c in chunks]:
            f.result()
    return B


def gibbs_sweep(data, mask, state, hp, seed, iteration, counters=None, pool=None, workers=1):
    """One pass of the five block updates; ``state`` is updated in place, B returned."""
    counters = {} if counters is None else counters
    B = _beta_block(data, mask, state, _rng.substream(seed, iteration, _rng.BETA), pool, workers)

    gen = _rng.substream(seed, iteration, _rng.DELTA1)
    mean, shape, n = delta1_params(state, B, mask)
    z, u = gen.standard_normal(B.shape), gen.random(B.shape)
    state.delta1 = np.where(mask.C, _rng.inverse_gaussian(mean, shape, z, u), np.nan)
    counters["beta_floor"] = counters.get("beta_floor", 0) + n

    gen = _rng.substream(seed, iteration, _rng.DELTA2)
    mean, shape, n = delta2_params(state, B, mask)
    z, u = gen.standard_normal(data.P), gen.random(data.P)
    state.delta2 = np.where(mask.active_rows, _rng.inverse_gaussian(mean, shape, z, u), np.nan)
    counters["w_floor"] = counters.get("w_floor", 0) + n

    gen = _rng.substream(seed, iteration, _rng.SIGMA2)
    shape, rate, n = sigma2_params(data, mask, state, B, hp)
    state.sigma2 = rate / gen.standard_gamma(shape)
    counters["rate_floor"] = counters.get("rate_floor", 0) + n

    gen = _rng.substream(seed, iteration, _rng.LAMBDA)
    (k1, r1), (k2, r2) = lambda_params(state, mask, hp)
    g = gen.standard_gamma([k1, k2])
    state.lambda1_sq, state.lambda2_sq = float(g[0] / r1), float(g[1] / r2)
    return B


def run_chain(data, mask, config, state=None, callback=None):
    """Run the Gibbs sampler and return the retained draws.

    Parameters
    ----------
    data : RegressionData
    mask : ConstraintMask
    config : SamplerConfig
    state : LatentState, optional
        Starting latent values; the default initialization is used otherwise.
    callback : callable, optional
        Called as ``callback(iteration, B, state)`` after every sweep.

    Returns
    -------
    PosteriorArchive
    """
    if mask.shape != (data.P, data.Q):
        raise InvalidInputError(f"mask shape {mask.shape} does not match data ({data.P}, {data.Q})")
    state = LatentState.initial(data, mask) if state is None else state.copy()
    T = config.retained
    draws_B = np.empty((T, data.P, data.Q))
    draws_s2 = np.empty((T, data.Q))
    draws_l = np.empty((T, 2))
    counters = {}
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    t0 = time.perf_counter()
    k = 0
    try:
        for it in range(config.iterations):
            try:
                B = gibbs_sweep(data, mask, state, config.hp, config.seed, it, counters,
                                pool, config.workers)
            except BMasterError as exc:
                raise type(exc)(f"iteration {it}: {exc}") from exc
            if callback is not None:
                callback(it, B, state)
            j = it - config.burn_in + 1
            if j > 0 and j % config.thin == 0 and k < T:
                draws_B[k] = B
                draws_s2[k] = state.sigma2
                draws_l[k] = state.lambda1_sq, state.lambda2_sq
                k += 1
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.perf_counter() - t0
    return PosteriorArchive(draws_B, draws_s2, draws_l[:, 0].copy(), draws_l[:, 1].copy(),
                            N=data.N, seed=config.seed, config_hash=config.hash(),
                            counters=counters, elapsed=elapsed)
