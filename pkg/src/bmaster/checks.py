"""Getting-it-right validation of the Gibbs sampler.

Two simulators target the same joint distribution of parameters and data:

* marginal-conditional: parameters from the prior, then data given them;
* successive-conditional: alternate one Gibbs sweep with a fresh data draw.

If every conditional update is correct, moments of any test function agree
between the two. Jeffreys' prior has no simulator, so a proper inverse gamma
prior on sigma2 is required, and every coefficient must be penalized.

Prior draws are exact. Integrating out the latent precisions leaves, per
predictor row with u = beta / sigma,

    pi(u | lambda) ∝ (lambda1 lambda2)^m exp(-lambda1 |u|_1 - lambda2 |u|_2),

which in polar form u = r w (|w|_2 = 1) gives w with density
∝ (lambda1 |w|_1 + lambda2)^(-m) on the sphere and r | w ~ Gamma(m, lambda1 |w|_1 + lambda2).
The lambdas and directions are drawn jointly by rejection from Gamma
proposals, using lambda1 |w|_1 + lambda2 >= 2 sqrt(lambda1 lambda2).
"""

import numpy as np

from bmaster import rng as _rng
from bmaster.diagnostics import batch_means_mcse
from bmaster.errors import InvalidInputError
from bmaster.model import ConstraintMask, Hyperparameters, LatentState, RegressionData
from bmaster.sampler import gibbs_sweep


def _draw_lambdas_and_directions(P, Q, hp, gen, batch=4096):
    s = P * Q
    while True:
        l1 = gen.gamma(hp.a1 + s / 4.0, 1.0 / hp.b1, batch)
        l2 = gen.gamma(hp.a2 + s / 4.0, 1.0 / hp.b2, batch)
        W = gen.standard_normal((batch, P, Q))
        W /= np.linalg.norm(W, axis=2, keepdims=True)
        a = np.abs(W).sum(axis=2)
        r1, r2 = np.sqrt(l1)[:, None], np.sqrt(l2)[:, None]
        log_acc = Q * np.sum(np.log(2.0 * np.sqrt(r1 * r2)) - np.log(r1 * a + r2), axis=1)
        ok = np.flatnonzero(np.log(gen.random(batch)) < log_acc)
        if ok.size:
            i = ok[0]
            return l1[i], l2[i], W[i], a[i]


def prior_draw(X, Q, hp, gen):
    """One exact draw of (B, LatentState, Y) from the joint with a full mask."""
    if hp.jeffreys:
        raise InvalidInputError("prior simulation needs a proper sigma2 prior")
    N, P = X.shape
    l1, l2, W, a = _draw_lambdas_and_directions(P, Q, hp, gen)
    lam1, lam2 = np.sqrt(l1), np.sqrt(l2)
    radius = gen.gamma(Q, 1.0 / (lam1 * a + lam2))
    U = W * radius[:, None]
    d1 = _rng.rinvgauss(gen, lam1 / np.maximum(np.abs(U), 1e-300), l1)
    d2 = _rng.rinvgauss(gen, lam2 / np.linalg.norm(U, axis=1), l2)
    sigma2 = hp.sigma_rate / gen.gamma(hp.sigma_shape, 1.0, Q)
    B = U * np.sqrt(sigma2)[None, :]
    state = LatentState(d1, d2, sigma2, float(l1), float(l2))
    Y = X @ B + np.sqrt(sigma2) * gen.standard_normal((N, Q))
    return B, state, Y


def default_statistics(B, state):
    """Twenty test functions of (B, sigma2, lambda1_sq, lambda2_sq)."""
    P, Q = B.shape
    picks = [(p % P, (p * 3 + 1) % Q) for p in range(6)]
    b = np.array([B[p, q] for p, q in picks])
    return np.concatenate([
        b,
        np.log1p(np.abs(b)),
        np.log(state.sigma2[:4]),
        [np.log(state.lambda1_sq), np.log(state.lambda2_sq),
         1.0 / (1.0 + state.lambda1_sq), 1.0 / (1.0 + state.lambda2_sq)],
    ])


def getting_it_right(X, Q, hp, n_marginal=20000, n_successive=50000, seed=0,
                     statistics=default_statistics):
    """Compare the two simulators; returns z-scores, one per test statistic.

    z uses the i.i.d. standard error for the marginal-conditional draws and a
    batch-means standard error for the autocorrelated successive chain.
    """
    X = np.asarray(X, dtype=float)
    P = X.shape[1]
    mask = ConstraintMask.full(P, Q)
    gen = _rng.substream(seed, 0)
    mc = np.array([statistics(*prior_draw(X, Q, hp, gen)[:2]) for _ in range(n_marginal)])

    gen = _rng.substream(seed, 1)
    B, state, Y = prior_draw(X, Q, hp, gen)
    sc = np.empty((n_successive, mc.shape[1]))
    for t in range(n_successive):
        B = gibbs_sweep(RegressionData(X, Y), mask, state, hp, seed + 1, t)
        Y = X @ B + np.sqrt(state.sigma2) * gen.standard_normal((X.shape[0], Q))
        sc[t] = statistics(B, state)

    se_mc = mc.std(axis=0, ddof=1) / np.sqrt(n_marginal)
    se_sc = np.array([batch_means_mcse(sc[:, j]) for j in range(sc.shape[1])])
    z = (mc.mean(axis=0) - sc.mean(axis=0)) / np.sqrt(se_mc ** 2 + se_sc ** 2)
    return {"z": z, "marginal_mean": mc.mean(axis=0), "successive_mean": sc.mean(axis=0)}


def gir_hyperparameters():
    """Proper priors used by the validation harness."""
    return Hyperparameters(a1=4.0, b1=2.0, a2=4.0, b2=2.0, sigma_shape=2.0, sigma_rate=2.0)
