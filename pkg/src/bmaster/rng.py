"""Counter-style random substreams and the inverse Gaussian variate."""

from functools import lru_cache

import numpy as np

# block identifiers for substream derivation; order matches the update schedule
BETA, DELTA1, DELTA2, SIGMA2, LAMBDA = range(5)


@lru_cache(maxsize=64)
def _philox_key(seed, prefix):
    ss = np.random.SeedSequence(seed, spawn_key=prefix)
    return ss.generate_state(2, np.uint64)


def substream(seed, *key):
    """Independent generator for ``(seed, *key)``.

    A counter-based Philox stream: the last two key entries set the high
    words of the counter (output only ever advances the low words), and any
    earlier entries are folded into the Philox key. The stream depends only
    on the seed and the key, never on the order in which streams are
    requested, so draws are invariant to how work is scheduled.
    """
    key = tuple(int(k) for k in key)
    if any(k < 0 for k in key):
        raise ValueError("substream keys must be nonnegative")
    prefix, tail = key[:-2], (0, 0) + key[-2:]
    counter = np.array([0, 0, tail[-2], tail[-1]], dtype=np.uint64)
    bitgen = np.random.Philox(key=_philox_key(int(seed), prefix), counter=counter)
    return np.random.Generator(bitgen)


def inverse_gaussian(mean, shape, normals, uniforms):
    """Inverse Gaussian variates by the Michael-Schucany-Haas transform.

    Parameters
    ----------
    mean, shape : array_like
        Mean and shape parameters (broadcastable, strictly positive).
    normals, uniforms : ndarray
        One standard normal and one uniform per variate. Passing the
        randomness in keeps each variate's draw a fixed slice of its stream.

    Returns
    -------
    ndarray
        Draws with the broadcast shape of the inputs.
    """
    mean = np.asarray(mean, dtype=float)
    shape = np.asarray(shape, dtype=float)
    y = np.square(normals)
    r = mean * y / (2.0 * shape)
    # smaller root of the chi-square(1) quadratic, written without cancellation
    x = mean / (1.0 + r + np.sqrt(r * (r + 2.0)))
    accept = uniforms * (mean + x) <= mean
    return np.where(accept, x, mean * (mean / x))


def rinvgauss(rng, mean, shape, size=None):
    """Draw inverse Gaussian variates from ``rng``."""
    size = np.broadcast(np.asarray(mean), np.asarray(shape)).shape if size is None else size
    return inverse_gaussian(mean, shape, rng.standard_normal(size), rng.random(size))
