"""Single-chain convergence diagnostics."""

import numpy as np
from scipy.linalg import solve_toeplitz

from bmaster.errors import InvalidInputError


def spectrum0(x, max_order=None):
    """Spectral density at frequency zero from an AR fit chosen by AIC.

    The AR coefficients come from the Yule-Walker equations; the order is
    searched up to ``10 log10(n)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    gamma0 = x @ x / n
    if gamma0 <= 0:
        return 0.0
    if max_order is None:
        max_order = int(min(n - 1, np.floor(10 * np.log10(n))))
    acov = np.array([x[: n - k] @ x[k:] / n for k in range(max_order + 1)])
    best = (n * np.log(gamma0), 0.0, gamma0)  # (aic, sum of coefficients, innovation var)
    for k in range(1, max_order + 1):
        phi = solve_toeplitz(acov[:k], acov[1 : k + 1])
        var = acov[0] - phi @ acov[1 : k + 1]
        if var <= 0:
            break
        aic = n * np.log(var) + 2 * k
        if aic < best[0]:
            best = (aic, phi.sum(), var)
    _, s, var = best
    return var / (1.0 - s) ** 2


def geweke_diagnostic(series, first=0.1, last=0.5):
    """Geweke z-score comparing the first 10% with the last 50% of a chain."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 50:
        raise InvalidInputError(f"Geweke diagnostic needs at least 50 draws, got {x.size}")
    if np.ptp(x) == 0:
        return 0.0
    n = x.size
    a = x[: int(np.floor(first * n))]
    b = x[n - int(np.floor(last * n)):]
    var = spectrum0(a) / a.size + spectrum0(b) / b.size
    if var <= 0:
        return 0.0
    return float((a.mean() - b.mean()) / np.sqrt(var))


def batch_means_mcse(series, batch_size=None):
    x = np.asarray(series, dtype=float).ravel()
    b = batch_size or int(np.floor(np.sqrt(x.size)))
    nb = x.size // b
    means = x[: nb * b].reshape(nb, b).mean(axis=1)
    return float(np.sqrt(means.var(ddof=1) / nb))


def mcse_sd_ratio(series):
    """Monte Carlo standard error as a percentage of the posterior SD (batch means)."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 100:
        raise InvalidInputError(f"MCSE/SD needs at least 100 draws, got {x.size}")
    sd = x.std(ddof=1)
    if sd < 1e-12:
        return 0.0
    return 100.0 * batch_means_mcse(x) / sd


def chain_summary(archive, entries=None, rng=None, n_entries=50):
    """Geweke z and MCSE/SD% for a sample of coefficients.

    Returns a dict with per-entry arrays and the worst values. When
    ``entries`` is not given, up to ``n_entries`` coefficients are drawn at
    random.
    """
    T, P, Q = archive.B.shape
    if entries is None:
        rng = np.random.default_rng(0) if rng is None else rng
        flat = np.arange(P * Q)
        k = min(n_entries, flat.size)
        entries = [divmod(int(i), Q) for i in rng.choice(flat, size=k, replace=False)]
    z = np.array([geweke_diagnostic(archive.B[:, p, q]) for p, q in entries])
    r = np.array([mcse_sd_ratio(archive.B[:, p, q]) for p, q in entries])
    return {"entries": entries, "geweke_z": z, "mcse_sd_pct": r,
            "max_abs_geweke": float(np.max(np.abs(z))) if z.size else 0.0,
            "max_mcse_sd_pct": float(np.max(r)) if r.size else 0.0}
