"""Data model and joint density of the multivariate shrinkage regression.

The generative hierarchy, for responses q and predictors p, is

    y_q | B, sigma2      ~ N(X beta_q, sigma2_q I)
    beta_pq | ...        ~ N(0, sigma2_q / (delta1_pq + delta2_p))   if c_pq = 1
                           flat                                       if c_pq = 0
    tau2_pq = 1/delta1   ~ Exp(rate lambda1_sq / 2)
    gamma2_p = 1/delta2  ~ Gamma((m_p + 1) / 2, rate lambda2_sq / 2)
    pi(sigma2_q)         ~ 1 / sigma2_q          (or a proper inverse gamma)
    lambda1_sq, lambda2_sq ~ Gamma(a1, b1), Gamma(a2, b2)

with the latent pair (tau2, gamma2) additionally carrying the factor
prod_{c_pq=1} (tau2_pq + gamma2_p)^(-1/2). That factor cancels the
(delta1 + delta2)^(1/2) normalizer of the coefficient prior, which is what
makes the delta updates exactly inverse Gaussian and integrates the
coefficients' prior back to exp(-lambda1 |u|_1 - lambda2 |u|_2) per row,
u = beta / sigma. All densities are expressed with respect to
(B, delta1, delta2, sigma2, lambda1_sq, lambda2_sq).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from bmaster.errors import DomainError, InvalidInputError

LOG_2PI = np.log(2.0 * np.pi)


def _finite(name, a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(a))[0])
        raise InvalidInputError(f"{name} has a non-finite entry at index {bad}")
    return a


@dataclass(frozen=True)
class RegressionData:
    """Predictors ``X`` (N x P) and responses ``Y`` (N x Q) with cached cross-products."""

    X: np.ndarray
    Y: np.ndarray
    x_names: tuple = None
    y_names: tuple = None
    gram: np.ndarray = field(init=False, repr=False)
    xty: np.ndarray = field(init=False, repr=False)
    yty: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = _finite("X", self.X)
        Y = _finite("Y", self.Y)
        if X.ndim != 2 or Y.ndim != 2:
            raise InvalidInputError("X and Y must be two-dimensional")
        if X.shape[0] != Y.shape[0]:
            raise InvalidInputError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if min(X.shape) < 1 or Y.shape[1] < 1:
            raise InvalidInputError("N, P and Q must all be at least 1")
        x_names = tuple(self.x_names) if self.x_names is not None else tuple(
            f"x{p + 1}" for p in range(X.shape[1]))
        y_names = tuple(self.y_names) if self.y_names is not None else tuple(
            f"y{q + 1}" for q in range(Y.shape[1]))
        if len(x_names) != X.shape[1] or len(y_names) != Y.shape[1]:
            raise InvalidInputError("name lists do not match matrix widths")
        gram = X.T @ X
        set_ = object.__setattr__
        set_(self, "X", X)
        set_(self, "Y", Y)
        set_(self, "x_names", x_names)
        set_(self, "y_names", y_names)
        set_(self, "gram", 0.5 * (gram + gram.T))
        set_(self, "xty", X.T @ Y)
        set_(self, "yty", np.einsum("nq,nq->q", Y, Y))

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def P(self):
        return self.X.shape[1]

    @property
    def Q(self):
        return self.Y.shape[1]


@dataclass(frozen=True)
class ConstraintMask:
    """Binary P x Q matrix; 1 marks a penalized coefficient, 0 an unpenalized one."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C)
        if C.ndim != 2:
            raise InvalidInputError("mask must be two-dimensional")
        if not np.all((C == 0) | (C == 1)):
            raise InvalidInputError("mask entries must be 0 or 1")
        object.__setattr__(self, "C", C.astype(bool))

    @classmethod
    def full(cls, P, Q):
        return cls(np.ones((P, Q), dtype=bool))

    @property
    def shape(self):
        return self.C.shape

    @property
    def row_counts(self):
        """m_p, penalized entries per predictor row."""
        return self.C.sum(axis=1)

    @property
    def col_counts(self):
        """s_q, penalized entries per response column."""
        return self.C.sum(axis=0)

    @property
    def total(self):
        return int(self.C.sum())

    @property
    def active_rows(self):
        return self.row_counts > 0


@dataclass
class Hyperparameters:
    """Gamma(shape, rate) hyperpriors on lambda1_sq and lambda2_sq.

    ``sigma_shape`` and ``sigma_rate`` give an inverse gamma prior on each
    sigma2_q; both zero (the default) means the Jeffreys prior 1/sigma2.
    """

    a1: float = 1.0
    b1: float = 1.0
    a2: float = 1.0
    b2: float = 1.0
    sigma_shape: float = 0.0
    sigma_rate: float = 0.0

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"hyperparameter {name} must be positive, got {v}")
        if self.sigma_shape < 0 or self.sigma_rate < 0:
            raise InvalidInputError("sigma prior parameters must be nonnegative")
        if (self.sigma_shape == 0) != (self.sigma_rate == 0):
            raise InvalidInputError("sigma prior needs both shape and rate, or neither")

    @property
    def jeffreys(self):
        return self.sigma_shape == 0


@dataclass
class LatentState:
    """Augmentation precisions, error variances and shrinkage levels.

    ``delta1`` holds NaN where the mask is 0 and ``delta2`` holds NaN for
    rows without penalized entries; those sentinels never enter a density.
    """

    delta1: np.ndarray
    delta2: np.ndarray
    sigma2: np.ndarray
    lambda1_sq: float
    lambda2_sq: float

    @classmethod
    def initial(cls, data, mask):
        P, Q = mask.shape
        delta1 = np.where(mask.C, 1.0, np.nan)
        delta2 = np.where(mask.active_rows, 1.0, np.nan)
        ddof = 1 if data.N > 1 else 0
        sigma2 = np.maximum(data.Y.var(axis=0, ddof=ddof), 1e-12)
        return cls(delta1, delta2, sigma2, 1.0, 1.0)

    def copy(self):
        return LatentState(self.delta1.copy(), self.delta2.copy(), self.sigma2.copy(),
                           float(self.lambda1_sq), float(self.lambda2_sq))

    def validate(self, mask):
        d1 = np.asarray(self.delta1, dtype=float)[mask.C]
        d2 = np.asarray(self.delta2, dtype=float)[mask.active_rows]
        for name, v in (("delta1", d1), ("delta2", d2), ("sigma2", self.sigma2),
                        ("lambda1_sq", self.lambda1_sq), ("lambda2_sq", self.lambda2_sq)):
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"{name} has non-finite entries")
            if not np.all(v > 0):
                raise DomainError(f"{name} must be strictly positive")


def _check_shapes(data, mask, B, state):
    P, Q = data.P, data.Q
    if mask.shape != (P, Q):
        raise InvalidInputError(f"mask shape {mask.shape} does not match ({P}, {Q})")
    if np.shape(B) != (P, Q):
        raise InvalidInputError(f"B shape {np.shape(B)} does not match ({P}, {Q})")
    if np.shape(state.delta1) != (P, Q) or np.shape(state.delta2) != (P,) \
            or np.shape(state.sigma2) != (Q,):
        raise InvalidInputError("latent state shapes do not match the data")


def residual_sums(data, B):
    """Column residual sums of squares ||y_q - X beta_q||^2."""
    B = np.asarray(B, dtype=float)
    if B.shape != (data.P, data.Q):
        raise InvalidInputError(f"B shape {B.shape} does not match ({data.P}, {data.Q})")
    R = data.Y - data.X @ B
    return np.einsum("nq,nq->q", R, R)


def residual_sums_gram(data, B):
    """Residual sums from the cached Gram matrix; cost independent of N."""
    rss = data.yty - 2.0 * np.einsum("pq,pq->q", B, data.xty) \
        + np.einsum("pq,pq->q", B, data.gram @ B)
    return np.maximum(rss, 0.0)


def gamma_logpdf(x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def log_prior_sigma2(sigma2, hp):
    sigma2 = np.asarray(sigma2, dtype=float)
    if hp.jeffreys:
        return -np.log(sigma2)
    a, b = hp.sigma_shape, hp.sigma_rate
    return a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(sigma2) - b / sigma2


def joint_log_density(data, mask, B, state, hp):
    """Log of the unnormalized joint density of data and all parameters.

    Returns the sum of the Gaussian likelihood, the conditional coefficient
    prior, the latent-precision priors (with their change-of-variable terms
    and coupling factor), the error-variance prior and the two Gamma
    hyperpriors.
    """
    B = _finite("B", B)
    _check_shapes(data, mask, B, state)
    state.validate(mask)
    C = mask.C
    m = mask.row_counts
    rows = mask.active_rows
    sigma2 = np.asarray(state.sigma2, dtype=float)
    l1, l2 = float(state.lambda1_sq), float(state.lambda2_sq)

    rss = residual_sums(data, B)
    total = np.sum(-0.5 * data.N * (LOG_2PI + np.log(sigma2)) - rss / (2.0 * sigma2))

    d1 = state.delta1[C]
    d2_row = np.broadcast_to(np.asarray(state.delta2, dtype=float)[:, None], C.shape)[C]
    s2_col = np.broadcast_to(sigma2[None, :], C.shape)[C]
    prec = (d1 + d2_row) / s2_col
    total += np.sum(-0.5 * LOG_2PI + 0.5 * np.log(prec) - 0.5 * B[C] ** 2 * prec)

    # tau2 ~ Exp(l1/2) and gamma2 ~ Gamma((m+1)/2, l2/2), densities carried to
    # the precision scale (Jacobian 1/delta^2)
    total += np.sum(np.log(l1 / 2.0) - 0.5 * l1 / d1 - 2.0 * np.log(d1))
    d2 = np.asarray(state.delta2, dtype=float)[rows]
    total += np.sum(gamma_logpdf(1.0 / d2, 0.5 * (m[rows] + 1.0), 0.5 * l2) - 2.0 * np.log(d2))
    total += np.sum(-0.5 * np.log(1.0 / d1 + 1.0 / d2_row))

    total += np.sum(log_prior_sigma2(sigma2, hp))
    total += gamma_logpdf(l1, hp.a1, hp.b1) + gamma_logpdf(l2, hp.a2, hp.b2)
    return float(total)
