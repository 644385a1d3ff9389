"""Abundance-table preprocessing: filtering, CLR, standardization and PCA."""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from bmaster.errors import EmptyResultError, InvalidInputError


@dataclass(frozen=True)
class AbundanceTable:
    """Samples x features nonnegative abundances."""

    values: np.ndarray
    features: tuple
    samples: tuple
    kind: str = "microbiome"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InvalidInputError("abundance table must be two-dimensional")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("abundance table has non-finite entries")
        if np.any(v < 0):
            i, j = np.argwhere(v < 0)[0]
            raise InvalidInputError(f"negative abundance at sample {i}, feature {j}")
        feats, samps = tuple(self.features), tuple(self.samples)
        if len(feats) != v.shape[1] or len(samps) != v.shape[0]:
            raise InvalidInputError("name lists do not match the table shape")
        if len(set(feats)) != len(feats) or len(set(samps)) != len(samps):
            raise InvalidInputError("feature and sample names must be unique")
        if self.kind not in ("microbiome", "metabolite"):
            raise InvalidInputError(f"unknown table kind {self.kind!r}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "samples", samps)

    @classmethod
    def from_frame(cls, df, kind="microbiome"):
        return cls(df.to_numpy(dtype=float), tuple(map(str, df.columns)),
                   tuple(map(str, df.index)), kind)

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.samples), columns=list(self.features))

    @classmethod
    def read_csv(cls, path, kind="microbiome", transpose=False):
        """Features-as-columns CSV with a header row and sample ids in the first column."""
        df = pd.read_csv(path, index_col=0)
        if transpose:
            df = df.T
        return cls.from_frame(df, kind)


def prevalence(table):
    return np.mean(table.values > 0, axis=0)


def mean_relative_abundance(table):
    totals = table.values.sum(axis=1, keepdims=True)
    rel = np.divide(table.values, totals, out=np.zeros_like(table.values), where=totals > 0)
    return rel.mean(axis=0)


def filter_features(table, min_prevalence=0.2, min_mean_rel_abundance=None):
    """Keep features present in at least ``min_prevalence`` of samples and,
    if given, with mean per-sample relative abundance at least
    ``min_mean_rel_abundance`` (a fraction: 0.01% is 1e-4)."""
    if not 0 <= min_prevalence <= 1:
        raise InvalidInputError("min_prevalence must lie in [0, 1]")
    keep = prevalence(table) >= min_prevalence
    if min_mean_rel_abundance is not None:
        if not 0 <= min_mean_rel_abundance <= 1:
            raise InvalidInputError("min_mean_rel_abundance must lie in [0, 1]")
        keep &= mean_relative_abundance(table) >= min_mean_rel_abundance
    if not keep.any():
        raise EmptyResultError(f"all {table.values.shape[1]} {table.kind} features were filtered out")
    return AbundanceTable(table.values[:, keep], tuple(np.asarray(table.features)[keep]),
                          table.samples, table.kind)


def clr_transform(table, pseudocount="half_min"):
    """Centered log-ratio transform, row by row.

    Zeros are replaced before the log according to ``pseudocount``:
    ``"half_min"`` uses half the smallest positive value in the whole table,
    ``"sample_half_min"`` half the smallest positive value in the same
    sample, and a positive number is used as is.
    """
    V = table.values if isinstance(table, AbundanceTable) else np.asarray(table, dtype=float)
    if np.any(V < 0):
        raise InvalidInputError("CLR needs nonnegative input")
    empty = ~np.any(V > 0, axis=1)
    if empty.any():
        raise InvalidInputError(f"sample {int(np.argmax(empty))} has no nonzero features")
    if pseudocount == "half_min":
        fill = np.full((V.shape[0], 1), 0.5 * V[V > 0].min())
    elif pseudocount == "sample_half_min":
        fill = 0.5 * np.where(V > 0, V, np.inf).min(axis=1, keepdims=True)
    else:
        fill = np.full((V.shape[0], 1), float(pseudocount))
        if fill[0, 0] <= 0:
            raise InvalidInputError("pseudocount must be positive")
    L = np.log(np.where(V > 0, V, fill))
    return L - L.mean(axis=1, keepdims=True)


def standardize_columns(M):
    """Center columns and scale to unit sample SD; constant columns are only centered."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] < 2:
        raise InvalidInputError("standardization needs at least two rows")
    means = M.mean(axis=0)
    sds = M.std(axis=0, ddof=1)
    flat = sds <= 1e-12 * np.maximum(1.0, np.abs(means))
    if flat.any():
        warnings.warn(f"{int(flat.sum())} zero-variance column(s) left centered but unscaled")
    scale = np.where(flat, 1.0, sds)
    return (M - means) / scale, means, np.where(flat, 0.0, sds)


def pca_scores(M, k=2):
    """Scores on the top-``k`` principal axes of the column-centered matrix.

    Each axis is signed so that its largest-magnitude loading is positive.

    Returns
    -------
    scores : (N, k) ndarray
    explained : dict
        ``singular_values`` (all, for a scree plot), ``variance`` and
        ``ratio`` for the k retained components.
    """
    M = np.asarray(M, dtype=float)
    N, C = M.shape
    if not 1 <= k <= min(N, C):
        raise InvalidInputError(f"k = {k} must lie in [1, {min(N, C)}]")
    Mc = M - M.mean(axis=0)
    U, s, Vt = np.linalg.svd(Mc, full_matrices=False)
    idx = np.argmax(np.abs(Vt[:k]), axis=1)
    flip = np.sign(Vt[np.arange(k), idx])
    flip[flip == 0] = 1.0
    scores = U[:, :k] * s[:k] * flip
    var = s ** 2 / max(N - 1, 1)
    total = var.sum()
    ratio = var[:k] / total if total > 0 else np.zeros(k)
    return scores, {"singular_values": s, "variance": var[:k], "ratio": ratio,
                    "loadings": Vt[:k].T * flip}
