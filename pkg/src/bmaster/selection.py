"""Edge selection, Bayesian p-values and master-predictor scoring."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from bmaster.errors import InvalidInputError


def _draws(archive):
    B = archive.B if hasattr(archive, "B") else np.asarray(archive, dtype=float)
    if B.ndim != 3 or B.shape[0] == 0:
        raise InvalidInputError("expected a non-empty (T, P, Q) array of draws")
    return B


def bayes_p_value(draws, axis=0):
    """Two-sided tail probability with add-one correction, capped at 1.

    ``p = 2 min(#{draws >= 0} + 1, #{draws <= 0} + 1) / (T + 1)``

    Draws exactly at zero count toward both tails.
    """
    draws = np.asarray(draws, dtype=float)
    T = draws.shape[axis]
    if T < 1:
        raise InvalidInputError("need at least one draw")
    pos = np.sum(draws >= 0, axis=axis) + 1
    neg = np.sum(draws <= 0, axis=axis) + 1
    return np.minimum(2.0 * np.minimum(pos, neg) / (T + 1), 1.0)


def fractional_influence_scores(selected):
    """FIS_p = sum over responses q influenced by p of 1 / h_q."""
    S = np.asarray(selected, dtype=bool)
    h = S.sum(axis=0)
    w = np.divide(1.0, h, out=np.zeros(h.shape), where=h > 0)
    # running sum in column order, so results do not depend on BLAS blocking
    return np.cumsum(np.where(S, w, 0.0), axis=1)[:, -1] if S.shape[1] else np.zeros(S.shape[0])


def rank_master_predictors(scores, k=None, n_influenced=None, min_influenced=0):
    """Order predictors by FIS, then by responses influenced, then by index.

    Returns a list of ``(row, fis, n_influenced)`` tuples of length at most ``k``.
    """
    scores = np.asarray(scores, dtype=float)
    P = scores.size
    k = P if k is None else k
    if k > P:
        raise InvalidInputError(f"k = {k} exceeds the number of predictors {P}")
    n_inf = np.zeros(P, dtype=int) if n_influenced is None else np.asarray(n_influenced)
    order = np.lexsort((np.arange(P), -n_inf, -scores))
    order = [int(p) for p in order if n_inf[p] >= min_influenced]
    return [(p, float(scores[p]), int(n_inf[p])) for p in order[:k]]


def subset_top_predictors(selected, subset, k, names=None):
    """Master-predictor ranking with FIS recomputed over a subset of responses.

    ``subset`` holds response names (looked up in ``names``) or column
    indices. Predictors with no selected edge into the subset are omitted.
    """
    S = np.asarray(selected, dtype=bool)
    subset = list(subset)
    if not subset:
        raise InvalidInputError("response subset is empty")
    cols = []
    for s in subset:
        if names is not None and not isinstance(s, (int, np.integer)):
            try:
                cols.append(list(names).index(s))
            except ValueError:
                raise KeyError(f"unknown response id {s!r}") from None
        else:
            if not 0 <= int(s) < S.shape[1]:
                raise KeyError(f"response index {s} out of range")
            cols.append(int(s))
    sub = S[:, cols]
    return rank_master_predictors(fractional_influence_scores(sub), min(k, S.shape[0]),
                                  sub.sum(axis=1), min_influenced=1)


@dataclass
class SelectionReport:
    """Per-edge posterior summaries and per-predictor influence scores."""

    median: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    p_value: np.ndarray
    selected: np.ndarray
    alpha: float
    x_names: tuple = None
    y_names: tuple = None

    def __post_init__(self):
        P, Q = self.selected.shape
        if self.x_names is None:
            self.x_names = tuple(f"x{p + 1}" for p in range(P))
        if self.y_names is None:
            self.y_names = tuple(f"y{q + 1}" for q in range(Q))

    @property
    def sign(self):
        return np.sign(self.median).astype(int)

    @property
    def sparsity(self):
        return float(1.0 - self.selected.mean())

    @property
    def n_influenced(self):
        return self.selected.sum(axis=1)

    @property
    def fis(self):
        return fractional_influence_scores(self.selected)

    def ranking(self, k=None):
        return rank_master_predictors(self.fis, k, self.n_influenced)

    def edges_frame(self):
        P, Q = self.selected.shape
        pp, qq = np.meshgrid(np.arange(P), np.arange(Q), indexing="ij")
        pp, qq = pp.ravel(), qq.ravel()
        return pd.DataFrame({
            "predictor": np.asarray(self.x_names, dtype=object)[pp],
            "response": np.asarray(self.y_names, dtype=object)[qq],
            "median": self.median.ravel(),
            "lo": self.lo.ravel(),
            "hi": self.hi.ravel(),
            "p_value": self.p_value.ravel(),
            "selected": self.selected.ravel().astype(int),
            "sign": self.sign.ravel(),
        })

    def predictors_frame(self):
        ranked = self.ranking()
        return pd.DataFrame({
            "predictor": [self.x_names[p] for p, _, _ in ranked],
            "fis": [f for _, f, _ in ranked],
            "n_influenced": [n for _, _, n in ranked],
            "rank": np.arange(1, len(ranked) + 1),
        })

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.edges_frame().to_csv(out / "edges.csv", index=False, float_format="%.17g")
        self.predictors_frame().to_csv(out / "predictors.csv", index=False, float_format="%.17g")


def select_edges(archive, alpha=0.05, x_names=None, y_names=None):
    """Select edges whose equal-tailed (1 - alpha) credible interval excludes zero."""
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    B = _draws(archive)
    if B.shape[0] < 20:
        raise InvalidInputError(f"edge selection needs at least 20 draws, got {B.shape[0]}")
    lo, med, hi = np.quantile(B, [alpha / 2, 0.5, 1 - alpha / 2], axis=0)
    selected = (lo > 0) | (hi < 0)
    return SelectionReport(median=med, lo=lo, hi=hi, p_value=bayes_p_value(B), selected=selected,
                           alpha=alpha, x_names=x_names, y_names=y_names)
