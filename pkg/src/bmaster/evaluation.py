"""Classification, prediction and canonical-correlation metrics."""

import warnings

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from bmaster.errors import InvalidInputError
from bmaster.model import RegressionData


def confusion_counts(truth, selected):
    t = np.asarray(truth, dtype=bool).ravel()
    s = np.asarray(selected, dtype=bool).ravel()
    if t.shape != s.shape:
        raise InvalidInputError("truth and selection shapes differ")
    return {"TP": int(np.sum(t & s)), "FP": int(np.sum(~t & s)),
            "TN": int(np.sum(~t & ~s)), "FN": int(np.sum(t & ~s))}


def mcc(TP, FP, TN, FN):
    """Matthews correlation; zero when any margin of the 2x2 table is empty."""
    denom = float(TP + FP) * (TP + FN) * (TN + FP) * (TN + FN)
    if denom == 0:
        return 0.0
    return float((TP * TN - FP * FN) / np.sqrt(denom))


def _check_binary_truth(t):
    n1 = int(t.sum())
    if n1 == 0 or n1 == t.size:
        raise InvalidInputError("AUC is undefined when truth is all-positive or all-negative")
    return n1, t.size - n1


def auc(truth, scores):
    """Area under the ROC curve from the Mann-Whitney rank statistic (ties averaged)."""
    t = np.asarray(truth, dtype=bool).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    n1, n0 = _check_binary_truth(t)
    r = rankdata(s)
    return float((r[t].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def roc_curve(truth, scores):
    """Empirical ROC vertices (FPR, TPR), one per distinct score threshold.

    Tied scores move the curve diagonally, which is equivalent to averaging
    over tie orderings.
    """
    t = np.asarray(truth, dtype=bool).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    n1, n0 = _check_binary_truth(t)
    order = np.argsort(-s, kind="mergesort")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(t)[last]
    fp = np.cumsum(~t)[last]
    return np.r_[0.0, fp / n0], np.r_[0.0, tp / n1]


def partial_auc(truth, scores, max_fpr=0.2):
    """Raw area under the ROC curve for FPR in [0, max_fpr]."""
    fpr, tpr = roc_curve(truth, scores)
    stop = np.searchsorted(fpr, max_fpr, side="right")
    x = fpr[:stop]
    y = tpr[:stop]
    if stop < fpr.size and x[-1] < max_fpr:
        x0, x1, y0, y1 = fpr[stop - 1], fpr[stop], tpr[stop - 1], tpr[stop]
        x = np.r_[x, max_fpr]
        y = np.r_[y, y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0)]
    return float(np.trapezoid(y, x))


def auc20(truth, scores, max_fpr=0.2):
    """Partial AUC over FPR <= 0.2, standardized so a perfect scorer gets 1
    and a chance-level (diagonal) ROC gets 0.5."""
    a = partial_auc(truth, scores, max_fpr)
    lo, hi = 0.5 * max_fpr ** 2, max_fpr
    return float(0.5 * (1.0 + (a - lo) / (hi - lo)))


def classification_metrics(truth, selected, scores):
    """TPR, FPR, MCC, AUC, AUC20 and sparsity of an edge selection.

    ``scores`` ranks edges for the ROC-based metrics (by default the
    absolute posterior median). Those are NaN when the truth has no
    positives or no negatives.
    """
    c = confusion_counts(truth, selected)
    TP, FP, TN, FN = c["TP"], c["FP"], c["TN"], c["FN"]
    out = dict(c)
    out["TPR"] = TP / (TP + FN) if TP + FN else 0.0
    out["FPR"] = FP / (FP + TN) if FP + TN else 0.0
    out["MCC"] = mcc(TP, FP, TN, FN)
    if 0 < TP + FN < len(np.ravel(truth)):
        out["AUC"] = auc(truth, scores)
        out["AUC20"] = auc20(truth, scores)
        out["pAUC20_raw"] = partial_auc(truth, scores) / 0.2
    else:
        warnings.warn("truth has a single class; ROC metrics set to NaN")
        out["AUC"] = out["AUC20"] = out["pAUC20_raw"] = float("nan")
    out["sparsity"] = 1.0 - np.mean(np.asarray(selected, dtype=bool))
    out["true_sparsity"] = 1.0 - np.mean(np.asarray(truth, dtype=bool))
    return out


def prediction_errors(Yhat, Ytest):
    """RMSE and mean absolute deviation over all test cells."""
    Yhat = np.asarray(Yhat, dtype=float)
    Ytest = np.asarray(Ytest, dtype=float)
    if Yhat.shape != Ytest.shape:
        raise InvalidInputError(f"prediction shape {Yhat.shape} != test shape {Ytest.shape}")
    if Ytest.size == 0:
        raise InvalidInputError("empty test set")
    d = Yhat - Ytest
    return {"RMSE": float(np.sqrt(np.mean(d ** 2))), "MAD": float(np.mean(np.abs(d)))}


def first_canonical_correlation(Y, X, eps=1e-8):
    """Largest canonical correlation with ridge ``eps`` on both covariance blocks."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = Y.reshape(len(Y), -1) - Y.mean(axis=0)
    X = X.reshape(len(X), -1) - X.mean(axis=0)
    n = len(Y)
    Cyy = Y.T @ Y / (n - 1) + eps * np.eye(Y.shape[1])
    Cxx = X.T @ X / (n - 1) + eps * np.eye(X.shape[1])
    Cxy = X.T @ Y / (n - 1)
    Lx, Ly = np.linalg.cholesky(Cxx), np.linalg.cholesky(Cyy)
    M = np.linalg.solve(Lx, np.linalg.solve(Ly, Cxy.T).T)
    rho = np.linalg.svd(M, compute_uv=False)[0]
    return float(np.clip(rho, 0.0, 1.0))


def _drop_constant(M, what):
    keep = M.std(axis=0) > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance {what} column(s)")
    return M[:, keep]


def cumulative_canonical_correlation(Y_subset, X, ranked, eps=1e-8):
    """First canonical correlation of ``Y_subset`` with the top-k ranked predictors, k = 1..K.

    ``ranked`` is a sequence of predictor column indices, or of
    ``(row, fis, n)`` tuples as returned by the ranking functions.
    """
    ranked = [r[0] if isinstance(r, tuple) else int(r) for r in ranked]
    Y = np.asarray(Y_subset, dtype=float)
    Y = Y.reshape(len(Y), -1)
    if Y.shape[1] == 0 or not ranked:
        raise InvalidInputError("response subset and predictor list must be nonempty")
    Y = _drop_constant(Y, "response")
    X = np.asarray(X, dtype=float)
    curve = []
    for k in range(1, len(ranked) + 1):
        Xk = X[:, ranked[:k]]
        keep = Xk.std(axis=0) > 0
        if not keep[-1]:
            warnings.warn(f"dropping zero-variance predictor column {ranked[k - 1]}")
        Xk = Xk[:, keep]
        curve.append(first_canonical_correlation(Y, Xk, eps) if Xk.shape[1] else 0.0)
    return np.array(curve)


def split_indices(n, fraction, seed):
    if not 0 < fraction < 1:
        raise InvalidInputError(f"fraction must lie in (0, 1), got {fraction}")
    if n < 2:
        raise InvalidInputError("need at least two rows to split")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def train_test_split(data, fraction=0.8, seed=0):
    """Random disjoint row partition of a :class:`RegressionData`."""
    tr, te = split_indices(data.N, fraction, seed)
    make = lambda idx: RegressionData(data.X[idx], data.Y[idx], data.x_names, data.y_names)
    return make(tr), make(te)


def metrics_table(rows):
    """Replicate rows followed by ``mean`` and ``se`` summary rows."""
    df = pd.DataFrame(rows)
    df.insert(0, "replicate", [str(i + 1) for i in range(len(df))])
    num = df.drop(columns="replicate")
    n = len(num)
    mean = num.mean()
    se = num.std(ddof=1) / np.sqrt(n) if n > 1 else num.std(ddof=0) * 0.0
    summary = pd.DataFrame([mean, se])
    summary.insert(0, "replicate", ["mean", "se"])
    return pd.concat([df, summary], ignore_index=True)
