"""Agreement and classification statistics with bootstrap intervals.

Paired prediction/reference samples yield MAE, bias, and two R-squared
conventions; uncertainty comes from a seeded pair-level percentile
bootstrap. Classifier scores yield the ROC curve with Mann-Whitney AUC
(ties take half credit) and the precision-recall curve with step-wise
average precision. Test-retest pairs quantify annotation variability as
the human-precision yardstick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import (
    BootstrapDegenerate,
    DegenerateVariance,
    InvalidConfig,
    LengthMismatch,
    SingleClass,
)

PEARSON_SQ = "PEARSON_SQ"
COD = "COD"

MAE = "mae"
R2 = "r2"
BIAS = "bias"

_BOOT_CHUNK = 4096


@dataclass(frozen=True)
class PairedSample:
    """Matched prediction/reference values (cm) keyed by study id."""

    ids: tuple
    pred: np.ndarray
    ref: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.pred, dtype=np.float64)
        ref = np.asarray(self.ref, dtype=np.float64)
        ids = tuple(self.ids)
        if pred.ndim != 1 or ref.ndim != 1 or len(ids) != pred.size or pred.size != ref.size:
            raise LengthMismatch(
                "ids, pred, and ref must be equal-length vectors",
                n_ids=len(ids),
                n_pred=int(pred.size),
                n_ref=int(ref.size),
            )
        if pred.size < 2:
            raise LengthMismatch("paired sample needs at least two pairs", n=int(pred.size))
        if not (np.isfinite(pred).all() and np.isfinite(ref).all()):
            raise InvalidConfig("paired values must be finite")
        object.__setattr__(self, "pred", pred)
        object.__setattr__(self, "ref", ref)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return int(self.pred.size)


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 10_000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.n_resamples < 1:
            raise InvalidConfig("n_resamples must be >= 1")
        if not (0.0 < self.level < 1.0):
            raise InvalidConfig("level must lie in (0, 1)", level=self.level)


@dataclass(frozen=True)
class ScoredLabels:
    """Classifier scores with binary labels; both classes must appear."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels)
        if scores.ndim != 1 or labels.shape != scores.shape:
            raise LengthMismatch(
                "scores and labels must be equal-length vectors",
                n_scores=int(scores.size),
                n_labels=int(labels.size),
            )
        if not np.isin(labels, (0, 1)).all():
            raise InvalidConfig("labels must be 0 or 1")
        labels = labels.astype(np.int8)
        if labels.min() == labels.max():
            raise SingleClass("need at least one positive and one negative label")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return int(self.labels.size - self.labels.sum())


def mae(sample: PairedSample) -> float:
    """Mean absolute difference between predictions and references."""
    return float(np.abs(sample.pred - sample.ref).mean())


def bias(sample: PairedSample) -> float:
    """Mean signed difference, prediction minus reference."""
    return float((sample.pred - sample.ref).mean())


def r_squared(sample: PairedSample, mode: str = PEARSON_SQ) -> float:
    """Agreement R-squared in one of two conventions.

    PEARSON_SQ is the squared Pearson correlation (affine-invariant);
    COD is the coefficient of determination 1 - SS_res/SS_tot, which
    additionally penalizes calibration offset and scale. Raises
    DegenerateVariance when the needed variance vanishes.
    """
    p, r = sample.pred, sample.ref
    if mode == PEARSON_SQ:
        pv = p - p.mean()
        rv = r - r.mean()
        denom = math.sqrt(float((pv * pv).sum()) * float((rv * rv).sum()))
        if denom == 0.0:
            raise DegenerateVariance("PEARSON_SQ undefined for a constant vector")
        return float(((pv * rv).sum() / denom) ** 2)
    if mode == COD:
        ss_tot = float(((r - r.mean()) ** 2).sum())
        if ss_tot == 0.0:
            raise DegenerateVariance("COD undefined for a constant reference")
        ss_res = float(((r - p) ** 2).sum())
        return 1.0 - ss_res / ss_tot
    raise InvalidConfig("unknown r_squared mode", mode=mode)


def _point_statistic(sample: PairedSample, statistic: str, r2_mode: str) -> float:
    if statistic == MAE:
        return mae(sample)
    if statistic == BIAS:
        return bias(sample)
    if statistic == R2:
        return r_squared(sample, r2_mode)
    raise InvalidConfig("unknown bootstrap statistic", statistic=statistic)


def _resampled_stats(p, r, idx, statistic: str, r2_mode: str):
    """Vectorized per-resample statistics plus a degenerate-row mask."""
    rp = p[idx]
    rr = r[idx]
    if statistic == MAE:
        return np.abs(rp - rr).mean(axis=1), None
    if statistic == BIAS:
        return (rp - rr).mean(axis=1), None
    pv = rp - rp.mean(axis=1, keepdims=True)
    rv = rr - rr.mean(axis=1, keepdims=True)
    if r2_mode == PEARSON_SQ:
        denom_sq = (pv * pv).sum(axis=1) * (rv * rv).sum(axis=1)
        bad = denom_sq == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = ((pv * rv).sum(axis=1)) ** 2 / denom_sq
        return vals, bad
    ss_tot = (rv * rv).sum(axis=1)
    bad = ss_tot == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = 1.0 - ((rr - rp) ** 2).sum(axis=1) / ss_tot
    return vals, bad


def bootstrap_ci(
    sample: PairedSample,
    statistic: str,
    cfg: BootstrapConfig = BootstrapConfig(),
    r2_mode: str = PEARSON_SQ,
) -> dict:
    """Percentile bootstrap interval for an agreement statistic.

    Pairs (not residuals) are resampled with replacement, deterministically
    from cfg.seed. Returns {"point", "lo", "hi", "n_skipped"} where lo/hi
    are the (1 +- level)/2 percentiles with linear interpolation between
    order statistics. Resamples on which the statistic is undefined are
    skipped and counted; more than 1% skipped raises BootstrapDegenerate.
    """
    point = _point_statistic(sample, statistic, r2_mode)
    rng = np.random.default_rng(cfg.seed)
    n = sample.n
    collected = []
    skipped = 0
    remaining = cfg.n_resamples
    while remaining > 0:
        block = min(_BOOT_CHUNK, remaining)
        idx = rng.integers(0, n, size=(block, n))
        vals, bad = _resampled_stats(sample.pred, sample.ref, idx, statistic, r2_mode)
        if bad is not None and bad.any():
            skipped += int(bad.sum())
            vals = vals[~bad]
        collected.append(vals)
        remaining -= block
    if skipped > 0.01 * cfg.n_resamples:
        raise BootstrapDegenerate(
            "too many degenerate bootstrap resamples",
            skipped=skipped,
            n_resamples=cfg.n_resamples,
        )
    stats = np.concatenate(collected)
    tail = 100.0 * (1.0 - cfg.level) / 2.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail], method="linear")
    return {"point": point, "lo": float(lo), "hi": float(hi), "n_skipped": skipped}


def roc_auc(data: ScoredLabels) -> tuple:
    """AUC plus the full ROC curve.

    AUC is the Mann-Whitney probability that a random positive outscores
    a random negative, with ties worth half. The curve holds one
    (fpr, tpr, threshold) triple per distinct score, descending, behind a
    leading (0, 0) anchor; each point classifies scores >= threshold as
    positive.
    """
    scores, labels = data.scores, data.labels
    ranks = rankdata(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    n_pos, n_neg = data.n_pos, data.n_neg
    auc = (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]
    distinct = np.flatnonzero(np.diff(s_sorted) != 0.0)
    cut = np.concatenate([distinct, [s_sorted.size - 1]])
    tp = np.cumsum(l_sorted)[cut]
    fp = np.cumsum(1 - l_sorted)[cut]
    curve = [(0.0, 0.0, math.inf)]
    curve += [
        (float(f) / n_neg, float(t) / n_pos, float(s_sorted[c]))
        for f, t, c in zip(fp, tp, cut)
    ]
    return float(auc), curve


def precision_recall(data: ScoredLabels) -> tuple:
    """Average precision plus the precision-recall curve.

    Thresholds sweep the distinct scores in descending order; average
    precision is sum_k (R_k - R_{k-1}) * P_k with R_0 = 0. Curve points
    are (recall, precision, threshold) triples.
    """
    scores, labels = data.scores, data.labels
    n_pos = data.n_pos
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]
    distinct = np.flatnonzero(np.diff(s_sorted) != 0.0)
    cut = np.concatenate([distinct, [s_sorted.size - 1]])
    tp = np.cumsum(l_sorted)[cut].astype(np.float64)
    predicted = cut + 1.0
    precision = tp / predicted
    recall = tp / n_pos
    ap = 0.0
    prev_r = 0.0
    for p, r in zip(precision, recall):
        ap += (r - prev_r) * p
        prev_r = r
    curve = [
        (float(r), float(p), float(s_sorted[c]))
        for r, p, c in zip(recall, precision, cut)
    ]
    return float(ap), curve


def test_retest(pairs: PairedSample) -> dict:
    """Repeatability of two annotations of the same quantity.

    ``ref`` holds the first reading, ``pred`` the second; returns the
    mean absolute difference, mean signed difference, and sample sd of
    (second - first).
    """
    d = pairs.pred - pairs.ref
    return {
        "mae": float(np.abs(d).mean()),
        "bias": float(d.mean()),
        "sd_of_diff": float(d.std(ddof=1)),
    }
