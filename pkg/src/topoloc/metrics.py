"""Localization metrics: grid counting error, greedy matching, F-scores.

All matchers are greedy and one-to-one: candidate (pred, gt) pairs are
visited by increasing distance (ties: smaller pred index, then smaller
gt index) and a pair is accepted when both endpoints are still free.

Empty-set conventions, applied uniformly: precision is 0 when there are
no predictions but ground truth exists, recall is 0 when there is no
ground truth but predictions exist, and both are 1 when the two sets
are empty. F is 0 whenever P + R = 0.

Multi-image aggregation should merge reports by summing tp/fp/fn per
threshold and recomputing the ratios (:func:`merge_match_reports`), not
by averaging per-image ratios.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .domain import DotAnnotation

_GAUSSIAN_GRID = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))
_AREA_EDGES = (10.0, 100.0, 1_000.0, 10_000.0, 100_000.0)


def _points(obj: Union[DotAnnotation, np.ndarray, Sequence]) -> np.ndarray:
    if isinstance(obj, DotAnnotation):
        return obj.points
    arr = np.asarray(obj, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("points must be finite")
    return arr


class GreedyMatch(NamedTuple):
    tp: int
    fp: int
    fn: int
    pairs: list[tuple[int, int]]


@dataclass(frozen=True)
class MatchThresholdRow:
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_score: float


@dataclass(frozen=True)
class MatchReport:
    rows: tuple[MatchThresholdRow, ...]
    mean_precision: float
    mean_recall: float
    mean_f: float

    def row_at(self, threshold: float) -> MatchThresholdRow:
        for row in self.rows:
            if abs(row.threshold - threshold) < 1e-9:
                return row
        raise KeyError(f"no row at threshold {threshold}")

    def precision_at(self, threshold: float) -> float:
        return self.row_at(threshold).precision

    def recall_at(self, threshold: float) -> float:
        return self.row_at(threshold).recall


@dataclass(frozen=True)
class GameReport:
    levels: tuple[int, ...]
    values: tuple[float, ...]
    n_images: int

    def value_at(self, level: int) -> float:
        return self.values[self.levels.index(level)]


@dataclass(frozen=True)
class AreaBucketRow:
    bucket: str
    gt_count: int
    recall_large: Optional[float]
    recall_small: Optional[float]


@dataclass(frozen=True)
class NwpuReport:
    tp_l: int
    fp_l: int
    fn_l: int
    precision_l: float
    recall_l: float
    f_l: float
    tp_s: int
    fp_s: int
    fn_s: int
    precision_s: float
    recall_s: float
    f_s: float
    recall_by_area: tuple[AreaBucketRow, ...]


def _ratios(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2.0 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _sorted_candidates(
    pred: np.ndarray, gt: np.ndarray, scale: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (pred, gt) pairs by ascending distance; ties by pred then gt index.

    ``scale`` optionally divides distances per gt point (normalized
    matching). Returns (dist, pred_idx, gt_idx) arrays in visit order.
    """
    if pred.shape[0] == 0 or gt.shape[0] == 0:
        empty = np.empty(0)
        return empty, empty.astype(np.int64), empty.astype(np.int64)
    d = np.sqrt(((pred[:, None, :] - gt[None, :, :]) ** 2).sum(axis=2))
    if scale is not None:
        d = d / scale[None, :]
    pi, gi = np.indices(d.shape)
    flat_d = d.ravel()
    flat_pi = pi.ravel()
    flat_gi = gi.ravel()
    order = np.lexsort((flat_gi, flat_pi, flat_d))
    return flat_d[order], flat_pi[order], flat_gi[order]


def _greedy_accept(
    n_pred: int, n_gt: int, dist: np.ndarray, pred_idx: np.ndarray, gt_idx: np.ndarray
) -> list[tuple[float, int, int]]:
    pred_free = np.ones(n_pred, dtype=bool)
    gt_free = np.ones(n_gt, dtype=bool)
    accepted = []
    for d, i, j in zip(dist.tolist(), pred_idx.tolist(), gt_idx.tolist()):
        if pred_free[i] and gt_free[j]:
            pred_free[i] = False
            gt_free[j] = False
            accepted.append((d, i, j))
            if len(accepted) == min(n_pred, n_gt):
                break
    return accepted


def greedy_match(
    pred: Union[DotAnnotation, np.ndarray],
    gt: Union[DotAnnotation, np.ndarray],
    threshold: float,
) -> GreedyMatch:
    """One-to-one greedy matching of points within ``threshold`` pixels."""
    if not np.isfinite(threshold) or threshold < 0:
        raise ValueError(f"threshold must be finite and >= 0, got {threshold}")
    p = _points(pred)
    g = _points(gt)
    dist, pi, gi = _sorted_candidates(p, g)
    keep = dist <= threshold
    accepted = _greedy_accept(len(p), len(g), dist[keep], pi[keep], gi[keep])
    tp = len(accepted)
    return GreedyMatch(tp, len(p) - tp, len(g) - tp, [(i, j) for _, i, j in accepted])


def _report_from_counts(
    thresholds: Sequence[float], tps: Sequence[int], n_pred: int, n_gt: int
) -> MatchReport:
    rows = []
    for t, tp in zip(thresholds, tps):
        p, r, f = _ratios(tp, n_pred - tp, n_gt - tp)
        rows.append(MatchThresholdRow(float(t), int(tp), n_pred - tp, n_gt - tp, p, r, f))
    return MatchReport(
        tuple(rows),
        float(np.mean([row.precision for row in rows])),
        float(np.mean([row.recall for row in rows])),
        float(np.mean([row.f_score for row in rows])),
    )


def qnrf_fscore(
    pred: Union[DotAnnotation, np.ndarray],
    gt: Union[DotAnnotation, np.ndarray],
    max_threshold: int = 100,
) -> MatchReport:
    """Precision/recall/F across pixel thresholds 1..max_threshold.

    Equivalent to running :func:`greedy_match` at every threshold: the
    greedy visit order is by distance, so the matching at a smaller
    threshold is a prefix of the matching at a larger one.
    """
    if max_threshold < 1:
        raise ValueError(f"max_threshold must be >= 1, got {max_threshold}")
    p = _points(pred)
    g = _points(gt)
    dist, pi, gi = _sorted_candidates(p, g)
    keep = dist <= max_threshold
    accepted = _greedy_accept(len(p), len(g), dist[keep], pi[keep], gi[keep])
    acc_d = np.array([d for d, _, _ in accepted])
    thresholds = list(range(1, max_threshold + 1))
    tps = [int((acc_d <= t).sum()) if acc_d.size else 0 for t in thresholds]
    return _report_from_counts(thresholds, tps, len(p), len(g))


def gaussian_response_eval(
    pred: Union[DotAnnotation, np.ndarray],
    gt: Union[DotAnnotation, np.ndarray],
    sigma: float,
    thresholds: Sequence[float] = _GAUSSIAN_GRID,
) -> MatchReport:
    """Scores matches by exp(-d^2 / (2 sigma^2)) against response thresholds.

    Matching greedily by decreasing response equals matching by
    increasing distance. A matched pair counts as a true positive at
    threshold t iff its response is >= t. AP/AR at 0.50 and 0.75 are
    ``report.precision_at(0.5)`` etc.; the means over the default grid
    are the mAP/mAR of the report.
    """
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    p = _points(pred)
    g = _points(gt)
    dist, pi, gi = _sorted_candidates(p, g)
    accepted = _greedy_accept(len(p), len(g), dist, pi, gi)
    responses = np.array([np.exp(-(d * d) / (2.0 * sigma * sigma)) for d, _, _ in accepted])
    tps = [int((responses >= t).sum()) if responses.size else 0 for t in thresholds]
    return _report_from_counts(thresholds, tps, len(p), len(g))


def nwpu_eval(
    pred: Union[DotAnnotation, np.ndarray], gt: DotAnnotation
) -> NwpuReport:
    """Box-normalized matching at two tolerance levels plus area breakdown.

    Each gt point admits a pred within sigma pixels, where sigma is
    sqrt(w^2 + h^2)/2 (large) or min(w, h)/2 (small) from its box.
    ``recall_by_area`` buckets gt boxes by area: A0 = [1, 10], then one
    decade per bucket, A5 = everything above 1e5; empty buckets report
    None for recall.
    """
    if not isinstance(gt, DotAnnotation) or gt.boxes is None:
        raise ValueError("nwpu_eval requires ground truth with boxes")
    p = _points(pred)
    g = gt.points
    w = gt.boxes[:, 0]
    h = gt.boxes[:, 1]
    sigma_l = np.sqrt(w * w + h * h) / 2.0
    sigma_s = np.minimum(w, h) / 2.0
    area = w * h
    buckets = np.searchsorted(_AREA_EDGES, area, side="left")

    def run(scale: np.ndarray) -> tuple[int, int, int, np.ndarray]:
        dist, pi, gi = _sorted_candidates(p, g, scale=scale)
        keep = dist <= 1.0
        accepted = _greedy_accept(len(p), len(g), dist[keep], pi[keep], gi[keep])
        matched_gt = np.zeros(len(g), dtype=bool)
        for _, _, j in accepted:
            matched_gt[j] = True
        tp = len(accepted)
        return tp, len(p) - tp, len(g) - tp, matched_gt

    tp_l, fp_l, fn_l, matched_l = run(sigma_l)
    tp_s, fp_s, fn_s, matched_s = run(sigma_s)
    p_l, r_l, f_l = _ratios(tp_l, fp_l, fn_l)
    p_s, r_s, f_s = _ratios(tp_s, fp_s, fn_s)
    rows = []
    for b in range(6):
        sel = buckets == b
        total = int(sel.sum())
        rows.append(
            AreaBucketRow(
                f"A{b}",
                total,
                float(matched_l[sel].sum() / total) if total else None,
                float(matched_s[sel].sum() / total) if total else None,
            )
        )
    return NwpuReport(
        tp_l, fp_l, fn_l, p_l, r_l, f_l,
        tp_s, fp_s, fn_s, p_s, r_s, f_s,
        tuple(rows),
    )


def game(
    preds: Sequence[Union[DotAnnotation, np.ndarray]],
    gts: Sequence[Union[DotAnnotation, np.ndarray]],
    dims: Sequence[tuple[int, int]],
    levels: Sequence[int] = (0, 1, 2, 3),
) -> GameReport:
    """Grid Average Mean absolute Error over aligned image lists.

    Level L splits each image into 2^L x 2^L equal cells (half-open,
    real-valued boundaries) and sums |pred count - gt count| over cells;
    the report averages over images. Level 0 is plain count MAE.
    """
    if not (len(preds) == len(gts) == len(dims)):
        raise ValueError(
            f"aligned lists required, got {len(preds)} preds, {len(gts)} gts, {len(dims)} dims"
        )
    if len(preds) == 0:
        raise ValueError("at least one image is required")
    levels = list(levels)
    if any(l < 0 for l in levels):
        raise ValueError(f"levels must be >= 0, got {levels}")
    totals = np.zeros(len(levels), dtype=np.float64)
    for idx, (pr, gt, (h, w)) in enumerate(zip(preds, gts, dims)):
        if h < 1 or w < 1:
            raise ValueError(f"image {idx} has non-positive dims {h}x{w}")
        p = _points(pr)
        g = _points(gt)
        for pts, name in ((p, "pred"), (g, "gt")):
            if pts.size and (
                (pts[:, 0] < 0).any()
                or (pts[:, 0] >= w).any()
                or (pts[:, 1] < 0).any()
                or (pts[:, 1] >= h).any()
            ):
                raise ValueError(f"{name} point outside {h}x{w} image {idx}")
        for li, level in enumerate(levels):
            side = 1 << level
            cell_h = h / side
            cell_w = w / side
            diff = np.zeros((side, side), dtype=np.int64)
            for pts, sign in ((p, 1), (g, -1)):
                if pts.size == 0:
                    continue
                iy = np.minimum((pts[:, 1] // cell_h).astype(np.int64), side - 1)
                ix = np.minimum((pts[:, 0] // cell_w).astype(np.int64), side - 1)
                np.add.at(diff, (iy, ix), sign)
            totals[li] += np.abs(diff).sum()
    values = tuple(float(v) / len(preds) for v in totals)
    return GameReport(tuple(int(l) for l in levels), values, len(preds))


def count_errors(
    preds: Sequence[Union[DotAnnotation, np.ndarray]],
    gts: Sequence[Union[DotAnnotation, np.ndarray]],
) -> tuple[float, float]:
    """Plain count MAE and RMSE over aligned image lists."""
    if len(preds) != len(gts) or not preds:
        raise ValueError("aligned non-empty lists required")
    diffs = np.array([len(_points(p)) - len(_points(g)) for p, g in zip(preds, gts)], dtype=float)
    return float(np.abs(diffs).mean()), float(np.sqrt((diffs**2).mean()))


def merge_match_reports(reports: Sequence[MatchReport]) -> MatchReport:
    """Aggregate per-image reports by summing counts, then re-deriving ratios."""
    if not reports:
        raise ValueError("nothing to merge")
    base = [row.threshold for row in reports[0].rows]
    for rep in reports[1:]:
        if [row.threshold for row in rep.rows] != base:
            raise ValueError("reports use different threshold grids")
    rows = []
    for i, t in enumerate(base):
        tp = sum(rep.rows[i].tp for rep in reports)
        fp = sum(rep.rows[i].fp for rep in reports)
        fn = sum(rep.rows[i].fn for rep in reports)
        p, r, f = _ratios(tp, fp, fn)
        rows.append(MatchThresholdRow(t, tp, fp, fn, p, r, f))
    return MatchReport(
        tuple(rows),
        float(np.mean([row.precision for row in rows])),
        float(np.mean([row.recall for row in rows])),
        float(np.mean([row.f_score for row in rows])),
    )
