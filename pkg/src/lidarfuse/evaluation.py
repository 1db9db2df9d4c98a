"""3D average precision with distance tiers, and the uncertain-point proportion."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .boxes import Box3D, iou_matrix, score_order
from .propagation import TaggedPointCloud

UNCERTAIN_TRACE = 0.05


class Difficulty(enum.Enum):
    EASY = 20.0
    MODERATE = 30.0
    HARD = 50.0

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def max_distance(self) -> float:
        return self.value


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.7
    difficulty: Difficulty = Difficulty.HARD
    # "11" (original KITTI) or "40" (revised) recall sampling
    interpolation: str = "11"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if self.interpolation not in ("11", "40"):
            raise ValueError("interpolation must be '11' or '40'")


class Match(NamedTuple):
    det_index: int
    matched: bool
    score: float


@dataclass
class PRCurve:
    points: list = field(default_factory=list)
    ap: float = 0.0


def match_detections(dets: Sequence[Box3D], gts: Sequence[Box3D], iou_threshold: float = 0.7) -> list[Match]:
    """Greedy KITTI-style matching in descending score order.

    A detection is a true positive when its best-overlapping still-unmatched
    ground truth reaches ``iou_threshold``; each ground truth matches once.
    """
    if not dets:
        return []
    ious = iou_matrix(dets, gts)
    taken = np.zeros(len(gts), dtype=bool)
    out = []
    for i in score_order(dets):
        matched = False
        if len(gts):
            cand = np.where(taken, -1.0, ious[i])
            j = int(np.argmax(cand))
            if not taken[j] and cand[j] >= iou_threshold:
                taken[j] = True
                matched = True
        out.append(Match(i, matched, dets[i].score))
    return out


def recall_grid(interpolation: str = "11") -> np.ndarray:
    if interpolation == "11":
        return np.linspace(0.0, 1.0, 11)
    return np.linspace(1.0 / 40.0, 1.0, 40)


def average_precision(matches: Sequence[Match], n_gt: int, interpolation: str = "11") -> PRCurve:
    """Interpolated AP; precision at recall r is the best precision at any recall >= r.

    ``n_gt == 0`` gives ``nan`` since recall is undefined.
    """
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    ranked = sorted(matches, key=lambda m: -m.score)
    tp = np.cumsum([m.matched for m in ranked], dtype=float)
    n = np.arange(1, len(ranked) + 1, dtype=float)
    if n_gt == 0:
        return PRCurve([], float("nan"))
    recall = tp / n_gt
    precision = tp / n if len(ranked) else np.zeros(0)
    grid = recall_grid(interpolation)
    # tolerance so a recall of exactly 3/5 still counts at the 0.6 grid point
    reached = recall[None, :] >= grid[:, None] - 1e-12
    interp = [precision[m].max() if m.any() else 0.0 for m in reached]
    return PRCurve(list(zip(recall.tolist(), precision.tolist())), float(np.mean(interp)))


def bev_distance(box: Box3D) -> float:
    return float(np.hypot(box.center[0], box.center[1]))


def in_tier(box: Box3D, difficulty: Difficulty) -> bool:
    return bev_distance(box) < difficulty.max_distance


def filter_tier(boxes: Sequence[Box3D], difficulty: Difficulty) -> list[Box3D]:
    return [b for b in boxes if in_tier(b, difficulty)]


def evaluate(frames, cfg: EvalConfig = EvalConfig()) -> tuple[PRCurve, int, int]:
    """AP over ``(dets, gts)`` frames; matching per frame, ranking pooled.

    Returns ``(curve, n_gt, n_det)`` for the configured tier.
    """
    pooled: list[Match] = []
    n_gt = n_det = 0
    offset = 0
    for dets, gts in frames:
        d = filter_tier(dets, cfg.difficulty)
        g = filter_tier(gts, cfg.difficulty)
        for m in match_detections(d, g, cfg.iou_threshold):
            pooled.append(Match(m.det_index + offset, m.matched, m.score))
        offset += len(d)
        n_gt += len(g)
        n_det += len(d)
    return average_precision(pooled, n_gt, cfg.interpolation), n_gt, n_det


REPORT_THRESHOLDS = (0.7, 0.5)


def evaluation_report(frames, interpolation: str = "11") -> list[dict]:
    """Rows for every ``iou_threshold x difficulty`` cell."""
    frames = list(frames)
    rows = []
    for thr in REPORT_THRESHOLDS:
        for diff in Difficulty:
            curve, n_gt, n_det = evaluate(frames, EvalConfig(thr, diff, interpolation))
            rows.append({
                "difficulty": diff.label,
                "iou_threshold": thr,
                "ap": curve.ap,
                "n_gt": n_gt,
                "n_det": n_det,
            })
    return rows


def uncertain_fraction(cloud: TaggedPointCloud, threshold: float = UNCERTAIN_TRACE) -> float:
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    traces = cloud.traces if isinstance(cloud, TaggedPointCloud) else np.asarray(cloud, dtype=float)
    if len(traces) == 0:
        return 0.0
    return float(np.count_nonzero(traces > threshold) / len(traces))
