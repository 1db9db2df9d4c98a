import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarfuse.boxes import Box3D
from lidarfuse.evaluation import (
    Difficulty,
    EvalConfig,
    Match,
    average_precision,
    evaluate,
    evaluation_report,
    filter_tier,
    in_tier,
    match_detections,
    uncertain_fraction,
)
from lidarfuse.propagation import TaggedPointCloud

from oracles import random_box, reference_match


def _box(x, y=0.0, score=0.5, yaw=0.0):
    return Box3D(0, score, (x, y, 0.0), (4.0, 2.0, 1.5), yaw)


def test_hand_computed_ap():
    # 5 ground truths, 7 ranked detections: T T F T F T F
    flags = [True, True, False, True, False, True, False]
    matches = [Match(i, f, 1.0 - 0.1 * i) for i, f in enumerate(flags)]
    curve = average_precision(matches, 5)
    # recall reaches 0.8 at most; precisions: r<=0.4 ->1, 0.5..0.6 -> 3/4, 0.7..0.8 -> 4/6
    expected = (5 * 1.0 + 2 * 0.75 + 2 * (4 / 6)) / 11
    assert curve.ap == pytest.approx(expected)


def test_perfect_and_empty_ap():
    matches = [Match(i, True, 0.9) for i in range(4)]
    assert average_precision(matches, 4).ap == pytest.approx(1.0)
    assert np.isnan(average_precision([], 0).ap)
    assert average_precision([], 3).ap == 0.0
    assert average_precision(matches, 4, "40").ap == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 10), st.integers(0, 10), st.sampled_from([0.1, 0.3, 0.5, 0.7]))
def test_matching_matches_reference(seed, nd, ng, thr):
    rng = np.random.default_rng(seed)
    dets = [random_box(rng, 2.0) for _ in range(nd)]
    gts = [random_box(rng, 2.0, score=1.0) for _ in range(ng)]
    got = [(m.det_index, m.matched) for m in match_detections(dets, gts, thr)]
    assert got == reference_match(dets, gts, thr)


def test_each_gt_matched_once():
    gt = _box(10)
    dets = [_box(10, score=0.9), _box(10.1, score=0.8)]
    ms = match_detections(dets, [gt], 0.5)
    assert [m.matched for m in ms] == [True, False]


def test_tiers_strict():
    assert in_tier(_box(19.999), Difficulty.EASY)
    assert not in_tier(_box(20.0), Difficulty.EASY)
    assert in_tier(_box(20.0), Difficulty.MODERATE)
    assert not in_tier(_box(50.0), Difficulty.HARD)
    boxes = [_box(5), _box(25), _box(45), _box(60)]
    assert [len(filter_tier(boxes, d)) for d in Difficulty] == [1, 2, 3]


def test_evaluate_pools_frames():
    gts1, gts2 = [_box(10), _box(-10)], [_box(0, 15)]
    dets1 = [_box(10, score=0.9)]
    dets2 = [_box(0, 15, score=0.8), _box(0, -15, score=0.95)]
    curve, n_gt, n_det = evaluate([(dets1, gts1), (dets2, gts2)], EvalConfig(0.7, Difficulty.EASY))
    assert (n_gt, n_det) == (3, 3)
    # ranks: F(0.95) T(0.9) T(0.8): recall 2/3 max
    expected = (7 * (2 / 3)) / 11
    assert curve.ap == pytest.approx(expected)


def test_report_rows():
    rows = evaluation_report([([_box(10, score=0.9)], [_box(10)])])
    assert [(r["difficulty"], r["iou_threshold"]) for r in rows] == [
        ("easy", 0.7), ("moderate", 0.7), ("hard", 0.7), ("easy", 0.5), ("moderate", 0.5), ("hard", 0.5)
    ]
    assert all(r["ap"] == pytest.approx(1.0) for r in rows)


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(0.0)
    with pytest.raises(ValueError):
        EvalConfig(0.7, Difficulty.HARD, "12")


def test_uncertain_fraction():
    c = TaggedPointCloud(np.zeros((4, 3)), [0.01, 0.05, 0.06, 0.2])
    assert uncertain_fraction(c) == 0.5
    assert uncertain_fraction([0.1, 0.0]) == 0.5
