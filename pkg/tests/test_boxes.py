import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Polygon

from lidarfuse.boxes import (
    Box3D,
    clip_convex,
    crop_with_margin,
    decode_residual,
    denormalize_points,
    encode_residual,
    inside_mask,
    iou_3d,
    nms,
    nms_indices,
    normalize_points,
    polygon_area,
    transform_box,
    wrap_angle,
)
from lidarfuse.propagation import TaggedPointCloud
from lidarfuse.se3 import RigidTransform

from oracles import brute_force_nms, monte_carlo_iou, random_box, shapely_iou

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=200)
@given(seeds)
def test_iou_matches_shapely(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng, 2.0), random_box(rng, 2.0)
    assert iou_3d(a, b) == pytest.approx(shapely_iou(a, b), abs=1e-9)


@given(seeds)
def test_iou_symmetric_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng, 2.0), random_box(rng, 2.0)
    v = iou_3d(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(iou_3d(b, a), abs=1e-12)
    assert iou_3d(a, a) == pytest.approx(1.0)


def test_iou_monte_carlo_spot_check():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a, b = random_box(rng, 1.0), random_box(rng, 1.0)
        assert abs(iou_3d(a, b) - monte_carlo_iou(a, b, 200_000, rng)) < 0.02


def test_iou_known_values():
    a = Box3D(0, 1.0, (0, 0, 0), (2, 2, 2), 0.0)
    b = Box3D(0, 1.0, (1, 0, 0), (2, 2, 2), 0.0)
    assert iou_3d(a, b) == pytest.approx(4 / 12)
    c = Box3D(0, 1.0, (0, 0, 0), (2, 2, 2), np.pi / 2)
    assert iou_3d(a, c) == pytest.approx(1.0)
    far = Box3D(0, 1.0, (10, 0, 0), (2, 2, 2), 0.3)
    assert iou_3d(a, far) == 0.0
    above = Box3D(0, 1.0, (0, 0, 2), (2, 2, 2), 0.0)
    assert iou_3d(a, above) == 0.0


@settings(max_examples=100)
@given(seeds)
def test_clip_matches_shapely(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng, 1.5), random_box(rng, 1.5)
    pa, pb = a.bev_corners(), b.bev_corners()
    got = polygon_area(clip_convex(pa, pb))
    assert got == pytest.approx(Polygon(pa).intersection(Polygon(pb)).area, abs=1e-9)


def test_bev_corners_ccw_area():
    b = Box3D(0, 0.5, (1, 2, 0), (4, 2, 1), 0.7)
    assert polygon_area(b.bev_corners()) == pytest.approx(8.0)
    c = b.bev_corners()
    signed = 0.5 * np.sum(c[:, 0] * np.roll(c[:, 1], -1) - np.roll(c[:, 0], -1) * c[:, 1])
    assert signed > 0


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(0, 10), st.sampled_from([0.0, 0.05, 0.1, 0.3, 0.7]))
def test_nms_matches_brute_force(seed, n, thr):
    rng = np.random.default_rng(seed)
    boxes = [random_box(rng, 2.5) for _ in range(n)]
    assert nms_indices(boxes, thr) == brute_force_nms(boxes, thr)


def test_nms_ties_by_index():
    b = Box3D(0, 0.5, (0, 0, 0), (2, 2, 2), 0.0)
    boxes = [b, b, b.with_score(0.9)]
    assert nms_indices(boxes, 0.5) == [2]
    assert nms_indices([b, b], 0.5) == [0]
    assert nms([], 0.5) == []
    with pytest.raises(ValueError):
        nms(boxes, 1.5)


@given(seeds)
def test_residual_round_trip(seed):
    rng = np.random.default_rng(seed)
    gt, prop = random_box(rng, 30.0), random_box(rng, 30.0)
    back = decode_residual(encode_residual(gt, prop), prop)
    np.testing.assert_allclose(back.center, gt.center, atol=1e-9)
    np.testing.assert_allclose(back.size, gt.size, atol=1e-9)
    assert abs(wrap_angle(back.yaw - gt.yaw)) < 1e-9


def test_residual_unit_circle_and_degenerate():
    rng = np.random.default_rng(0)
    u = encode_residual(random_box(rng), random_box(rng))
    assert u[6] ** 2 + u[7] ** 2 == pytest.approx(1.0)
    bad = np.zeros(8)
    with pytest.raises(ValueError):
        decode_residual(bad, random_box(rng))


@given(seeds)
def test_normalize_round_trip(seed):
    rng = np.random.default_rng(seed)
    box = random_box(rng, 20.0)
    pts = rng.normal(scale=5, size=(20, 3)) + np.array(box.center)
    back = denormalize_points(box, normalize_points(box, pts))
    np.testing.assert_allclose(back, pts, atol=1e-9)


def test_corners_normalize_to_unit_box():
    box = Box3D(0, 0.5, (3, -2, 0.4), (4, 2, 1.5), 1.1)
    q = normalize_points(box, box.corners())
    np.testing.assert_allclose(np.sort(np.unique(np.round(np.abs(q[:, :2]), 12))), [0.5])
    np.testing.assert_allclose(np.sort(np.unique(np.round(q[:, 2], 12))), [0.0, 1.0])


def test_inside_mask_and_crop():
    box = Box3D(0, 0.5, (0, 0, 0), (4, 2, 1), 0.0)
    pts = np.array([[0, 0, 0.5], [2.5, 0, 0.5], [0, 0, -0.5], [4.5, 0, 0.5]])
    assert inside_mask(box, pts).tolist() == [True, False, False, False]
    assert inside_mask(box, pts, 1.0).tolist() == [True, True, True, False]
    cloud = TaggedPointCloud(pts, [0.1, 0.2, 0.3, 0.4])
    crop = crop_with_margin(box, cloud, 1.0)
    np.testing.assert_array_equal(crop.traces, [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        inside_mask(box, pts, -1)


def test_transform_box_preserves_iou():
    rng = np.random.default_rng(4)
    a, b = random_box(rng, 1.0), random_box(rng, 1.0)
    t = RigidTransform.from_yaw(0.8, (5, -3, 1))
    assert iou_3d(transform_box(t, a), transform_box(t, b)) == pytest.approx(iou_3d(a, b), abs=1e-9)
    with pytest.raises(ValueError):
        transform_box(RigidTransform.from_rpy((0.2, 0, 0)), a)


def test_box_validation():
    with pytest.raises(ValueError):
        Box3D(0, 0.5, (0, 0, 0), (0, 1, 1), 0.0)
    with pytest.raises(ValueError):
        Box3D(0, 1.5, (0, 0, 0), (1, 1, 1), 0.0)
