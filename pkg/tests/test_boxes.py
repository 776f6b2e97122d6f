import random

import numpy as np
import pytest

from vceval.boxes import (
    BoundingBox,
    Detection,
    GroundTruthBox,
    boxes_to_xyxy,
    clip_to,
    iou,
    iou_matrix,
    nms,
)

from oracles import iou_ref, nms_ref


def random_box(rng, extent=200.0):
    x = rng.uniform(-20.0, extent)
    y = rng.uniform(-20.0, extent)
    w = rng.uniform(0.5, 80.0)
    h = rng.uniform(0.5, 80.0)
    return BoundingBox(x, y, w, h)


class TestBoundingBox:
    def test_derived_properties(self):
        box = BoundingBox(10.0, 20.0, 30.0, 40.0)
        assert box.x_max == 40.0
        assert box.y_max == 60.0
        assert box.area == 1200.0
        assert box.center == (25.0, 40.0)

    def test_translated(self):
        box = BoundingBox(10.0, 20.0, 30.0, 40.0).translated(-4.0, 6.0)
        assert (box.x_min, box.y_min) == (6.0, 26.0)
        assert (box.width, box.height) == (30.0, 40.0)

    @pytest.mark.parametrize("w,h", [(0.0, 5.0), (5.0, 0.0), (-1.0, 5.0)])
    def test_rejects_nonpositive_sides(self, w, h):
        with pytest.raises(ValueError):
            BoundingBox(0.0, 0.0, w, h)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            BoundingBox(float("nan"), 0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            BoundingBox(0.0, 0.0, float("inf"), 1.0)


class TestDetectionAndGroundTruth:
    def test_detection_validation(self):
        box = BoundingBox(0.0, 0.0, 1.0, 1.0)
        det = Detection(box=box, class_id=1, score=0.5)
        assert det.score == 0.5
        with pytest.raises(ValueError):
            Detection(box=box, class_id=-1, score=0.5)
        with pytest.raises(ValueError):
            Detection(box=box, class_id=0, score=1.5)
        with pytest.raises(ValueError):
            Detection(box=box, class_id=0, score=-0.1)

    def test_ground_truth_validation(self):
        box = BoundingBox(0.0, 0.0, 1.0, 1.0)
        assert GroundTruthBox(box=box, class_id=3).class_id == 3
        with pytest.raises(ValueError):
            GroundTruthBox(box=box, class_id=-2)


class TestIoU:
    def test_identical_boxes(self):
        box = BoundingBox(5.0, 5.0, 10.0, 10.0)
        assert iou(box, box) == 1.0

    def test_disjoint_boxes(self):
        a = BoundingBox(0.0, 0.0, 10.0, 10.0)
        b = BoundingBox(20.0, 20.0, 5.0, 5.0)
        assert iou(a, b) == 0.0

    def test_touching_edges_count_as_disjoint(self):
        a = BoundingBox(0.0, 0.0, 10.0, 10.0)
        b = BoundingBox(10.0, 0.0, 10.0, 10.0)
        assert iou(a, b) == 0.0

    def test_half_overlap(self):
        a = BoundingBox(0.0, 0.0, 10.0, 10.0)
        b = BoundingBox(5.0, 0.0, 10.0, 10.0)
        assert iou(a, b) == pytest.approx(50.0 / 150.0)

    def test_matches_reference_on_random_pairs(self):
        rng = random.Random(101)
        for _ in range(500):
            a = random_box(rng)
            b = random_box(rng)
            want = iou_ref(
                (a.x_min, a.y_min, a.width, a.height),
                (b.x_min, b.y_min, b.width, b.height),
            )
            assert iou(a, b) == pytest.approx(want, abs=1e-12)

    def test_symmetry(self):
        rng = random.Random(7)
        for _ in range(100):
            a = random_box(rng)
            b = random_box(rng)
            assert iou(a, b) == iou(b, a)


class TestClipTo:
    def test_inside_box_unchanged(self):
        box = BoundingBox(10.0, 10.0, 20.0, 20.0)
        clipped = clip_to(box, 100.0, 100.0)
        assert clipped == box

    def test_partial_overlap_clipped(self):
        box = BoundingBox(-5.0, 90.0, 20.0, 20.0)
        clipped = clip_to(box, 100.0, 100.0)
        assert clipped.x_min == 0.0
        assert clipped.y_min == 90.0
        assert clipped.width == 15.0
        assert clipped.height == 10.0

    def test_fully_outside_returns_none(self):
        assert clip_to(BoundingBox(200.0, 0.0, 10.0, 10.0), 100.0, 100.0) is None
        assert clip_to(BoundingBox(-50.0, -50.0, 10.0, 10.0), 100.0, 100.0) is None

    def test_touching_boundary_returns_none(self):
        # zero-width intersection is not a box
        assert clip_to(BoundingBox(100.0, 0.0, 10.0, 10.0), 100.0, 100.0) is None


class TestArrayHelpers:
    def test_boxes_to_xyxy(self):
        boxes = [BoundingBox(0.0, 0.0, 10.0, 20.0), BoundingBox(5.0, 5.0, 1.0, 2.0)]
        arr = boxes_to_xyxy(boxes)
        assert arr.dtype == np.float64
        assert arr.shape == (2, 4)
        np.testing.assert_allclose(arr[0], [0.0, 0.0, 10.0, 20.0])
        np.testing.assert_allclose(arr[1], [5.0, 5.0, 6.0, 7.0])

    def test_boxes_to_xyxy_empty(self):
        assert boxes_to_xyxy([]).shape == (0, 4)

    def test_iou_matrix_matches_scalar(self):
        rng = random.Random(31)
        rows = [random_box(rng) for _ in range(13)]
        cols = [random_box(rng) for _ in range(9)]
        mat = iou_matrix(rows, cols)
        assert mat.shape == (13, 9)
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                assert mat[i, j] == pytest.approx(iou(a, b), abs=1e-12)

    def test_iou_matrix_empty_sides(self):
        box = [BoundingBox(0.0, 0.0, 1.0, 1.0)]
        assert iou_matrix([], box).shape == (0, 1)
        assert iou_matrix(box, []).shape == (1, 0)


class TestNMS:
    def test_suppresses_same_class_overlap(self):
        dets = [
            Detection(BoundingBox(0.0, 0.0, 10.0, 10.0), 0, 0.9),
            Detection(BoundingBox(1.0, 1.0, 10.0, 10.0), 0, 0.8),
            Detection(BoundingBox(50.0, 50.0, 10.0, 10.0), 0, 0.7),
        ]
        kept = nms(dets, 0.45)
        assert [d.score for d in kept] == [0.9, 0.7]

    def test_classes_do_not_interact(self):
        dets = [
            Detection(BoundingBox(0.0, 0.0, 10.0, 10.0), 0, 0.9),
            Detection(BoundingBox(0.0, 0.0, 10.0, 10.0), 1, 0.8),
        ]
        assert len(nms(dets, 0.45)) == 2

    def test_threshold_boundary_is_inclusive(self):
        # IoU exactly at the threshold suppresses
        a = BoundingBox(0.0, 0.0, 10.0, 10.0)
        b = BoundingBox(5.0, 0.0, 10.0, 10.0)
        thr = iou(a, b)
        dets = [Detection(a, 0, 0.9), Detection(b, 0, 0.8)]
        assert len(nms(dets, thr)) == 1
        assert len(nms(dets, thr + 1e-9)) == 2

    def test_empty_input(self):
        assert nms([], 0.5) == []

    def test_score_tie_keeps_earlier_detection(self):
        a = Detection(BoundingBox(0.0, 0.0, 10.0, 10.0), 0, 0.8)
        b = Detection(BoundingBox(1.0, 1.0, 10.0, 10.0), 0, 0.8)
        kept = nms([a, b], 0.3)
        assert kept == [a]

    def test_matches_quadratic_reference(self):
        rng = random.Random(71)
        for _ in range(200):
            n = rng.randint(0, 12)
            dets = []
            entries = []
            for _ in range(n):
                box = BoundingBox(
                    rng.uniform(0.0, 40.0),
                    rng.uniform(0.0, 40.0),
                    rng.uniform(2.0, 25.0),
                    rng.uniform(2.0, 25.0),
                )
                cid = rng.randint(0, 2)
                score = round(rng.uniform(0.05, 1.0), 3)
                dets.append(Detection(box, cid, score))
                entries.append((box.x_min, box.y_min, box.width, box.height, cid, score))
            thr = rng.choice([0.3, 0.45, 0.6])
            kept = nms(dets, thr)
            want = [dets[i] for i in nms_ref(entries, thr)]
            assert kept == want
