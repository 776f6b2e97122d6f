"""Backend parity: the compiled core and the numpy fallback must be
numerically interchangeable — same values, same scan orders, same
tie-breaks."""

import os
import subprocess
import sys

import numpy as np
import pytest

from vceval import _kernels
from vceval._kernels import _fallback

try:
    from vceval._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def random_xyxy(rng, n, extent=120.0):
    x1 = rng.uniform(0.0, extent, size=n)
    y1 = rng.uniform(0.0, extent, size=n)
    w = rng.uniform(1.0, 50.0, size=n)
    h = rng.uniform(1.0, 50.0, size=n)
    return np.stack([x1, y1, x1 + w, y1 + h], axis=1)


def test_active_backend_is_valid():
    assert _kernels.backend_name() in ("compiled", "python")


@needs_core
def test_iou_matrix_parity():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = random_xyxy(rng, int(rng.integers(0, 40)))
        b = random_xyxy(rng, int(rng.integers(0, 40)))
        got = np.asarray(_core.iou_matrix(a, b))
        want = _fallback.iou_matrix(a, b)
        assert got.shape == want.shape
        np.testing.assert_array_equal(got, want)


@needs_core
def test_nms_keep_parity():
    rng = np.random.default_rng(23)
    for _ in range(50):
        n = int(rng.integers(0, 60))
        boxes = random_xyxy(rng, n)
        scores = np.round(rng.uniform(0.0, 1.0, size=n), 2)  # force ties
        classes = rng.integers(0, 3, size=n)
        order = np.lexsort((np.arange(n), -scores))
        for thr in (0.3, 0.5):
            got = np.asarray(_core.nms_keep(boxes, scores, classes, order, thr))
            want = _fallback.nms_keep(boxes, scores, classes, order, thr)
            np.testing.assert_array_equal(got, want)


@needs_core
def test_decode_grid_parity():
    # box values pass through exp/sigmoid, where libm (compiled) and
    # numpy's vectorized exp may legitimately disagree by one ulp; the
    # candidate set, scan order and class picks must still be identical
    rng = np.random.default_rng(37)
    anchors = np.array([[10.0, 13.0], [16.0, 30.0], [33.0, 23.0]])
    for _ in range(20):
        h = int(rng.integers(1, 14))
        w = int(rng.integers(1, 14))
        k = int(rng.integers(1, 4))
        raw = rng.normal(0.0, 2.0, size=(3, 5 + k, h, w))
        for score_thr, obj_thr in ((0.0, 0.0), (0.3, 0.0), (0.3, 0.3)):
            gb, gs, gc = _core.decode_grid(raw, anchors, 32.0, score_thr, obj_thr)
            wb, ws, wc = _fallback.decode_grid(raw, anchors, 32.0, score_thr, obj_thr)
            assert np.asarray(gb).shape == wb.shape
            np.testing.assert_array_equal(np.asarray(gc), wc)
            np.testing.assert_allclose(np.asarray(gb), wb, rtol=5e-15, atol=1e-12)
            np.testing.assert_allclose(np.asarray(gs), ws, rtol=5e-15, atol=0)


def test_decode_grid_scan_order_is_anchor_row_col():
    # two candidates in different anchors/cells must come out in
    # (anchor, row, col) order regardless of score
    raw = np.full((3, 6, 2, 2), -20.0)
    raw[2, 4, 0, 1] = 10.0   # anchor 2 first cell hit, high objectness
    raw[2, 5, 0, 1] = 10.0
    raw[0, 4, 1, 0] = 5.0    # anchor 0, later in score but earlier anchor
    raw[0, 5, 1, 0] = 5.0
    raw[0, 2, 1, 0] = 0.0    # tw = 0 so the decoded width is the raw anchor
    anchors = np.array([[10.0, 10.0], [20.0, 20.0], [30.0, 30.0]])
    boxes, scores, classes = _kernels.decode_grid(raw, anchors, 32.0, 0.5, 0.0)
    assert len(scores) == 2
    assert scores[0] < scores[1]  # anchor 0 candidate first despite lower score
    assert np.asarray(boxes)[0, 2] == pytest.approx(10.0 * np.exp(0.0))


def test_env_var_forces_backend():
    """VC_EVAL_KERNELS must pin the backend in a fresh interpreter."""
    for choice, expected in (("python", "python"), ("auto", None)):
        env = dict(os.environ, VC_EVAL_KERNELS=choice)
        out = subprocess.run(
            [sys.executable, "-c", "import vceval; print(vceval.backend_name())"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        got = out.stdout.strip()
        if expected is not None:
            assert got == expected
        else:
            assert got in ("compiled", "python")


def test_env_var_rejects_unknown_choice():
    env = dict(os.environ, VC_EVAL_KERNELS="fortran")
    out = subprocess.run(
        [sys.executable, "-c", "import vceval"],
        env=env,
        capture_output=True,
        text=True,
    )
    assert out.returncode != 0
    assert "VC_EVAL_KERNELS" in out.stderr


@needs_core
def test_compiled_choice_loads_core():
    env = dict(os.environ, VC_EVAL_KERNELS="compiled")
    out = subprocess.run(
        [sys.executable, "-c", "import vceval; print(vceval.backend_name())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "compiled"
