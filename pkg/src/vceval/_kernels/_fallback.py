"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via
``VC_EVAL_KERNELS=python``). Must stay numerically interchangeable with
``_core.pyx``: same scan orders, same tie-breaks, same formulas.
"""

import numpy as np

BACKEND = "python"


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    t = np.exp(x[~pos])
    out[~pos] = t / (1.0 + t)
    return out


def iou_matrix(a, b):
    """Pairwise IoU of two corner-format box sets.

    a: (N, 4), b: (M, 4) float64 rows (x1, y1, x2, y2). Returns (N, M).
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.maximum(0.0, ix2 - ix1) * np.maximum(0.0, iy2 - iy1)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def nms_keep(boxes, scores, classes, order, iou_threshold):
    """Greedy per-class suppression.

    boxes: (N, 4) corner format, order: scan order (descending score,
    ties by original index). A candidate is suppressed by an already-kept
    detection of the same class when IoU >= iou_threshold. Returns kept
    original indices in scan order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64)
    classes = np.asarray(classes, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    n = boxes.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    x1, y1, x2, y2 = (boxes[:, i] for i in range(4))
    areas = (x2 - x1) * (y2 - y1)
    alive = np.ones(n, dtype=bool)
    keep = []
    for pos, i in enumerate(order):
        if not alive[i]:
            continue
        keep.append(i)
        rest = order[pos + 1:]
        rest = rest[alive[rest] & (classes[rest] == classes[i])]
        if rest.size == 0:
            continue
        ix1 = np.maximum(x1[i], x1[rest])
        iy1 = np.maximum(y1[i], y1[rest])
        ix2 = np.minimum(x2[i], x2[rest])
        iy2 = np.minimum(y2[i], y2[rest])
        inter = np.maximum(0.0, ix2 - ix1) * np.maximum(0.0, iy2 - iy1)
        union = areas[i] + areas[rest] - inter
        iou = np.zeros_like(inter)
        np.divide(inter, union, out=iou, where=union > 0.0)
        alive[rest[iou >= iou_threshold]] = False
    return np.asarray(keep, dtype=np.int64)


def decode_grid(raw, anchors, stride, score_threshold, objectness_threshold):
    """Decode one detector head into scored corner-format boxes.

    raw: (A, 5+K, H, W) float64 with per-anchor channels ordered
    (tx, ty, tw, th, objectness, class logits...). anchors: (A, 2)
    pixel (width, height). Candidates are scanned in (anchor, row, col)
    order; kept when sigmoid(objectness) >= objectness_threshold and
    objectness * best class probability >= score_threshold.

    Returns (boxes (M, 4) as x_min/y_min/width/height, scores (M,),
    class_ids (M,)).
    """
    raw = np.asarray(raw, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 2)
    a, _, h, w = raw.shape

    obj = _sigmoid(raw[:, 4])                       # (A, H, W)
    cls_prob = _sigmoid(raw[:, 5:])                 # (A, K, H, W)
    best_cls = np.argmax(cls_prob, axis=1)          # first max wins
    best_prob = np.take_along_axis(cls_prob, best_cls[:, None], axis=1)[:, 0]
    score = obj * best_prob
    kept = (obj >= objectness_threshold) & (score >= score_threshold)

    ai, yi, xi = np.nonzero(kept)                   # C order == (a, y, x) scan
    tx = raw[ai, 0, yi, xi]
    ty = raw[ai, 1, yi, xi]
    tw = raw[ai, 2, yi, xi]
    th = raw[ai, 3, yi, xi]
    bx = (xi + _sigmoid(tx)) * stride
    by = (yi + _sigmoid(ty)) * stride
    bw = anchors[ai, 0] * np.exp(tw)
    bh = anchors[ai, 1] * np.exp(th)

    boxes = np.stack([bx - bw / 2.0, by - bh / 2.0, bw, bh], axis=1)
    return boxes, score[ai, yi, xi], best_cls[ai, yi, xi].astype(np.int64)
