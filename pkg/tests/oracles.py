"""Brute-force reference implementations used to cross-check the library.

Everything here is deliberately naive (quadratic loops, no vectorization,
no shared code with the package) so a bug in the fast paths cannot hide in
its own oracle.
"""

from __future__ import annotations

import math


def iou_ref(a, b):
    """IoU of two (x_min, y_min, width, height) tuples."""
    ax1, ay1, aw, ah = a
    bx1, by1, bw, bh = b
    ix1 = max(ax1, bx1)
    iy1 = max(ay1, by1)
    ix2 = min(ax1 + aw, bx1 + bw)
    iy2 = min(ay1 + ah, by1 + bh)
    if ix2 <= ix1 or iy2 <= iy1:
        return 0.0
    inter = (ix2 - ix1) * (iy2 - iy1)
    return inter / (aw * ah + bw * bh - inter)


def nms_ref(entries, iou_threshold):
    """Greedy per-class NMS over (x, y, w, h, class_id, score) tuples.

    Returns the kept original indices in pick order (descending score,
    index breaking ties). Same-class boxes with IoU >= threshold are
    suppressed by an earlier pick.
    """
    order = sorted(range(len(entries)), key=lambda i: (-entries[i][5], i))
    removed = set()
    kept = []
    for i in order:
        if i in removed:
            continue
        kept.append(i)
        for j in order:
            if j in removed or j == i:
                continue
            if entries[j][4] != entries[i][4]:
                continue
            if iou_ref(entries[i][:4], entries[j][:4]) >= iou_threshold:
                removed.add(j)
    return kept


def ap_step_ref(flags, total_gt):
    """All-point interpolated AP by quadratic step integration.

    flags: list of (score, image_id, index, is_tp); the function sorts them
    itself and, for every recall step, rescans the whole tail for the best
    precision instead of keeping a running maximum.
    """
    ordered = sorted(flags, key=lambda f: (-f[0], f[1], f[2]))
    recalls = [0.0]
    precisions = [1.0]
    tp = fp = 0
    for score, image_id, index, is_tp in ordered:
        tp += 1 if is_tp else 0
        fp += 0 if is_tp else 1
        recalls.append(tp / total_gt)
        precisions.append(tp / (tp + fp))
    area = 0.0
    for k in range(1, len(recalls)):
        dr = recalls[k] - recalls[k - 1]
        if dr == 0.0:
            continue
        best = 0.0
        for j in range(k, len(recalls)):
            if precisions[j] > best:
                best = precisions[j]
        area += dr * best
    return area


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def decode_ref(values, anchors, stride, score_threshold, objectness_threshold):
    """Per-cell decode loop over a (3, 5+K, H, W) nested list/array.

    Returns (x_min, y_min, w, h, score, class_id) tuples in (anchor, row,
    column) scan order, filtered exactly like the library contract:
    objectness >= objectness_threshold and composite score >=
    score_threshold, class = first argmax of the class sigmoids.
    """
    out = []
    num_anchors = len(values)
    k = len(values[0]) - 5
    h = len(values[0][0])
    w = len(values[0][0][0])
    for a in range(num_anchors):
        for yy in range(h):
            for xx in range(w):
                t = [values[a][ch][yy][xx] for ch in range(5 + k)]
                obj = _sigmoid(t[4])
                if obj < objectness_threshold:
                    continue
                probs = [_sigmoid(v) for v in t[5:]]
                best = 0
                for ci in range(1, k):
                    if probs[ci] > probs[best]:
                        best = ci
                score = obj * probs[best]
                if score < score_threshold:
                    continue
                bx = (xx + _sigmoid(t[0])) * stride
                by = (yy + _sigmoid(t[1])) * stride
                bw = anchors[a][0] * math.exp(t[2])
                bh = anchors[a][1] * math.exp(t[3])
                out.append((bx - bw / 2, by - bh / 2, bw, bh, score, best))
    return out
