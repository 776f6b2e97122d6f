# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: pairwise IoU, greedy NMS, detector-head decode.

Mirrors ``_fallback.py`` exactly (scan orders, tie-breaks, formulas); the
test suite asserts the two backends agree.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "compiled"


cdef inline double _sigmoid(double x) nogil:
    cdef double t
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    t = exp(x)
    return t / (1.0 + t)


cdef inline double _pair_iou(double ax1, double ay1, double ax2, double ay2,
                             double bx1, double by1, double bx2, double by2) nogil:
    cdef double ix1 = ax1 if ax1 > bx1 else bx1
    cdef double iy1 = ay1 if ay1 > by1 else by1
    cdef double ix2 = ax2 if ax2 < bx2 else bx2
    cdef double iy2 = ay2 if ay2 < by2 else by2
    cdef double iw = ix2 - ix1
    cdef double ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    cdef double inter = iw * ih
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union_ <= 0.0:
        return 0.0
    return inter / union_


def iou_matrix(a, b):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] aa = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bb = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = aa.shape[0], m = bb.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            out[i, j] = _pair_iou(aa[i, 0], aa[i, 1], aa[i, 2], aa[i, 3],
                                  bb[j, 0], bb[j, 1], bb[j, 2], bb[j, 3])
    return out


def nms_keep(boxes, scores, classes, order, double iou_threshold):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bx = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cls = np.ascontiguousarray(classes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ordv = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = bx.shape[0], pos, q, i, j, nkept = 0
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] alive = np.ones(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keep = np.empty(n, dtype=np.int64)
    cdef double iou
    if n == 0:
        return keep[:0]
    for pos in range(n):
        i = ordv[pos]
        if not alive[i]:
            continue
        keep[nkept] = i
        nkept += 1
        for q in range(pos + 1, n):
            j = ordv[q]
            if not alive[j] or cls[j] != cls[i]:
                continue
            iou = _pair_iou(bx[i, 0], bx[i, 1], bx[i, 2], bx[i, 3],
                            bx[j, 0], bx[j, 1], bx[j, 2], bx[j, 3])
            if iou >= iou_threshold:
                alive[j] = 0
    return keep[:nkept].copy()


def decode_grid(raw, anchors, double stride, double score_threshold,
                double objectness_threshold):
    cdef cnp.ndarray[cnp.float64_t, ndim=4] t = np.ascontiguousarray(raw, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] anc = np.ascontiguousarray(anchors, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t na = t.shape[0], nf = t.shape[1], h = t.shape[2], w = t.shape[3]
    cdef Py_ssize_t k = nf - 5, a, y, x, c, best, m = 0
    cdef double obj, p, best_p, score, bxc, byc, bw, bh
    cdef cnp.ndarray[cnp.float64_t, ndim=2] boxes = np.empty((na * h * w, 4), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.empty(na * h * w, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cls = np.empty(na * h * w, dtype=np.int64)
    for a in range(na):
        for y in range(h):
            for x in range(w):
                obj = _sigmoid(t[a, 4, y, x])
                if obj < objectness_threshold:
                    continue
                best = 0
                best_p = _sigmoid(t[a, 5, y, x])
                for c in range(1, k):
                    p = _sigmoid(t[a, 5 + c, y, x])
                    if p > best_p:
                        best_p = p
                        best = c
                score = obj * best_p
                if score < score_threshold:
                    continue
                bxc = (x + _sigmoid(t[a, 0, y, x])) * stride
                byc = (y + _sigmoid(t[a, 1, y, x])) * stride
                bw = anc[a, 0] * exp(t[a, 2, y, x])
                bh = anc[a, 1] * exp(t[a, 3, y, x])
                boxes[m, 0] = bxc - bw / 2.0
                boxes[m, 1] = byc - bh / 2.0
                boxes[m, 2] = bw
                boxes[m, 3] = bh
                scores[m] = score
                cls[m] = best
                m += 1
    return boxes[:m].copy(), scores[:m].copy(), cls[:m].copy()
