"""Benchmark the compiled kernel extension against the pure-Python fallback.

Runs the three hot kernels (pairwise IoU, greedy NMS, head decode) on
synthetic workloads sized like a real batch evaluation and prints a small
table of per-call timings and speedups.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from vceval._kernels import _fallback


def _load_compiled():
    try:
        return importlib.import_module("vceval._kernels._core")
    except ImportError:
        return None


def _boxes(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xy = rng.uniform(0, 2000, size=(n, 2))
    wh = rng.uniform(4, 120, size=(n, 2))
    boxes = np.concatenate([xy, xy + wh], axis=1)
    scores = rng.uniform(0, 1, size=n)
    classes = rng.integers(0, 2, size=n).astype(np.int64)
    return boxes, scores, classes


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    compiled = _load_compiled()
    if compiled is None:
        print("compiled extension not available; showing fallback timings only")
    backends = [("python", _fallback)] + ([("compiled", compiled)] if compiled else [])

    rng = np.random.default_rng(1234)
    boxes_a, _, _ = _boxes(rng, 400)
    boxes_b, _, _ = _boxes(rng, 300)
    nms_boxes, nms_scores, nms_classes = _boxes(rng, 2000)
    order = np.lexsort((np.arange(len(nms_scores)), -nms_scores)).astype(np.int64)
    raw = rng.normal(size=(3, 7, 52, 52))
    anchors = np.array([[10.0, 13.0], [16.0, 30.0], [33.0, 23.0]])

    workloads = [
        ("iou_matrix 400x300", lambda m: m.iou_matrix(boxes_a, boxes_b)),
        (
            "nms_keep n=2000",
            lambda m: m.nms_keep(nms_boxes, nms_scores, nms_classes, order, 0.45),
        ),
        (
            "decode_grid 52x52 K=2",
            lambda m: m.decode_grid(np.ascontiguousarray(raw), anchors, 8.0, 0.3, 0.0),
        ),
    ]

    timings: dict[str, dict[str, float]] = {}
    for name, work in workloads:
        timings[name] = {}
        for label, module in backends:
            timings[name][label] = _time(lambda: work(module), args.repeat)

    width = max(len(n) for n, _ in workloads)
    header = f"{'workload':<{width}}  {'python':>10}"
    if compiled:
        header += f"  {'compiled':>10}  {'speedup':>8}"
    print(header)
    for name, _ in workloads:
        t = timings[name]
        line = f"{name:<{width}}  {t['python'] * 1e3:>8.2f}ms"
        if compiled:
            line += f"  {t['compiled'] * 1e3:>8.2f}ms  {t['python'] / t['compiled']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
