"""Command-line harness: tile -> split -> decode -> eval -> compare -> report.

Every command resolves its configuration from defaults, an optional JSON
config file (--config or the VC_EVAL_CONFIG environment variable), and
per-flag overrides, in that order. File writes are whole-file atomic
(write to a temp file, then rename). Exit codes: 0 success, 2 malformed
or missing input data, 3 configuration violations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from . import stats as statsmod
from .boxes import Detection, GroundTruthBox, nms
from .config import CONFIG_ENV_VAR, HarnessConfig, load_config
from .dataio import (
    AnnotatedImage,
    parse_detection_file,
    parse_label_file,
    read_image_manifest,
    read_tensor,
    split_dataset,
    write_detection_file,
    write_label_file,
)
from .errors import ConfigError, ShapeMismatch, VCEvalError
from .metrics import evaluate, write_metric_csv, write_pr_curve_csv
from .netops import AnchorBox, decode_head, grid_shape
from .tiler import make_tile_id, plan_tiles, remap_to_tile, write_tile_manifest

SCALE_SUFFIXES = (".s0.vct", ".s1.vct", ".s2.vct")
OBSERVATION_HEADER = "run_id,metric,group,value"


def _write_text(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _echo_config(out_dir: str, config: HarnessConfig) -> None:
    _write_text(
        os.path.join(out_dir, "config_used.json"),
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
    )


def _class_label(config: HarnessConfig, class_id: int) -> str:
    if 0 <= class_id < len(config.class_names):
        return config.class_names[class_id]
    return str(class_id)


def cmd_tile(args: argparse.Namespace, config: HarnessConfig) -> int:
    tile_size = args.tile_size if args.tile_size is not None else config.input_size
    if tile_size <= 0 or tile_size % 32 != 0:
        raise ConfigError(f"tile size {tile_size} is not a positive multiple of 32")
    images = read_image_manifest(_read_text(args.manifest))
    os.makedirs(args.out_dir, exist_ok=True)
    manifest_rows = []
    kept = total = 0
    for entry in images:
        label_path = os.path.join(args.labels_dir, entry.image_id + ".txt")
        if os.path.exists(label_path):
            gts = parse_label_file(_read_text(label_path), entry.width, entry.height)
        else:
            gts = []
        total += len(gts)
        layout = plan_tiles(entry.width, entry.height, tile_size, args.policy)
        for ref in layout.tiles():
            tile_id = make_tile_id(entry.image_id, ref.row, ref.col)
            local = []
            for g in gts:
                remapped = remap_to_tile(g, ref, tile_size, config.min_visibility)
                if remapped is not None:
                    local.append(remapped)
            kept += len(local)
            _write_text(
                os.path.join(args.out_dir, tile_id + ".txt"),
                write_label_file(local, tile_size, tile_size),
            )
            manifest_rows.append((tile_id, ref, tile_size))
    _write_text(os.path.join(args.out_dir, "tiles.csv"), write_tile_manifest(manifest_rows))
    _echo_config(args.out_dir, config)
    print(
        f"tiled {len(images)} image(s) into {len(manifest_rows)} tile(s) "
        f"({tile_size}px, {args.policy}); kept {kept} of {total} annotation(s)"
    )
    return 0


def _manifest_ids(content: str) -> list[str]:
    first = content.splitlines()[0].strip() if content.strip() else ""
    if first.startswith("tile_id"):
        from .tiler import read_tile_manifest

        return [tile_id for tile_id, _, _ in read_tile_manifest(content)]
    return [img.image_id for img in read_image_manifest(content)]


def cmd_split(args: argparse.Namespace, config: HarnessConfig) -> int:
    ids = _manifest_ids(_read_text(args.manifest))
    seed = args.seed if args.seed is not None else config.seed
    if args.ratio_train <= 0 or args.ratio_test <= 0:
        raise ConfigError("split ratios must be positive")
    split = split_dataset(ids, args.ratio_train, args.ratio_test, seed)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_text(os.path.join(args.out_dir, "train.txt"), "".join(i + "\n" for i in split.train))
    _write_text(os.path.join(args.out_dir, "test.txt"), "".join(i + "\n" for i in split.test))
    _echo_config(args.out_dir, config)
    print(f"split {len(ids)} id(s) into {len(split.train)} train / {len(split.test)} test (seed {seed})")
    return 0


def _decode_stems(tensors_dir: str) -> list[str]:
    stems = set()
    for name in os.listdir(tensors_dir):
        for suffix in SCALE_SUFFIXES:
            if name.endswith(suffix):
                stems.add(name[: -len(suffix)])
    return sorted(stems)


def cmd_decode(args: argparse.Namespace, config: HarnessConfig) -> int:
    grids = grid_shape(config.input_size)
    strides = (32, 16, 8)
    # coarsest grid (stride 32) takes the largest anchor triple
    anchor_sets = (
        config.anchors[6:9],
        config.anchors[3:6],
        config.anchors[0:3],
    )
    stems = _decode_stems(args.tensors_dir)
    if not stems:
        raise VCEvalError(f"no .s0/.s1/.s2 .vct tensor files in {args.tensors_dir}")
    os.makedirs(args.out_dir, exist_ok=True)
    written = 0
    for stem in stems:
        detections: list[Detection] = []
        for scale_idx, suffix in enumerate(SCALE_SUFFIXES):
            path = os.path.join(args.tensors_dir, stem + suffix)
            if not os.path.exists(path):
                raise VCEvalError(f"{stem}: missing scale file {stem + suffix}")
            with open(path, "rb") as fh:
                tensor = read_tensor(fh.read())
            side = grids[scale_idx]
            if tensor.height != side or tensor.width != side:
                raise ShapeMismatch(
                    f"{stem + suffix}: grid {tensor.height}x{tensor.width}, "
                    f"expected {side}x{side} for input size {config.input_size}"
                )
            if tensor.num_classes != len(config.class_names):
                raise ShapeMismatch(
                    f"{stem + suffix}: {tensor.num_classes} classes in tensor, "
                    f"config names {len(config.class_names)}"
                )
            anchors = [AnchorBox(w, h) for w, h in anchor_sets[scale_idx]]
            detections.extend(
                decode_head(
                    tensor,
                    anchors,
                    strides[scale_idx],
                    config.score_threshold,
                    objectness_threshold=config.objectness_threshold,
                )
            )
        survivors = nms(detections, config.nms_iou_threshold)
        _write_text(
            os.path.join(args.out_dir, stem + ".det.txt"),
            write_detection_file(survivors),
        )
        written += 1
    _echo_config(args.out_dir, config)
    print(f"decoded {written} image(s) at input size {config.input_size}")
    return 0


def _paired_stems(detections_dir: str, labels_dir: str) -> list[str]:
    det_stems = {
        name[: -len(".det.txt")]
        for name in os.listdir(detections_dir)
        if name.endswith(".det.txt")
    }
    label_stems = {
        name[: -len(".txt")]
        for name in os.listdir(labels_dir)
        if name.endswith(".txt") and not name.endswith(".det.txt")
    }
    unpaired = det_stems ^ label_stems
    if unpaired:
        raise VCEvalError(
            "unpaired detection/label stems: " + ", ".join(sorted(unpaired)[:10])
        )
    if not det_stems:
        raise VCEvalError("no detection/label pairs found")
    return sorted(det_stems)


def _append_observations(path: str, rows: list[tuple[str, str, str, float]]) -> None:
    existing = ""
    if os.path.exists(path):
        existing = _read_text(path)
        if existing and not existing.startswith(OBSERVATION_HEADER):
            raise VCEvalError(f"{path} does not look like an observation file")
    lines = existing if existing else OBSERVATION_HEADER + "\n"
    for run_id, metric, group, value in rows:
        lines += f"{run_id},{metric},{group},{value:.6f}\n"
    _write_text(path, lines)


def cmd_eval(args: argparse.Namespace, config: HarnessConfig) -> int:
    stems = _paired_stems(args.detections_dir, args.labels_dir)
    dets_by_image = {}
    gts_by_image = {}
    extent = config.input_size
    for stem in stems:
        dets_by_image[stem] = parse_detection_file(
            _read_text(os.path.join(args.detections_dir, stem + ".det.txt"))
        )
        gts_by_image[stem] = parse_label_file(
            _read_text(os.path.join(args.labels_dir, stem + ".txt")), extent, extent
        )
    report = evaluate(dets_by_image, gts_by_image, config.eval_iou_threshold)
    os.makedirs(args.out_dir, exist_ok=True)
    group = args.group if args.group is not None else str(config.input_size)
    _write_text(
        os.path.join(args.out_dir, "metrics.csv"),
        write_metric_csv(report, args.run_id, config.input_size),
    )
    _write_text(os.path.join(args.out_dir, "pr_curves.csv"), write_pr_curve_csv(report.curves))
    obs_rows = [
        (args.run_id, "map30", group, report.mean_ap),
        (args.run_id, "f1max", group, report.f1_max),
    ]
    for class_id in sorted(report.per_class_ap):
        obs_rows.append(
            (
                args.run_id,
                f"ap30_{_class_label(config, class_id)}",
                group,
                report.per_class_ap[class_id],
            )
        )
    observations = args.observations or os.path.join(args.out_dir, "observations.csv")
    _append_observations(observations, obs_rows)
    _echo_config(args.out_dir, config)
    per_class = ", ".join(
        f"{_class_label(config, cid)}={ap:.4f}" for cid, ap in sorted(report.per_class_ap.items())
    )
    print(
        f"evaluated {len(stems)} image(s): mAP30 {report.mean_ap:.4f} "
        f"({per_class}); F1-max {report.f1_max:.4f} @ {report.f1_max_threshold:.3f}"
    )
    return 0


def cmd_compare(args: argparse.Namespace, config: HarnessConfig) -> int:
    table = statsmod.load_observation_table(_read_text(args.observations), args.metric)
    report = statsmod.compare_pipeline(
        table,
        alpha=config.alpha,
        normality_scope=config.normality_scope,
        posthoc=config.posthoc,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    payload = statsmod.report_to_dict(report)
    payload["metric"] = args.metric
    payload["config"] = config.to_dict()
    _write_text(
        os.path.join(args.out_dir, f"comparison_{args.metric}.json"),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    _write_text(
        os.path.join(args.out_dir, f"comparison_{args.metric}.csv"),
        statsmod.write_posthoc_csv(report),
    )
    sig = sum(1 for c in report.posthoc if c.significant_at_alpha)
    print(
        f"{args.metric}: {report.branch} branch, {report.omnibus.method} "
        f"p={report.omnibus.p_value:.4f}; {sig} of {len(report.posthoc)} pair(s) "
        f"significant at alpha={config.alpha}"
    )
    return 0


def cmd_report(args: argparse.Namespace, config: HarnessConfig) -> int:
    import csv
    import io
    import math

    content = _read_text(args.observations)
    reader = csv.DictReader(io.StringIO(content))
    if reader.fieldnames is None or not {"metric", "group", "value"} <= set(reader.fieldnames):
        raise VCEvalError("observation file lacks metric/group/value columns")
    by_metric: dict[str, dict[str, list[float]]] = {}
    for row in reader:
        by_metric.setdefault(row["metric"], {}).setdefault(row["group"], []).append(
            float(row["value"])
        )
    lines = [f"observation summary ({args.observations})", ""]
    for metric in sorted(by_metric):
        lines.append(f"metric {metric}:")
        for group in sorted(by_metric[metric]):
            vals = by_metric[metric][group]
            mean = sum(vals) / len(vals)
            sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)) if len(vals) > 1 else 0.0
            lines.append(f"  group {group}: n={len(vals)} mean={mean:.6f} sd={sd:.6f}")
        lines.append("")
    for path in args.comparisons or []:
        data = json.loads(_read_text(path))
        lines.append(
            f"comparison {data.get('metric', '?')}: branch={data['branch']} "
            f"omnibus={data['omnibus']['method']} p={data['omnibus']['p_value']:.6f}"
        )
        for c in data["posthoc"]:
            mark = "*" if c["significant_at_alpha"] else " "
            lines.append(
                f"  {mark} {c['level_a']} vs {c['level_b']}: diff={c['difference']:+.6f} "
                f"p={c['p_value']:.6f}"
            )
        lines.append("")
    text = "\n".join(lines).rstrip() + "\n"
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"JSON config path (default: ${CONFIG_ENV_VAR})")
    parser.add_argument("--input-size", type=int, dest="input_size")
    parser.add_argument("--score-threshold", type=float, dest="score_threshold")
    parser.add_argument("--objectness-threshold", type=float, dest="objectness_threshold")
    parser.add_argument("--nms-iou-threshold", type=float, dest="nms_iou_threshold")
    parser.add_argument("--eval-iou-threshold", type=float, dest="eval_iou_threshold")
    parser.add_argument("--min-visibility", type=float, dest="min_visibility")
    parser.add_argument("--alpha", type=float, dest="alpha")
    parser.add_argument("--class-names", dest="class_names",
                        help="comma-separated class names")
    parser.add_argument("--normality-scope", dest="normality_scope",
                        choices=["pooled", "per-group"])
    parser.add_argument("--posthoc", dest="posthoc",
                        choices=["always", "on-significant"])


_OVERRIDE_KEYS = (
    "input_size", "score_threshold", "objectness_threshold", "nms_iou_threshold",
    "eval_iou_threshold", "min_visibility", "alpha", "class_names",
    "normality_scope", "posthoc",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vceval",
        description="Tiling, detector-head decoding, AP30/F1 scoring and "
                    "cross-scale statistical comparison for aerial detection runs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tile", help="plan tiles and remap annotations")
    p.add_argument("--manifest", required=True, help="image manifest CSV")
    p.add_argument("--labels-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tile-size", type=int, default=None,
                   help="tile side in pixels (default: config input_size)")
    p.add_argument("--policy", choices=["pad-edge", "drop-partial"], default="pad-edge")
    _add_override_flags(p)

    p = sub.add_parser("split", help="seeded train/test split of manifest ids")
    p.add_argument("--manifest", required=True, help="image or tile manifest CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratio-train", type=int, default=4)
    p.add_argument("--ratio-test", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    _add_override_flags(p)

    p = sub.add_parser("decode", help="decode raw head tensors into detection files")
    p.add_argument("--tensors-dir", required=True)
    p.add_argument("--out-dir", required=True)
    _add_override_flags(p)

    p = sub.add_parser("eval", help="score detections against labels")
    p.add_argument("--detections-dir", required=True)
    p.add_argument("--labels-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--run-id", required=True)
    p.add_argument("--group", default=None,
                   help="observation group label (default: input size)")
    p.add_argument("--observations", default=None,
                   help="observation CSV to append to (default: <out-dir>/observations.csv)")
    _add_override_flags(p)

    p = sub.add_parser("compare", help="normality-gated group comparison of a metric")
    p.add_argument("--observations", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out-dir", required=True)
    _add_override_flags(p)

    p = sub.add_parser("report", help="human-readable roll-up of observations")
    p.add_argument("--observations", required=True)
    p.add_argument("--comparisons", nargs="*", default=[],
                   help="comparison JSON files to include")
    p.add_argument("--out", default=None, help="output text path (default: stdout)")
    _add_override_flags(p)

    return parser


_COMMANDS = {
    "tile": cmd_tile,
    "split": cmd_split,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        for key in _OVERRIDE_KEYS:
            value = getattr(args, key, None)
            if value is None:
                continue
            if key == "class_names":
                value = tuple(n.strip() for n in value.split(",") if n.strip())
            overrides[key] = value
        if getattr(args, "seed", None) is not None:
            overrides["seed"] = args.seed
        config = load_config(getattr(args, "config", None), overrides)
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VCEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
