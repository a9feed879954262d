"""Command-line interface.

Subcommands mirror the pipeline stages: ``synth`` writes an analytic
dataset, ``generate`` produces pseudo-label grids, ``mask`` computes
camera-visibility masks, ``eval`` scores grids, the two ``sweep-*``
commands trace quality curves, and ``loss-check`` verifies a logits
tensor against a target grid.

Errors print a single ``error: ...`` line to stderr and exit nonzero.
"""

import argparse
import csv
import json
import sys

from . import dataset, pipeline, plots, synth
from .pointcloud import default_label_space
from .voxelizer import save_label_grid


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON file of PipelineConfig fields")
    parser.add_argument("--threshold", type=int, help="points required to occupy a voxel")
    parser.add_argument("--history", type=int, help="history samples merged per sample")
    parser.add_argument("--outlier-k", type=int, dest="outlier_k",
                        help="neighbor count for outlier removal")
    parser.add_argument("--outlier-std-ratio", type=float, dest="outlier_std_ratio",
                        help="standard-deviation multiplier for outlier removal")
    parser.add_argument("--dynamic-set", dest="dynamic_set",
                        help="comma-separated class indices treated as dynamic")
    parser.add_argument("--stride", type=int, help="pixel stride when lifting")
    parser.add_argument("--ray-stride", type=int, dest="ray_stride",
                        help="pixel stride when casting visibility rays")
    parser.add_argument("--lambda", type=float, dest="lam",
                        help="weight of the geometry losses")
    parser.add_argument("--ignore-empty", action=argparse.BooleanOptionalAction,
                        dest="ignore_empty", default=None,
                        help="exclude the empty class from the Lovasz term")
    parser.add_argument("--workers", type=int, help="parallel sample workers")
    parser.add_argument("--grid-min", dest="grid_min", help="x,y,z lower grid corner")
    parser.add_argument("--grid-max", dest="grid_max", help="x,y,z upper grid corner")
    parser.add_argument("--voxel-size", type=float, dest="voxel_size", help="voxel edge length")


def _config_from_args(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    for key in ("threshold", "history", "outlier_k", "outlier_std_ratio", "stride",
                "ray_stride", "lam", "ignore_empty", "workers", "voxel_size"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "dynamic_set", None) is not None:
        doc["dynamic_set"] = [int(v) for v in args.dynamic_set.split(",") if v != ""]
    for key in ("grid_min", "grid_max"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = [float(v) for v in value.split(",")]
    return pipeline.PipelineConfig.from_dict(doc)


def cmd_generate(args):
    config = _config_from_args(args)
    stats = pipeline.generate(args.input, args.output, config)
    for s in stats:
        print(f"{s.sample_id}: {s.points_before} -> {s.points_after} points, "
              f"{s.densified_points} densified, {s.occupied_voxels} voxels")
    return 0


def cmd_eval(args):
    names = default_label_space().names
    rows, aggregate = pipeline.evaluate(args.pred, args.gt, args.mask,
                                        args.report, names)
    plots.save_class_iou_figure(args.report + ".png", aggregate, names,
                                f"{len(rows)} samples")
    print(json.dumps(aggregate.to_dict(names), indent=2))
    return 0


def cmd_mask(args):
    config = _config_from_args(args)
    for sample_id, count in pipeline.compute_masks(args.input, args.grids,
                                                   args.output, config):
        print(f"{sample_id}: {count} visible voxels")
    return 0


def cmd_sweep_threshold(args):
    config = _config_from_args(args)
    rows = pipeline.sweep_threshold(args.input, args.gt, config)
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "miou", "iou", "occupied_count"])
        for threshold, miou, iou, occupied in rows:
            writer.writerow([threshold, f"{miou:.2f}", f"{iou:.2f}", occupied])
    plots.save_sweep_figure(args.csv + ".png", [r[0] for r in rows],
                            [r[1] for r in rows], "occupancy threshold (points)",
                            "mIoU (%)", "threshold sweep")
    return 0


def cmd_sweep_temporal(args):
    config = _config_from_args(args)
    rows = pipeline.sweep_temporal(args.input, args.gt, config)
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["history", "miou"])
        for history, miou in rows:
            writer.writerow([history, f"{miou:.2f}"])
    plots.save_sweep_figure(args.csv + ".png", [r[0] for r in rows],
                            [r[1] for r in rows], "history samples merged",
                            "mIoU (%)", "temporal densification sweep")
    return 0


def cmd_loss_check(args):
    result = pipeline.loss_check(args.logits, args.target, args.lam,
                                 args.ignore_empty, args.grad)
    print(json.dumps(result, indent=2))
    return 0


def cmd_synth(args):
    if args.scene:
        scene = synth.load_scene(args.scene)
    else:
        scene = synth.default_scene()
    import os
    os.makedirs(args.output, exist_ok=True)
    sample_ids = [f"s{t:04d}" for t in range(scene.timesteps)]
    dataset.write_manifest(args.output, sample_ids)
    for t, sample_id in enumerate(sample_ids):
        cameras = synth.render_timestep(scene, t)
        dataset.write_sample(args.output, sample_id, cameras, scene.T_global_to_ego(t))
    if args.gt_output:
        config = _config_from_args(args)
        spec = config.grid_spec()
        os.makedirs(args.gt_output, exist_ok=True)
        for t, sample_id in enumerate(sample_ids):
            grid = synth.analytic_ground_truth(scene, t, spec)
            save_label_grid(grid, dataset.labels_path(args.gt_output, sample_id),
                            dataset.gridspec_path(args.gt_output, sample_id))
    print(f"wrote {len(sample_ids)} samples, {len(scene.cameras)} cameras each")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voxlab",
        description="semantic occupancy pseudo-labels from surround cameras",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="produce pseudo-label grids for a sequence")
    p.add_argument("--input", required=True, help="sequence directory")
    p.add_argument("--output", required=True, help="directory for label grids")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score label grids against reference grids")
    p.add_argument("--pred", required=True, help="directory of predicted grids")
    p.add_argument("--gt", required=True, help="directory of reference grids")
    p.add_argument("--mask", help="directory of visibility masks")
    p.add_argument("--report", required=True, help="CSV report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mask", help="compute camera-visibility masks")
    p.add_argument("--input", required=True, help="sequence directory (calibration)")
    p.add_argument("--grids", required=True, help="directory of occupancy grids")
    p.add_argument("--output", required=True, help="directory for masks")
    _add_config_flags(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("sweep-threshold", help="score every threshold from 1 to 25")
    p.add_argument("--input", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--csv", required=True, help="CSV output path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("sweep-temporal", help="score every history depth from 0 to 13")
    p.add_argument("--input", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--csv", required=True, help="CSV output path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_temporal)

    p = sub.add_parser("loss-check", help="evaluate the training loss on a tensor pair")
    p.add_argument("--logits", required=True, help="float32 tensor, classes first")
    p.add_argument("--target", required=True, help="uint8 label tensor")
    p.add_argument("--lambda", type=float, dest="lam", default=0.1)
    p.add_argument("--ignore-empty", action=argparse.BooleanOptionalAction,
                   dest="ignore_empty", default=True)
    p.add_argument("--grad", action="store_true",
                   help="also report the analytic-gradient error")
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("synth", help="write an analytic scene as a dataset")
    p.add_argument("--output", required=True, help="sequence directory to write")
    p.add_argument("--gt-output", dest="gt_output", help="directory for reference grids")
    p.add_argument("--scene", help="scene description JSON (defaults to the built-in scene)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
