"""Command-line pipeline driver.

One executable, one subcommand per stage:

    canopy synth            generate a synthetic dataset
    canopy segment          cluster the global map into tree candidates
    canopy sparsify         convert dense clouds to pseudo-lidar clouds
    canopy label            generate per-frame training labels
    canopy detect-baseline  per-frame DBSCAN baseline detections
    canopy track            Kalman-filter tracking over detections
    canopy evaluate         range-binned comparison against ground truth
    canopy review           serve the cluster review UI / HTTP API

Every subcommand accepts --dataset, --config, --seed, --threads, plus every
config key as `--section.key VALUE`; the keys a stage owns are also exposed
without the section prefix (e.g. `canopy track --min-hits 5`). Set
CANOPY_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from canopy import __version__
from canopy.config import FIELDS, RunConfig, load_or_default, read_config
from canopy.errors import CanopyError, ConfigError, DataError
from canopy.dataset import (DatasetLayout, TrackRecord, LabelRecord, CLASS_TREE,
                            read_labels, read_point_cloud, read_trajectory,
                            write_clusters, write_labels, write_point_cloud,
                            write_tracks)
from canopy.geometry import WORLD, camera_frame

logger = logging.getLogger(__name__)

_OWNED_SECTIONS = {
    "synth": ("synth", "noise"),
    "segment": ("ransac", "ground", "dbscan"),
    "sparsify": ("sparsifier",),
    "detect-baseline": ("baseline",),
    "track": ("tracker",),
    "evaluate": ("eval",),
    "review": ("review",),
}


def _add_config_flags(parser: argparse.ArgumentParser, subcommand: str) -> None:
    owned = _OWNED_SECTIONS.get(subcommand, ())
    group = parser.add_argument_group("config overrides")
    for key, field in FIELDS.items():
        dest = "cfg_" + key.replace(".", "_")
        names = ["--" + key]
        section, name = key.split(".", 1)
        if section in owned:
            names.append("--" + name.replace("_", "-"))
        group.add_argument(*names, dest=dest, metavar="VALUE", default=None,
                           help=f"{field.doc} (default {field.default}, "
                                f"valid {field.valid})")


def _load_config(args) -> RunConfig:
    explicit = getattr(args, "config", None)
    if explicit:
        if not Path(explicit).is_file():
            raise ConfigError(f"config file {explicit} not found")
        config = read_config(explicit)
    elif getattr(args, "dataset", None):
        config = load_or_default(DatasetLayout(args.dataset).config)
    else:
        config = RunConfig()
    for key in FIELDS:
        value = getattr(args, "cfg_" + key.replace(".", "_"), None)
        if value is not None:
            config.set(key, value)
    return config.validate()


def _common_flags(parser: argparse.ArgumentParser, subcommand: str,
                  dataset_required: bool = True) -> None:
    parser.add_argument("--dataset", required=dataset_required, metavar="DIR",
                        help="dataset directory")
    parser.add_argument("--config", metavar="PATH",
                        help="config file (default: DATASET/config.txt if present)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-frame stages (default 1)")
    _add_config_flags(parser, subcommand)


def _map_frames(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------- subcommands

def cmd_synth(args) -> int:
    from canopy.synth import (NoiseModel, SceneSpec, export_dataset,
                              generate_scene, generate_trajectory)
    config = _load_config(args)
    spec = SceneSpec.from_config(config, args.seed)
    scene = generate_scene(spec)
    trajectory = generate_trajectory(scene, config.synth_frames,
                                     config.synth_speed,
                                     config.synth_camera_height, args.seed)
    noise = NoiseModel.from_config(config)
    layout = export_dataset(scene, trajectory, config.intrinsics(), noise,
                            args.dataset, config, seed=args.seed)
    print(f"synth: wrote {config.synth_frames} frames, {scene.n_trees} trees "
          f"to {layout.root}")
    return 0


def cmd_segment(args) -> int:
    from canopy.geometry import PointCloud
    from canopy.segmentation import Cluster, dbscan, filter_clusters, \
        ransac_ground_plane
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    cloud = read_point_cloud(layout.global_map, WORLD)
    plane = ransac_ground_plane(cloud, config.ransac_iterations,
                                config.ransac_distance_threshold, args.seed)
    above_idx = np.flatnonzero(plane.signed_distance(cloud.points)
                               > config.ground_margin)
    above = PointCloud(cloud.points[above_idx], WORLD)
    labels_above = dbscan(above, config.dbscan_eps, config.dbscan_min_samples)
    clusters = filter_clusters(labels_above, above, config.dbscan_min_cluster_points)

    full_labels = np.full(len(cloud), -1, dtype=np.int64)
    remapped = []
    for c in clusters:
        global_idx = above_idx[c.point_indices]
        full_labels[global_idx] = c.id
        remapped.append(Cluster(c.id, global_idx, c.points, c.source))
    write_clusters(full_labels, remapped, layout, plane, config.ground_margin)
    print(f"segment: ground plane normal {np.round(plane.normal, 4)}, "
          f"{plane.inlier_count} inliers; {len(remapped)} clusters kept "
          f"of {int(labels_above.max()) + 1 if labels_above.size else 0} found")
    return 0


def cmd_sparsify(args) -> int:
    from canopy.sparsify import SparsifyParams, sparsify
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    params = SparsifyParams.from_config(config)
    frames = layout.frame_indices(layout.clouds, ".ply")
    if not frames:
        raise DataError(f"{layout.clouds}: no input clouds")

    def one(frame_index: int):
        cloud = read_point_cloud(
            layout.frame_file(layout.clouds, frame_index, ".ply"),
            camera_frame(frame_index))
        sparse = sparsify(cloud, params)
        write_point_cloud(sparse,
                          layout.frame_file(layout.sparse, frame_index, ".ply"))
        return len(cloud), len(sparse)

    sizes = _map_frames(one, frames, args.threads)
    dense_total = sum(d for d, _ in sizes)
    sparse_total = sum(s for _, s in sizes)
    ratio = dense_total / sparse_total if sparse_total else float("inf")
    print(f"sparsify: {len(frames)} frames, {dense_total} -> {sparse_total} "
          f"points ({ratio:.1f}x reduction)")
    return 0


def cmd_label(args) -> int:
    from canopy.dataset import load_clusters
    from canopy.labeling import generate_dataset_labels
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    clusters = load_clusters(layout)
    trajectory = read_trajectory(layout.trajectory)
    total = generate_dataset_labels(layout, clusters, trajectory, config)
    n_frames = len(layout.frame_indices(layout.labels_dir, ".txt"))
    print(f"label: wrote {total} boxes over {n_frames} frames")
    return 0


def cmd_detect_baseline(args) -> int:
    from canopy.baseline import detect_frame
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    source = layout.sparse if config.baseline_input == "sparse" else layout.clouds
    frames = layout.frame_indices(source, ".ply")
    if not frames:
        raise DataError(f"{source}: no input clouds for the baseline "
                        f"(baseline.input = {config.baseline_input})")

    def one(frame_index: int):
        cloud = read_point_cloud(layout.frame_file(source, frame_index, ".ply"),
                                 camera_frame(frame_index))
        detections = detect_frame(cloud, config, seed=[args.seed, frame_index])
        write_labels(detections,
                     layout.frame_file(layout.detections, frame_index, ".txt"))
        return len(detections)

    counts = _map_frames(one, frames, args.threads)
    print(f"detect-baseline: {sum(counts)} detections over {len(frames)} frames")
    return 0


def cmd_track(args) -> int:
    from canopy.tracking import Tracker, TrackerConfig
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    frames = layout.frame_indices(layout.detections, ".txt")
    if not frames:
        raise DataError(f"{layout.detections}: no detection files")
    poses = {p.frame_index: p for p in read_trajectory(layout.trajectory)}
    tracker = Tracker(TrackerConfig.from_config(config))

    total = 0
    for frame_index in frames:
        if frame_index not in poses:
            raise DataError(f"trajectory has no pose for frame {frame_index}")
        pose = poses[frame_index]
        detections = read_labels(
            layout.frame_file(layout.detections, frame_index, ".txt"))
        confirmed = tracker.step(detections, pose)
        records = []
        for track in confirmed:
            x, y, w = track.t
            world_point = np.array([[x, y, pose.translation[2]]])
            center_cam = pose.apply_inverse(world_point)[0]
            label = LabelRecord(CLASS_TREE, center_cam, [w, 0.0, w], 1.0)
            records.append(TrackRecord(label, track.id, track.t))
        write_tracks(records,
                     layout.frame_file(layout.tracks, frame_index, ".txt"))
        total += len(records)
    print(f"track: {total} confirmed-track records over {len(frames)} frames; "
          f"{tracker.next_id} tracks created")
    return 0


def cmd_evaluate(args) -> int:
    from canopy.evaluation import evaluate_frames
    config = _load_config(args)
    layout = DatasetLayout(args.dataset)
    est_dir = _resolve_dir(layout, args.estimates)
    gt_dir = _resolve_dir(layout, args.gt)
    frames = []
    for frame_index in sorted(set(layout.frame_indices(gt_dir, ".txt"))
                              | set(layout.frame_indices(est_dir, ".txt"))):
        est_path = layout.frame_file(est_dir, frame_index, ".txt")
        gt_path = layout.frame_file(gt_dir, frame_index, ".txt")
        estimates = read_labels(est_path) if est_path.is_file() else []
        ground_truth = read_labels(gt_path) if gt_path.is_file() else []
        frames.append((frame_index, estimates, ground_truth))
    if not frames:
        raise DataError(f"no label files under {est_dir} or {gt_dir}")
    stats, results = evaluate_frames(frames, config.eval_cutoff,
                                     config.eval_bin_width, config.eval_max_range)
    print(stats.to_csv(), end="")
    print("evaluate:", stats.summary())
    if args.report:
        Path(args.report).write_text(stats.to_csv())
    if args.dump_matches:
        lines = []
        for r in results:
            for i, j, d in r.pairs:
                lines.append(f"{r.frame_index} match {i} {j} {d:.6f}")
            for i in r.false_positives:
                lines.append(f"{r.frame_index} fp {i}")
            for j in r.false_negatives:
                lines.append(f"{r.frame_index} fn {j}")
        Path(args.dump_matches).write_text("\n".join(lines) + "\n")
    return 0


def _resolve_dir(layout: DatasetLayout, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else layout.root / path


def cmd_review(args) -> int:
    import uvicorn
    from canopy.review import create_app
    config = _load_config(args)
    app = create_app(args.dataset, config)
    print(f"review: serving dataset {args.dataset} on "
          f"http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canopy",
        description="Tree detection and mapping pipeline for stereo-style "
                    "point clouds.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic forest dataset")
    _common_flags(p, "synth")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("segment", help="cluster the global map into trees")
    _common_flags(p, "segment")
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("sparsify", help="pseudo-lidar sparsification of clouds/")
    _common_flags(p, "sparsify")
    p.set_defaults(fn=cmd_sparsify)

    p = sub.add_parser("label", help="generate per-frame training labels")
    _common_flags(p, "label")
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("detect-baseline",
                       help="per-frame DBSCAN clustering baseline")
    _common_flags(p, "detect-baseline")
    p.set_defaults(fn=cmd_detect_baseline)

    p = sub.add_parser("track", help="Kalman-filter tracking over detections/")
    _common_flags(p, "track")
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("evaluate", help="compare two label directories")
    _common_flags(p, "evaluate")
    p.add_argument("--estimates", default="labels", metavar="DIR",
                   help="estimates directory, absolute or relative to the "
                        "dataset (default: labels)")
    p.add_argument("--gt", default="gt_labels", metavar="DIR",
                   help="ground-truth directory (default: gt_labels)")
    p.add_argument("--report", metavar="PATH", help="write the CSV report here")
    p.add_argument("--dump-matches", metavar="PATH",
                   help="write per-frame match/fp/fn rows here")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("review", help="serve the cluster review service")
    _common_flags(p, "review")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_review)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("CANOPY_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CanopyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
