"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--points N] [--repeat K]

Times the three hot kernels on workloads shaped like the real pipeline:
DBSCAN neighbor queries over a tree-and-ground map, RANSAC plane scoring,
and pixel-grid ray casting.
"""

import argparse
import time

import numpy as np

from canopy import _kernels
from canopy.config import RunConfig
from canopy.synth import NoiseModel, SceneSpec, generate_scene, yaw_pose, _pixel_dirs


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def forest_like_cloud(rng, n):
    """Point cloud shaped like a ground-removed global map: trunk shells."""
    n_trees = 20
    per_tree = n // n_trees
    parts = []
    for _ in range(n_trees):
        center = rng.uniform(0, 20, 2)
        radius = rng.uniform(0.1, 0.3)
        theta = rng.uniform(0, 2 * np.pi, per_tree)
        z = rng.uniform(0.5, 5.0, per_tree)
        parts.append(np.stack([center[0] + radius * np.cos(theta),
                               center[1] + radius * np.sin(theta), z], axis=1))
    return np.concatenate(parts)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=200_000,
                        help="cloud size for the DBSCAN/RANSAC workloads")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if "native" not in backends:
        print("warning: compiled kernels not built; timing the fallback only")

    rng = np.random.default_rng(0)
    cloud = forest_like_cloud(rng, args.points)

    normals = rng.normal(size=(1000, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    planes = np.concatenate([normals, rng.uniform(-1, 1, (1000, 1))], axis=1)

    config = RunConfig()
    camera = config.intrinsics()
    scene = generate_scene(SceneSpec(seed=1, n_trees=20,
                                     trunk_diameter=(0.3, 0.6),
                                     trunk_height=(3.0, 6.0)))
    pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
    dirs_cam = _pixel_dirs(camera, 1)
    dirs_world = dirs_cam @ pose.matrix[:3, :3].T

    workloads = {
        f"neighbor_csr ({args.points} pts, eps=0.1)":
            lambda b: b.neighbor_csr(cloud, 0.1),
        f"plane_inlier_counts ({args.points} pts x 1000 planes)":
            lambda b: b.plane_inlier_counts(cloud, planes, 0.5),
        f"cast_rays ({len(dirs_world)} rays x {scene.n_trees} trunks)":
            lambda b: b.cast_rays(pose.translation, dirs_world,
                                  scene.cylinders(), scene.ground_rect),
    }

    print(f"{'kernel':<50} " + " ".join(f"{b:>12}" for b in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for name, call in workloads.items():
        times = []
        for backend_name in backends:
            backend = _kernels.get_backend(backend_name)
            best, _ = timeit(lambda: call(backend), args.repeat)
            times.append(best)
        row = f"{name:<50} " + " ".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
