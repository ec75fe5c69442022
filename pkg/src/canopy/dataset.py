"""File formats and dataset directory layout.

A dataset directory holds:

    clouds/NNNNNN.ply       per-frame stereo-style clouds (camera frame)
    sparse/NNNNNN.ply       sparsified pseudo-lidar clouds
    trajectory.txt          camera poses, one line per frame
    global_map.ply          fused world-frame cloud
    gt_labels/NNNNNN.txt    synthetic ground-truth boxes (if generated)
    labels/NNNNNN.txt       auto-generated training labels
    detections/NNNNNN.txt   detector outputs (baseline or external)
    tracks/NNNNNN.txt       tracker estimates
    clusters.txt            per-point cluster id over global_map.ply
    clusters_meta.txt       one line per cluster: id, size, bbox, source
    config.txt              run configuration

All readers return typed errors on malformed input instead of crashing.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from canopy.errors import DataError, ParseError
from canopy.geometry import Box3, Frame, PointCloud, Pose, WORLD, quat_normalize
from canopy.segmentation import Cluster, ClusterSource, Plane

logger = logging.getLogger(__name__)

CLASS_TREE = "tree"

_PLY_TYPES = {
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
    "uchar": "u1", "uint8": "u1", "char": "i1", "int8": "i1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
}


# ---------------------------------------------------------------- PLY clouds

def point_cloud_bytes(cloud: PointCloud) -> bytes:
    """Binary little-endian PLY with float32 x, y, z."""
    pts = cloud.points.astype("<f4")
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "end_header\n"
    )
    return header.encode("ascii") + pts.tobytes()


def write_point_cloud(cloud: PointCloud, path) -> None:
    _atomic_write_bytes(path, point_cloud_bytes(cloud))


def read_point_cloud(path, frame: Frame = WORLD) -> PointCloud:
    """Read an ascii or binary-little-endian PLY vertex cloud."""
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: not a PLY file")
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    n_vertex = None
    props: list[tuple[str, str]] = []
    current_element = None
    for line in header_lines[1:]:
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"{path}: unsupported PLY format {line!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError(f"{path}: malformed element line {line!r}")
            current_element = tokens[1]
            if current_element == "vertex":
                try:
                    n_vertex = int(tokens[2])
                except ValueError:
                    raise ParseError(f"{path}: bad vertex count {tokens[2]!r}") from None
            elif int(tokens[2]) != 0:
                raise ParseError(f"{path}: unsupported non-empty element {tokens[1]!r}")
        elif tokens[0] == "property" and current_element == "vertex":
            if len(tokens) != 3 or tokens[1] not in _PLY_TYPES:
                raise ParseError(f"{path}: unsupported property {line!r}")
            props.append((tokens[2], _PLY_TYPES[tokens[1]]))
    if fmt is None or n_vertex is None:
        raise ParseError(f"{path}: missing format or vertex element")
    names = [name for name, _ in props]
    if not all(axis in names for axis in "xyz"):
        raise ParseError(f"{path}: vertex element lacks x, y, z properties")

    if fmt == "binary_little_endian":
        dtype = np.dtype(props)
        expected = dtype.itemsize * n_vertex
        if len(body) < expected:
            raise ParseError(f"{path}: truncated body "
                             f"({len(body)} bytes, expected {expected})")
        records = np.frombuffer(body[:expected], dtype=dtype)
        pts = np.stack([records["x"], records["y"], records["z"]],
                       axis=1).astype(np.float64)
    else:
        rows = body.decode("ascii", errors="replace").split()
        if len(rows) < n_vertex * len(props):
            raise ParseError(f"{path}: truncated ascii body")
        try:
            values = np.array(rows[:n_vertex * len(props)], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path}: non-numeric ascii vertex data") from None
        values = values.reshape(n_vertex, len(props))
        cols = [names.index(axis) for axis in "xyz"]
        pts = values[:, cols]

    if not np.all(np.isfinite(pts)):
        raise DataError(f"{path}: cloud contains NaN or Inf coordinates")
    return PointCloud(pts.reshape(n_vertex, 3), frame)


# ---------------------------------------------------------------- trajectory

def write_trajectory(poses: list[Pose], path) -> None:
    lines = ["# frame tx ty tz qw qx qy qz"]
    for p in poses:
        t, q = p.translation, p.rotation
        lines.append(f"{p.frame_index} {t[0]:.9f} {t[1]:.9f} {t[2]:.9f} "
                     f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}")
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_trajectory(path) -> list[Pose]:
    poses: dict[int, Pose] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 8:
            raise ParseError(f"{path}:{lineno}: expected 8 fields, got {len(tokens)}")
        try:
            frame_index = int(tokens[0])
            values = [float(tok) for tok in tokens[1:]]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric pose field") from None
        if frame_index in poses:
            raise DataError(f"{path}:{lineno}: duplicate frame_index {frame_index}")
        q = np.array(values[3:])
        norm = np.linalg.norm(q)
        if norm == 0:
            raise DataError(f"{path}:{lineno}: zero quaternion")
        if abs(norm - 1.0) > 1e-3:
            logger.warning("%s:%d: quaternion norm %.6f, renormalizing",
                           path, lineno, norm)
        poses[frame_index] = Pose(frame_index, np.array(values[:3]),
                                  quat_normalize(q))
    return [poses[k] for k in sorted(poses)]


# ------------------------------------------------------------------- labels

@dataclass
class LabelRecord:
    """One bounding-box annotation or detection, camera frame."""

    class_name: str
    center: np.ndarray
    extents: np.ndarray
    score: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.extents = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if np.any(self.extents < 0):
            raise DataError(f"negative extent in label: {self.extents}")
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"label score {self.score} outside [0, 1]")

    def box(self, frame: Frame) -> Box3:
        return Box3(self.center, self.extents, frame)


def write_labels(records: list[LabelRecord], path) -> None:
    lines = []
    for rec in records:
        c, e = rec.center, rec.extents
        lines.append(f"{rec.class_name} {c[0]:.6f} {c[1]:.6f} {c[2]:.6f} "
                     f"{e[0]:.6f} {e[1]:.6f} {e[2]:.6f} {rec.score:.6f}")
    _atomic_write_bytes(path, ("".join(line + "\n" for line in lines)).encode("ascii"))


def read_labels(path, min_fields: int = 8) -> list[LabelRecord]:
    """Read `class cx cy cz ex ey ez score` records; extra fields ignored."""
    records = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < min_fields:
            raise ParseError(f"{path}:{lineno}: expected >= {min_fields} fields")
        if tokens[0] != CLASS_TREE:
            raise DataError(f"{path}:{lineno}: unknown class {tokens[0]!r}")
        try:
            values = [float(tok) for tok in tokens[1:8]]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric label field") from None
        records.append(LabelRecord(tokens[0], values[0:3], values[3:6], values[6]))
    return records


@dataclass
class TrackRecord:
    """Tracker estimate: a camera-frame label plus id and world BEV state."""

    label: LabelRecord
    track_id: int
    bev: np.ndarray  # (x forward, y left, diameter) in world BEV

    def __post_init__(self):
        self.bev = np.asarray(self.bev, dtype=np.float64).reshape(3)


def write_tracks(records: list[TrackRecord], path) -> None:
    lines = []
    for rec in records:
        c, e = rec.label.center, rec.label.extents
        b = rec.bev
        lines.append(f"{rec.label.class_name} {c[0]:.6f} {c[1]:.6f} {c[2]:.6f} "
                     f"{e[0]:.6f} {e[1]:.6f} {e[2]:.6f} {rec.label.score:.6f} "
                     f"{rec.track_id} {b[0]:.6f} {b[1]:.6f} {b[2]:.6f}")
    _atomic_write_bytes(path, ("".join(line + "\n" for line in lines)).encode("ascii"))


def read_tracks(path) -> list[TrackRecord]:
    records = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 12:
            raise ParseError(f"{path}:{lineno}: expected 12 fields, got {len(tokens)}")
        if tokens[0] != CLASS_TREE:
            raise DataError(f"{path}:{lineno}: unknown class {tokens[0]!r}")
        try:
            v = [float(tok) for tok in tokens[1:8]]
            track_id = int(tokens[8])
            bev = [float(tok) for tok in tokens[9:12]]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric track field") from None
        records.append(TrackRecord(LabelRecord(tokens[0], v[0:3], v[3:6], v[6]),
                                   track_id, bev))
    return records


# ----------------------------------------------------------------- clusters

def write_clusters(labels: np.ndarray, clusters: list[Cluster], layout,
                   plane: Plane | None = None, margin: float | None = None) -> None:
    """Persist per-point labels plus per-cluster metadata."""
    body = "".join(f"{int(v)}\n" for v in labels)
    _atomic_write_bytes(layout.clusters, body.encode("ascii"))

    lines = ["# id point_count cx cy cz ex ey ez source"]
    if plane is not None:
        n = plane.normal
        lines.append(f"# plane {n[0]:.9f} {n[1]:.9f} {n[2]:.9f} "
                     f"{plane.offset:.9f} {margin if margin is not None else 0.0:.9f}")
    for c in clusters:
        lo = c.points.min(axis=0)
        hi = c.points.max(axis=0)
        center = (lo + hi) / 2.0
        ext = hi - lo
        lines.append(f"{c.id} {c.size} {center[0]:.6f} {center[1]:.6f} "
                     f"{center[2]:.6f} {ext[0]:.6f} {ext[1]:.6f} {ext[2]:.6f} "
                     f"{c.source.value}")
    _atomic_write_bytes(layout.clusters_meta,
                        ("\n".join(lines) + "\n").encode("ascii"))


def read_cluster_labels(path) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=np.int64, comments="#", ndmin=1)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def read_cluster_meta(path):
    """Returns (list of (id, count, center, extents, source), plane or None)."""
    rows = []
    plane = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("# plane "):
            vals = [float(tok) for tok in stripped.split()[2:7]]
            plane = (np.array(vals[0:3]), vals[3], vals[4])
            continue
        line = stripped.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 9:
            raise ParseError(f"{path}:{lineno}: expected 9 fields, got {len(tokens)}")
        try:
            rows.append((int(tokens[0]), int(tokens[1]),
                         np.array([float(t) for t in tokens[2:5]]),
                         np.array([float(t) for t in tokens[5:8]]),
                         ClusterSource(tokens[8])))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed cluster row") from None
    return rows, plane


def load_clusters(layout) -> list[Cluster]:
    """Rebuild Cluster objects from global_map.ply + cluster files."""
    cloud = read_point_cloud(layout.global_map, WORLD)
    labels = read_cluster_labels(layout.clusters)
    if labels.size != len(cloud):
        raise DataError(f"{layout.clusters}: {labels.size} labels for "
                        f"{len(cloud)} map points")
    meta, _ = read_cluster_meta(layout.clusters_meta)
    clusters = []
    for cid, count, _, _, source in meta:
        idx = np.flatnonzero(labels == cid)
        if idx.size != count:
            raise DataError(f"cluster {cid}: meta says {count} points, "
                            f"labels file has {idx.size}")
        clusters.append(Cluster(cid, idx, cloud.points[idx], source))
    return clusters


# ------------------------------------------------------------------- layout

def frame_name(frame_index: int) -> str:
    return f"{frame_index:06d}"


@dataclass
class DatasetLayout:
    """Paths inside one dataset directory."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def clouds(self) -> Path:
        return self.root / "clouds"

    @property
    def sparse(self) -> Path:
        return self.root / "sparse"

    @property
    def labels_dir(self) -> Path:
        return self.root / "labels"

    @property
    def gt_labels(self) -> Path:
        return self.root / "gt_labels"

    @property
    def detections(self) -> Path:
        return self.root / "detections"

    @property
    def tracks(self) -> Path:
        return self.root / "tracks"

    @property
    def trajectory(self) -> Path:
        return self.root / "trajectory.txt"

    @property
    def global_map(self) -> Path:
        return self.root / "global_map.ply"

    @property
    def config(self) -> Path:
        return self.root / "config.txt"

    @property
    def clusters(self) -> Path:
        return self.root / "clusters.txt"

    @property
    def clusters_meta(self) -> Path:
        return self.root / "clusters_meta.txt"

    def frame_file(self, directory: Path, frame_index: int, suffix: str) -> Path:
        return directory / (frame_name(frame_index) + suffix)

    def frame_indices(self, directory: Path, suffix: str) -> list[int]:
        """Sorted frame indices present in a per-frame directory."""
        if not directory.is_dir():
            return []
        out = []
        for p in directory.iterdir():
            if p.suffix == suffix and p.stem.isdigit():
                out.append(int(p.stem))
        return sorted(out)


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
