"""HTTP service backing the human cluster-review step.

Serves the ground-removed global cloud and the auto-generated cluster set,
accepts edits (delete cluster, add a manual box, undo), and commits the
revised cluster set back to the dataset so label generation picks it up.

The edit log is append-only and replays deterministically: the committed
output is exactly the active edits applied in order to the auto clusters.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from canopy.config import RunConfig
from canopy.dataset import (DatasetLayout, point_cloud_bytes,
                            read_cluster_labels, read_cluster_meta,
                            read_point_cloud, write_clusters)
from canopy.errors import DataError
from canopy.geometry import Box3, PointCloud, WORLD, points_in_box
from canopy.segmentation import Cluster, ClusterSource, Plane



class BoxBody(BaseModel):
    center: list[float] = Field(min_length=3, max_length=3)
    extents: list[float] = Field(min_length=3, max_length=3)


class AddClusterBody(BaseModel):
    bbox: BoxBody


class ReviewSession:
    """Auto clusters plus a replayable edit log over one dataset."""

    def __init__(self, dataset_dir, config: RunConfig):
        self.layout = DatasetLayout(dataset_dir)
        self.config = config
        self.lock = threading.Lock()
        if not self.layout.clusters.is_file():
            raise DataError(f"{self.layout.clusters} missing: run `canopy "
                            "segment` before reviewing")
        self.cloud = read_point_cloud(self.layout.global_map, WORLD)
        labels = read_cluster_labels(self.layout.clusters)
        if labels.size != len(self.cloud):
            raise DataError("clusters.txt does not match global_map.ply")
        meta, plane_info = read_cluster_meta(self.layout.clusters_meta)
        if plane_info is None:
            raise DataError(f"{self.layout.clusters_meta} lacks the ground "
                            "plane record; re-run `canopy segment`")
        normal, offset, margin = plane_info
        self.plane = Plane(normal, offset, 0)
        self.margin = margin

        above = self.plane.signed_distance(self.cloud.points) > margin
        self.above_idx = np.flatnonzero(above)
        self.above = PointCloud(self.cloud.points[self.above_idx], WORLD)

        self.base: list[Cluster] = []
        for cid, count, _, _, source in meta:
            idx = np.flatnonzero(labels == cid)
            if idx.size != count:
                raise DataError(f"cluster {cid}: meta/label mismatch")
            self.base.append(Cluster(cid, idx, self.cloud.points[idx], source))
        self._next_id = max((c.id for c in self.base), default=-1) + 1
        self.edits: list[dict] = []    # active edits, applied in order
        self.history: list[dict] = []  # append-only raw log (includes undos)

    # -- edit log ------------------------------------------------------

    def replay(self, edits: list[dict] | None = None) -> list[Cluster]:
        """Apply edits to the auto clusters; pure function of the log."""
        clusters = {c.id: c for c in self.base}
        for op in self.edits if edits is None else edits:
            if op["kind"] == "delete":
                clusters.pop(op["id"], None)
            else:
                idx_above = self._points_in_world_box(op["center"], op["extents"])
                clusters[op["id"]] = Cluster(
                    op["id"], self.above_idx[idx_above],
                    self.above.points[idx_above], ClusterSource.MANUAL)
        return [clusters[k] for k in sorted(clusters)]

    def _points_in_world_box(self, center, extents) -> np.ndarray:
        box = Box3(np.asarray(center), np.asarray(extents), WORLD)
        return points_in_box(self.above, box)

    def current(self) -> list[Cluster]:
        return self.replay()

    def delete_cluster(self, cluster_id: int) -> None:
        with self.lock:
            if all(c.id != cluster_id for c in self.current()):
                raise KeyError(cluster_id)
            op = {"kind": "delete", "id": cluster_id}
            self.edits.append(op)
            self.history.append(op)

    def add_cluster(self, center, extents) -> Cluster:
        with self.lock:
            inside = self._points_in_world_box(center, extents)
            if inside.size == 0:
                raise ValueError("box contains no ground-removed points")
            op = {"kind": "add", "id": self._next_id,
                  "center": [float(v) for v in center],
                  "extents": [float(v) for v in extents]}
            self._next_id += 1
            self.edits.append(op)
            self.history.append(op)
            return Cluster(op["id"], self.above_idx[inside],
                           self.above.points[inside], ClusterSource.MANUAL)

    def undo(self) -> dict:
        with self.lock:
            if not self.edits:
                raise IndexError("edit log is empty")
            op = self.edits.pop()
            self.history.append({"kind": "undo", "undone": op})
            return op

    def commit(self) -> int:
        """Persist the replayed cluster set with dense ids."""
        with self.lock:
            clusters = self.current()
            renumbered = []
            full_labels = np.full(len(self.cloud), -1, dtype=np.int64)
            for new_id, c in enumerate(clusters):
                renumbered.append(Cluster(new_id, c.point_indices, c.points,
                                          c.source))
                full_labels[c.point_indices] = new_id
            write_clusters(full_labels, renumbered, self.layout,
                           self.plane, self.margin)
            self.history.append({"kind": "commit", "count": len(renumbered)})
            return len(renumbered)


def _cluster_info(c: Cluster) -> dict:
    lo = c.points.min(axis=0)
    hi = c.points.max(axis=0)
    return {
        "id": c.id,
        "point_count": c.size,
        "bbox": {"center": ((lo + hi) / 2.0).tolist(),
                 "extents": (hi - lo).tolist()},
        "source": c.source.value,
    }


def create_app(dataset_dir, config: RunConfig | None = None,
               static_dir=None) -> FastAPI:
    config = config or RunConfig()
    session = ReviewSession(dataset_dir, config)
    app = FastAPI(title="canopy review")
    app.state.session = session

    @app.get("/api/cloud")
    def get_cloud(voxel: float = 0.0) -> Response:
        v = voxel if voxel > 0 else config.review_voxel
        pts = _voxel_decimate(session.above.points, v)
        return Response(point_cloud_bytes(PointCloud(pts, WORLD)),
                        media_type="application/octet-stream")

    @app.get("/api/clusters")
    def get_clusters() -> dict:
        return {"clusters": [_cluster_info(c) for c in session.current()]}

    @app.delete("/api/clusters/{cluster_id}")
    def delete_cluster(cluster_id: int) -> dict:
        try:
            session.delete_cluster(cluster_id)
        except KeyError:
            raise HTTPException(404, f"no cluster with id {cluster_id}")
        return {"status": "ok"}

    @app.post("/api/clusters")
    def add_cluster(body: AddClusterBody) -> dict:
        try:
            cluster = session.add_cluster(body.bbox.center, body.bbox.extents)
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        return {"status": "ok", "cluster": _cluster_info(cluster)}

    @app.post("/api/undo")
    def undo() -> dict:
        try:
            op = session.undo()
        except IndexError:
            raise HTTPException(400, "nothing to undo")
        return {"status": "ok", "undone": op}

    @app.post("/api/commit")
    def commit() -> dict:
        try:
            count = session.commit()
        except OSError as exc:
            raise HTTPException(500, f"commit failed: {exc}")
        return {"status": "ok", "clusters": count}

    static = Path(static_dir) if static_dir else \
        Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static.is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")
    return app


def _voxel_decimate(points: np.ndarray, voxel: float) -> np.ndarray:
    """First point per voxel, stable order."""
    if points.shape[0] == 0:
        return points
    cells = np.floor(points / voxel).astype(np.int64)
    mins = cells.min(axis=0)
    dims = cells.max(axis=0) - mins + 1
    keys = ((cells[:, 0] - mins[0]) * dims[1] + (cells[:, 1] - mins[1])) \
        * dims[2] + (cells[:, 2] - mins[2])
    _, first = np.unique(keys, return_index=True)
    first.sort()
    return points[first]
