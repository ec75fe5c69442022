"""Run configuration: one flat key-value registry for every pipeline tunable.

Config files are plain text, `key = value` per line. Keys are dotted
(`dbscan.eps`); a `[section]` header makes following bare keys belong to
that section. `#` starts a comment. Unknown keys and out-of-range values
are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from canopy.errors import ConfigError
from canopy.geometry import CameraIntrinsics


@dataclass(frozen=True)
class _Field:
    key: str
    type: type
    default: Any
    check: Callable[[Any], bool]
    valid: str  # human-readable range, shown in errors and --help
    doc: str


def _positive(v) -> bool:
    return v > 0


def _non_negative(v) -> bool:
    return v >= 0


def _fraction(v) -> bool:
    return 0 <= v < 1


def _open_unit(v) -> bool:
    return 0 < v < 1


_FIELDS: list[_Field] = [
    # Camera model shared by the sparsifier, synthesizer, and tracker FOV test.
    _Field("camera.fx", float, 448.1327, _positive, "> 0", "focal length x (px)"),
    _Field("camera.fy", float, 514.1335, _positive, "> 0", "focal length y (px)"),
    _Field("camera.cx", float, 640.0, _positive, "> 0", "principal point x (px)"),
    _Field("camera.cy", float, 360.0, _positive, "> 0", "principal point y (px)"),
    _Field("camera.width", int, 1280, _positive, "> 0", "image width (px)"),
    _Field("camera.height", int, 720, _positive, "> 0", "image height (px)"),
    # Ground plane fit on the global map.
    _Field("ransac.iterations", int, 1000, _positive, ">= 1",
           "RANSAC iterations for the global-map ground plane"),
    _Field("ransac.distance_threshold", float, 0.5, _positive, "> 0",
           "inlier distance threshold (m)"),
    _Field("ground.margin", float, 0.5, _positive, "> 0",
           "remove points within this height of the ground plane (m)"),
    # Global-map clustering.
    _Field("dbscan.eps", float, 0.1, _positive, "> 0", "DBSCAN neighborhood radius (m)"),
    _Field("dbscan.min_samples", int, 10, _positive, ">= 1",
           "DBSCAN core-point threshold (closed ball, query point included)"),
    _Field("dbscan.min_cluster_points", int, 2000, _positive, ">= 1",
           "discard global-map clusters smaller than this"),
    # Pseudo-lidar sparsification.
    _Field("sparsifier.n_lines", int, 128, _positive, ">= 1", "elevation scan lines"),
    _Field("sparsifier.elev_min_deg", float, -35.0, lambda v: True, "any",
           "lowest scan-line elevation (deg)"),
    _Field("sparsifier.elev_max_deg", float, 35.0, lambda v: True, "any",
           "highest scan-line elevation (deg)"),
    _Field("sparsifier.azimuth_res_deg", float, 0.0, _non_negative, ">= 0",
           "azimuth cell width (deg); 0 derives it from the camera intrinsics"),
    _Field("sparsifier.max_range", float, 15.0, _positive, "> 0",
           "drop points beyond this range before training-label generation (m)"),
    # Per-frame baseline detector.
    _Field("baseline.ransac_iterations", int, 50, _positive, ">= 1",
           "RANSAC iterations for per-frame ground removal"),
    _Field("baseline.min_cluster_points", int, 50, _positive, ">= 1",
           "per-frame minimum cluster size"),
    _Field("baseline.input", str, "sparse", lambda v: v in ("sparse", "dense"),
           "sparse|dense", "which per-frame cloud the baseline clusters"),
    # Tracker.
    _Field("tracker.q_pos", float, 1e-4, _non_negative, ">= 0",
           "process noise variance on x and y (m^2/frame)"),
    _Field("tracker.q_diam", float, 1e-5, _non_negative, ">= 0",
           "process noise variance on diameter (m^2/frame)"),
    _Field("tracker.r_pos", float, 0.09, _positive, "> 0",
           "measurement noise variance on x and y (m^2)"),
    _Field("tracker.r_diam", float, 0.04, _positive, "> 0",
           "measurement noise variance on diameter (m^2)"),
    _Field("tracker.gate_prob", float, 0.95, _open_unit, "(0, 1)",
           "chi-square validation gate probability"),
    _Field("tracker.min_hits", int, 3, _positive, ">= 1",
           "associated measurements required to confirm a track"),
    _Field("tracker.max_age", int, 100, _positive, ">= 1",
           "delete a track after this many update-free frames"),
    _Field("tracker.fov_exit_frames", int, 10, _positive, ">= 1",
           "consecutive out-of-view frames before FOV-exit deletion"),
    _Field("tracker.max_range", float, 15.0, _positive, "> 0",
           "tracks beyond this range count as out of view (m)"),
    # Evaluation.
    _Field("eval.cutoff", float, 1.0, _positive, "> 0",
           "max estimate-to-truth match distance (m)"),
    _Field("eval.bin_width", float, 1.0, _positive, "> 0", "range bin width (m)"),
    _Field("eval.max_range", float, 15.0, _positive, "> 0", "range binning limit (m)"),
    # Synthetic forest generator.
    _Field("synth.n_trees", int, 20, _non_negative, ">= 0", "number of trees"),
    _Field("synth.frames", int, 200, _positive, ">= 1", "trajectory length (frames)"),
    _Field("synth.area_x", float, 20.0, _positive, "> 0", "forest extent along x (m)"),
    _Field("synth.area_y", float, 14.0, _positive, "> 0", "forest extent along y (m)"),
    _Field("synth.trunk_diameter_min", float, 0.15, _positive, "> 0",
           "smallest trunk diameter (m)"),
    _Field("synth.trunk_diameter_max", float, 0.6, _positive, "> 0",
           "largest trunk diameter (m)"),
    _Field("synth.trunk_height_min", float, 2.0, _positive, "> 0",
           "shortest trunk (m)"),
    _Field("synth.trunk_height_max", float, 6.0, _positive, "> 0",
           "tallest trunk (m)"),
    _Field("synth.min_spacing", float, 1.0, _positive, "> 0",
           "minimum pairwise tree spacing (m)"),
    _Field("synth.corridor_halfwidth", float, 1.2, _positive, "> 0",
           "trees are kept out of this corridor around the camera path (m)"),
    _Field("synth.speed", float, 0.1, _positive, "> 0", "camera speed (m/frame)"),
    _Field("synth.camera_height", float, 1.5, _positive, "> 0",
           "camera height above ground (m)"),
    _Field("synth.pixel_stride", int, 2, _positive, ">= 1",
           "render every k-th pixel (1 = full resolution)"),
    _Field("synth.noisy_global_map", bool, False, lambda v: True, "true|false",
           "fuse noisy frames into the exported global map (stress test)"),
    # Stereo-style noise model.
    _Field("noise.disparity_sigma", float, 0.5, _non_negative, ">= 0",
           "disparity noise (px); depth noise grows as z^2 * sigma / (focal * baseline)"),
    _Field("noise.focal", float, 530.0, _positive, "> 0",
           "focal length of the stereo noise model (px)"),
    _Field("noise.baseline", float, 0.12, _positive, "> 0", "stereo baseline (m)"),
    _Field("noise.lateral_sigma", float, 0.01, _non_negative, ">= 0",
           "lateral point jitter (m)"),
    _Field("noise.dropout", float, 0.02, _fraction, "[0, 1)",
           "per-point dropout probability"),
    # Cluster review service.
    _Field("review.voxel", float, 0.05, _positive, "> 0",
           "default preview decimation voxel (m)"),
]

FIELDS: dict[str, _Field] = {f.key: f for f in _FIELDS}


def _parse_value(field: _Field, raw: str):
    raw = raw.strip()
    try:
        if field.type is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if field.type is int:
            return int(raw)
        if field.type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"{field.key}: cannot parse {raw!r} as {field.type.__name__}") from None


class RunConfig:
    """All pipeline tunables, with paper defaults."""

    def __init__(self, **overrides):
        for f in _FIELDS:
            object.__setattr__(self, f.key.replace(".", "_"), f.default)
        for key, value in overrides.items():
            self.set(key.replace("_", ".", 1) if "." not in key else key, value)

    def get(self, key: str):
        if key not in FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        return getattr(self, key.replace(".", "_"))

    def set(self, key: str, value):
        if key not in FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        field = FIELDS[key]
        if isinstance(value, str) and field.type is not str:
            value = _parse_value(field, value)
        if field.type is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, field.type) or (
                field.type is int and isinstance(value, bool)):
            raise ConfigError(
                f"{key}: expected {field.type.__name__}, got {type(value).__name__}")
        if not field.check(value):
            raise ConfigError(f"{key}: value {value!r} outside valid range {field.valid}")
        object.__setattr__(self, key.replace(".", "_"), value)

    def validate(self):
        """Cross-field checks that single-key validators cannot express."""
        if self.sparsifier_elev_min_deg >= self.sparsifier_elev_max_deg:
            raise ConfigError("sparsifier.elev_min_deg must be < sparsifier.elev_max_deg")
        if self.synth_trunk_diameter_min > self.synth_trunk_diameter_max:
            raise ConfigError("synth.trunk_diameter_min must be <= max")
        if self.synth_trunk_height_min > self.synth_trunk_height_max:
            raise ConfigError("synth.trunk_height_min must be <= max")
        if not (0 < self.camera_cx < self.camera_width):
            raise ConfigError("camera.cx must lie inside the image width")
        if not (0 < self.camera_cy < self.camera_height):
            raise ConfigError("camera.cy must lie inside the image height")
        return self

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.camera_fx, self.camera_fy, self.camera_cx,
                                self.camera_cy, self.camera_width, self.camera_height)

    def azimuth_res_deg(self) -> float:
        """Azimuth cell width; twice the mean per-pixel angle when unset."""
        if self.sparsifier_azimuth_res_deg > 0:
            return self.sparsifier_azimuth_res_deg
        cam = self.intrinsics()
        return 2.0 * cam.h_fov / cam.width

    def items(self):
        for f in _FIELDS:
            yield f.key, getattr(self, f.key.replace(".", "_"))

    def __eq__(self, other):
        return isinstance(other, RunConfig) and dict(self.items()) == dict(other.items())


def read_config(path) -> RunConfig:
    """Parse a config file; missing keys keep their defaults."""
    config = RunConfig()
    section = ""
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        config.set(key, value)
    return config.validate()


def write_config(config: RunConfig, path) -> None:
    lines = [f"{key} = {value}" for key, value in config.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_or_default(path=None) -> RunConfig:
    """Read `path` if given and present, otherwise paper defaults."""
    if path is not None and Path(path).is_file():
        return read_config(path)
    return RunConfig()
