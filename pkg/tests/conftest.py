import sys
import zlib
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from canopy.cli import main as cli_main
from canopy.config import RunConfig
from canopy.synth import (NoiseModel, SceneSpec, export_dataset,
                          generate_scene, generate_trajectory)


def run_cli(*argv) -> int:
    return cli_main([str(a) for a in argv])


@pytest.fixture(scope="session")
def clean_dataset(tmp_path_factory):
    """Small zero-noise dataset shared by read-only tests."""
    root = tmp_path_factory.mktemp("clean") / "ds"
    config = RunConfig()
    config.set("synth.n_trees", 8)
    config.set("synth.frames", 40)
    config.set("synth.trunk_diameter_min", 0.3)
    config.set("synth.trunk_height_min", 3.0)
    config.set("synth.pixel_stride", 4)
    spec = SceneSpec.from_config(config, seed=21)
    scene = generate_scene(spec)
    trajectory = generate_trajectory(scene, config.synth_frames,
                                     config.synth_speed,
                                     config.synth_camera_height, seed=21)
    layout = export_dataset(scene, trajectory, config.intrinsics(),
                            NoiseModel.zero(), root, config, seed=21)
    return {"layout": layout, "scene": scene, "trajectory": trajectory,
            "config": config}


def rng_for(name: str) -> np.random.Generator:
    """Stable per-test RNG so failures reproduce."""
    return np.random.default_rng(zlib.crc32(name.encode()))
