"""Tree detection and mapping toolkit for noisy stereo-style point clouds."""

__version__ = "0.1.0"
