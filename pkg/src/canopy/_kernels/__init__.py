"""Kernel backend selection.

The hot inner loops (neighbor queries, plane scoring, ray casting) have two
interchangeable implementations: a compiled Cython extension and a pure
numpy fallback. The compiled one is used when importable; set
CANOPY_KERNELS=python or CANOPY_KERNELS=native to force a backend.
"""

from __future__ import annotations

import os

from canopy._kernels import _python


def _select():
    forced = os.environ.get("CANOPY_KERNELS", "").strip().lower()
    if forced == "python":
        return _python
    try:
        from canopy._kernels import _native
    except ImportError:
        if forced == "native":
            raise ImportError(
                "CANOPY_KERNELS=native but the compiled kernels are not built; "
                "run `pip install -e .` with a C toolchain") from None
        return _python
    return _native


def get_backend(name: str):
    """Fetch a backend by name ('python' or 'native'), for tests/benchmarks."""
    if name == "python":
        return _python
    if name == "native":
        from canopy._kernels import _native
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from canopy._kernels import _native  # noqa: F401
        names.append("native")
    except ImportError:
        pass
    return names


_impl = _select()

BACKEND = _impl.NAME
neighbor_csr = _impl.neighbor_csr
plane_inlier_counts = _impl.plane_inlier_counts
cast_rays = _impl.cast_rays
