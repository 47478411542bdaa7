"""Backend selection for the hot-path kernels.

The compiled extension is used when it was built; otherwise, or when the
``UASGUIDE_PURE_PYTHON`` environment variable is set to a non-empty value, the
pure-Python implementation is loaded. Both expose the same functions.
"""

import importlib
import os

_NAMES = (
    "mlp_forward",
    "static_observation",
    "moving_observation",
    "static_clearance",
    "point_distances",
    "proximity_sum",
)


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("uasguide._kernels")
    if name == "python":
        return importlib.import_module("uasguide._kernels_py")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("UASGUIDE_PURE_PYTHON"):
    BACKEND = "python"
else:
    BACKEND = available_backends()[0]

_mod = load_backend(BACKEND)
mlp_forward = _mod.mlp_forward
static_observation = _mod.static_observation
moving_observation = _mod.moving_observation
static_clearance = _mod.static_clearance
point_distances = _mod.point_distances
proximity_sum = _mod.proximity_sum

__all__ = ["BACKEND", "available_backends", "load_backend", *_NAMES]
