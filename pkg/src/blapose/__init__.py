"""Bone-length-aware 3D human pose toolkit.

Decomposes poses into bone lengths and directions, predicts lengths from
2D keypoint sequences with recurrent models, adjusts lifted poses to
anatomically consistent lengths, and evaluates with the standard
protocol metrics. See README.md for the pipeline walkthrough.
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def asset_path(name: str) -> Path:
    """Path to a packaged asset file (default topology, camera, stats)."""
    return Path(resources.files(__package__) / "assets" / name)


DEFAULT_TOPOLOGY = "h36m17_topology.json"
DEFAULT_CAMERA = "default_camera.json"
DEFAULT_BODY_STATS = "h36m17_body_stats.json"

__all__ = [
    "asset_path",
    "DEFAULT_TOPOLOGY",
    "DEFAULT_CAMERA",
    "DEFAULT_BODY_STATS",
    "__version__",
]
