"""Converters from third-party pose/keypoint/body exports to blapose formats."""

__version__ = "0.1.0"
