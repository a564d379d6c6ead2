"""Pinhole projection with Brown-Conrady lens distortion.

Points are given in camera space (z along the optical axis, meters) and
projected to pixel coordinates. The distortion model uses three radial and
two tangential coefficients, which matches the convention of common
motion-capture camera calibrations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCamera, SchemaError

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    width: int = 1000
    height: int = 1000

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise SchemaError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise SchemaError("image size must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "CameraIntrinsics":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read camera {path}: {exc}") from exc
        try:
            k = list(raw.get("k", [0.0, 0.0, 0.0]))
            p = list(raw.get("p", [0.0, 0.0]))
            return cls(
                fx=float(raw["fx"]),
                fy=float(raw["fy"]),
                cx=float(raw["cx"]),
                cy=float(raw["cy"]),
                k1=float(k[0]),
                k2=float(k[1]),
                k3=float(k[2]),
                p1=float(p[0]),
                p2=float(p[1]),
                width=int(raw["width"]),
                height=int(raw["height"]),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SchemaError(f"bad camera file {path}: {exc}") from exc

    def to_json(self, path: str | Path) -> None:
        payload = {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "k": [self.k1, self.k2, self.k3],
            "p": [self.p1, self.p2],
            "width": self.width,
            "height": self.height,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass
class KeypointSequence:
    """N frames of J pixel keypoints, optionally with per-joint confidence."""

    frames: np.ndarray
    confidence: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 2:
            raise SchemaError(f"keypoints must be (N, J, 2), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise SchemaError("keypoint sequence needs at least one frame")
        if not np.isfinite(self.frames).all():
            raise SchemaError("keypoints contain non-finite coordinates")
        if self.confidence is not None:
            self.confidence = np.asarray(self.confidence, dtype=np.float64)
            if self.confidence.shape != self.frames.shape[:2]:
                raise SchemaError("confidence must be (N, J)")

    def __len__(self) -> int:
        return self.frames.shape[0]


def _distort(xn: np.ndarray, yn: np.ndarray, cam: CameraIntrinsics):
    r2 = xn * xn + yn * yn
    rho = 1.0 + r2 * (cam.k1 + r2 * (cam.k2 + r2 * cam.k3))
    xd = rho * xn + 2.0 * cam.p1 * xn * yn + cam.p2 * (r2 + 2.0 * xn * xn)
    yd = rho * yn + cam.p1 * (r2 + 2.0 * yn * yn) + 2.0 * cam.p2 * xn * yn
    return xd, yd


def project_points(points: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Project (..., 3) camera-space points to (..., 2) pixels.

    Raises BehindCamera if any z is at or below the depth threshold.
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if (z <= MIN_DEPTH).any():
        idx = np.argwhere(z <= MIN_DEPTH)[0]
        if points.ndim == 3:
            raise BehindCamera(frame=int(idx[0]), joint=int(idx[1]))
        raise BehindCamera(joint=int(idx[0]) if idx.size else None)
    xn = points[..., 0] / z
    yn = points[..., 1] / z
    xd, yd = _distort(xn, yn, cam)
    return np.stack([cam.fx * xd + cam.cx, cam.fy * yd + cam.cy], axis=-1)


def project_point(p: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Project a single camera-space point to pixels."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    return project_points(p, cam)


def project_sequence(poses, cam: CameraIntrinsics) -> KeypointSequence:
    """Project every joint of a pose sequence; confidence filled with 1.0."""
    frames = poses.frames if hasattr(poses, "frames") else np.asarray(poses)
    pixels = project_points(frames, cam)
    conf = np.ones(pixels.shape[:2], dtype=np.float64)
    meta = dict(getattr(poses, "metadata", {}) or {})
    return KeypointSequence(frames=pixels, confidence=conf, metadata=meta)


def normalize_keypoints(kps: KeypointSequence, cam: CameraIntrinsics) -> KeypointSequence:
    """Map pixels into a width-scaled [-1, 1] range around the principal point.

    Both axes are divided by the image width so the aspect ratio is kept.
    """
    out = kps.frames.copy()
    out[..., 0] = 2.0 * (kps.frames[..., 0] - cam.cx) / cam.width
    out[..., 1] = 2.0 * (kps.frames[..., 1] - cam.cy) / cam.width
    meta = dict(kps.metadata)
    meta["normalization"] = "center-principal-point, scale 2/width"
    conf = None if kps.confidence is None else kps.confidence.copy()
    return KeypointSequence(frames=out, confidence=conf, metadata=meta)


def denormalize_keypoints(kps: KeypointSequence, cam: CameraIntrinsics) -> KeypointSequence:
    """Inverse of normalize_keypoints."""
    out = kps.frames.copy()
    out[..., 0] = kps.frames[..., 0] * cam.width / 2.0 + cam.cx
    out[..., 1] = kps.frames[..., 1] * cam.width / 2.0 + cam.cy
    meta = dict(kps.metadata)
    meta.pop("normalization", None)
    conf = None if kps.confidence is None else kps.confidence.copy()
    return KeypointSequence(frames=out, confidence=conf, metadata=meta)
