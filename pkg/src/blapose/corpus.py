"""Desk-scale synthetic motion corpus.

Each sequence is one body (drawn from a length bank) holding a smooth
random motion: bone directions evolve by small per-frame rotations while
the root stays put, so an angular step of zero yields a static sequence.
Poses live in camera space a few meters in front of the camera and are
stored together with their projections and groundtruth lengths.

Sequences are assigned action labels that differ only by the angular
step, which gives the per-action evaluation tables something to vary
over.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import LengthBank
from .bundle import read_bundle, write_bundle
from .camera import CameraIntrinsics, project_points
from .errors import SchemaError
from .skeleton import SkeletonTopology

# Rest directions for the packaged 17-joint skeleton, camera convention
# (x right, y down, z away); left/right pairs mirror in x.
_TEMPLATE_DIRECTIONS = {
    "hip_r": (-0.95, 0.30, 0.0),
    "thigh_r": (0.0, 1.0, 0.05),
    "shin_r": (0.0, 1.0, 0.08),
    "hip_l": (0.95, 0.30, 0.0),
    "thigh_l": (0.0, 1.0, 0.05),
    "shin_l": (0.0, 1.0, 0.08),
    "spine": (0.0, -1.0, 0.0),
    "thorax": (0.0, -1.0, 0.02),
    "neck": (0.0, -1.0, -0.08),
    "head": (0.0, -1.0, 0.0),
    "shoulder_l": (0.98, 0.12, 0.0),
    "upper_arm_l": (0.55, 0.83, 0.0),
    "forearm_l": (0.18, 0.97, 0.12),
    "shoulder_r": (-0.98, 0.12, 0.0),
    "upper_arm_r": (-0.55, 0.83, 0.0),
    "forearm_r": (-0.18, 0.97, 0.12),
}

DEFAULT_ACTIONS = (
    ("Still", 0.0),
    ("Sway", 0.008),
    ("Stroll", 0.018),
    ("Dance", 0.032),
    ("Sprint", 0.05),
)


@dataclass(frozen=True)
class CorpusConfig:
    train_sequences: int = 200
    test_sequences: int = 40
    frames: int = 600
    fps: float = 50.0
    noise_sigma_px: float = 0.0
    actions: tuple[tuple[str, float], ...] = DEFAULT_ACTIONS
    root_x_spread: float = 0.35
    root_y_spread: float = 0.15
    root_depth: tuple[float, float] = (4.45, 4.55)
    initial_jitter: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1 or self.train_sequences < 1 or self.test_sequences < 0:
            raise SchemaError("corpus sizes must be positive")
        for _, step in self.actions:
            if not 0.0 <= step <= 0.05:
                raise SchemaError("angular step must be within [0, 0.05] rad")
        if self.noise_sigma_px < 0:
            raise SchemaError("noise sigma must be >= 0")


@dataclass
class CorpusSequence:
    name: str
    action: str
    fps: float
    poses: np.ndarray      # (N, J, 3) meters
    keypoints: np.ndarray  # (N, J, 2) pixels
    lengths: np.ndarray    # (J-1,) meters


def canonical_directions(topo: SkeletonTopology) -> np.ndarray:
    """Rest-pose unit directions per bone.

    Uses the template when the bone names match; otherwise falls back to
    deterministic pseudo-random unit vectors so any valid topology works.
    """
    dirs = np.empty((topo.bone_count, 3), dtype=np.float64)
    fallback = np.random.default_rng(1234)
    for slot, name in enumerate(topo.bone_names):
        if name in _TEMPLATE_DIRECTIONS:
            vec = np.asarray(_TEMPLATE_DIRECTIONS[name], dtype=np.float64)
        else:
            vec = fallback.standard_normal(3)
        dirs[slot] = vec / np.linalg.norm(vec)
    return dirs


def _rotate(vectors: np.ndarray, axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of unit vectors about unit axes, broadcast-safe."""
    cos = np.cos(angles)[..., None]
    sin = np.sin(angles)[..., None]
    cross = np.cross(axes, vectors)
    dot = np.sum(axes * vectors, axis=-1, keepdims=True)
    return vectors * cos + cross * sin + axes * dot * (1.0 - cos)


def _random_axes(rng: np.random.Generator, shape) -> np.ndarray:
    axes = rng.standard_normal(shape + (3,))
    norms = np.linalg.norm(axes, axis=-1, keepdims=True)
    # a zero draw is essentially impossible; guard anyway
    norms[norms < 1e-12] = 1.0
    return axes / norms


def _heading_matrix(theta: np.ndarray) -> np.ndarray:
    """Rotation about the vertical (y) axis per sequence, (S, 3, 3)."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 2] = s
    out[..., 1, 1] = 1.0
    out[..., 2, 0] = -s
    out[..., 2, 2] = c
    return out


def generate_split(
    n_sequences: int,
    cfg: CorpusConfig,
    topo: SkeletonTopology,
    cam: CameraIntrinsics,
    bank: LengthBank,
    rng: np.random.Generator,
    name_prefix: str = "seq",
) -> list[CorpusSequence]:
    """Generate one corpus split; all randomness comes from `rng`."""
    if bank.samples.shape[1] != topo.bone_count:
        raise SchemaError("bank width does not match topology")
    s = n_sequences
    n = cfg.frames
    bones = topo.bone_count
    j = topo.joint_count

    action_idx = np.arange(s) % len(cfg.actions)
    steps = np.asarray([cfg.actions[i][1] for i in action_idx])
    rows = rng.integers(0, len(bank), size=s)
    lengths = bank.samples[rows]  # (S, B)

    base = canonical_directions(topo)  # (B, 3)
    headings = _heading_matrix(rng.uniform(0.0, 2.0 * np.pi, size=s))  # (S, 3, 3)
    dirs = np.einsum("sab,kb->ska", headings, base)  # (S, B, 3)
    jitter_axes = _random_axes(rng, (s, bones))
    jitter_angles = rng.uniform(0.0, cfg.initial_jitter, size=(s, bones))
    dirs = _rotate(dirs, jitter_axes, jitter_angles)

    roots = np.stack(
        [
            rng.uniform(-cfg.root_x_spread, cfg.root_x_spread, size=s),
            rng.uniform(-cfg.root_y_spread, cfg.root_y_spread, size=s),
            rng.uniform(cfg.root_depth[0], cfg.root_depth[1], size=s),
        ],
        axis=1,
    )

    poses = np.empty((s, n, j, 3), dtype=np.float64)
    keypoints = np.empty((s, n, j, 2), dtype=np.float64)
    frame = np.empty((s, j, 3), dtype=np.float64)
    for t in range(n):
        if t > 0:
            axes = _random_axes(rng, (s, bones))
            angles = rng.uniform(0.0, 1.0, size=(s, bones)) * steps[:, None]
            dirs = _rotate(dirs, axes, angles)
        frame[:, 0, :] = roots
        for slot, parent in enumerate(topo.parents[1:]):
            frame[:, slot + 1, :] = (
                frame[:, parent, :] + lengths[:, slot, None] * dirs[:, slot, :]
            )
        poses[:, t] = frame
        pix = project_points(frame, cam)
        if cfg.noise_sigma_px > 0:
            pix = pix + rng.normal(0.0, cfg.noise_sigma_px, size=pix.shape)
        keypoints[:, t] = pix

    out = []
    for i in range(s):
        out.append(
            CorpusSequence(
                name=f"{name_prefix}{i:04d}",
                action=cfg.actions[action_idx[i]][0],
                fps=cfg.fps,
                poses=poses[i],
                keypoints=keypoints[i],
                lengths=lengths[i],
            )
        )
    return out


def write_split(path: str | Path, sequences: list[CorpusSequence], cfg: CorpusConfig, topo: SkeletonTopology) -> None:
    arrays: list[tuple[str, np.ndarray]] = []
    seq_meta = []
    for seq in sequences:
        arrays.append((f"{seq.name}.poses3d", seq.poses))
        arrays.append((f"{seq.name}.keypoints2d", seq.keypoints))
        arrays.append((f"{seq.name}.lengths", seq.lengths))
        seq_meta.append(
            {"name": seq.name, "action": seq.action, "frames": int(seq.poses.shape[0]), "fps": seq.fps}
        )
    metadata = {
        "kind": "pose-corpus",
        "sequences": seq_meta,
        "joint_count": topo.joint_count,
        "bone_names": list(topo.bone_names),
        "noise_sigma_px": cfg.noise_sigma_px,
        "seed": cfg.seed,
    }
    write_bundle(path, arrays, metadata)


def load_split(path: str | Path) -> list[CorpusSequence]:
    arrays, metadata = read_bundle(path)
    if metadata.get("kind") != "pose-corpus":
        raise SchemaError(f"{path} is not a pose corpus bundle")
    out = []
    for entry in metadata["sequences"]:
        name = entry["name"]
        try:
            out.append(
                CorpusSequence(
                    name=name,
                    action=entry["action"],
                    fps=float(entry["fps"]),
                    poses=arrays[f"{name}.poses3d"].astype(np.float64),
                    keypoints=arrays[f"{name}.keypoints2d"].astype(np.float64),
                    lengths=arrays[f"{name}.lengths"].astype(np.float64),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"{path}: missing array for {name}: {exc}") from exc
    return out


def gen_synthetic_corpus(
    out_dir: str | Path,
    cfg: CorpusConfig,
    topo: SkeletonTopology,
    cam: CameraIntrinsics,
    bank: LengthBank,
) -> tuple[Path, Path]:
    """Generate train/test splits and write them as bundle files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_rng = np.random.default_rng(cfg.seed)
    test_rng = np.random.default_rng(cfg.seed + 1)
    train = generate_split(cfg.train_sequences, cfg, topo, cam, bank, train_rng, "train")
    test = generate_split(cfg.test_sequences, cfg, topo, cam, bank, test_rng, "test")
    train_path = out_dir / "train.bundle"
    test_path = out_dir / "test.bundle"
    write_split(train_path, train, cfg, topo)
    write_split(test_path, test, cfg, topo)
    return train_path, test_path
