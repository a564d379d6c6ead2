"""Tree-structured skeletons and the length/direction decomposition.

A pose is a set of J joint positions. Joints are labeled 0..J-1 with the
root (pelvis) at 0, and every other joint has a parent with a smaller
label. Bone i is the edge from child joint i to its parent, so a skeleton
has J-1 bones labeled 1..J-1; arrays over bones store bone i at slot i-1.

Decomposition splits a pose into per-bone lengths (Euclidean norm of the
child-minus-parent offset) and unit directions. Reconstruction walks the
tree in topological order, so the two maps are exact inverses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateBone, SchemaError

# Bones shorter than this are treated as corrupt input (no anatomical bone
# is remotely this short; it only guards against NaN directions).
DEGENERATE_LENGTH = 1e-12

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint parent tree plus bone naming and left/right symmetry.

    parents[0] is -1 (root sentinel) and parents[i] < i for i >= 1, which
    makes a single forward pass sufficient for reconstruction.
    symmetry_pairs hold bone labels (child joint indices), each label in
    at most one pair.
    """

    joint_count: int
    parents: tuple[int, ...]
    bone_names: tuple[str, ...]
    symmetry_pairs: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        j = self.joint_count
        if j < 2:
            raise SchemaError("topology needs at least 2 joints")
        if len(self.parents) != j:
            raise SchemaError(f"parents must have length {j}")
        if self.parents[0] != -1:
            raise SchemaError("parents[0] must be -1 (root)")
        for i, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < i:
                raise SchemaError(f"parents[{i}]={p} violates parents[i] < i")
        if len(self.bone_names) != j - 1:
            raise SchemaError(f"bone_names must have length {j - 1}")
        seen: set[int] = set()
        for a, b in self.symmetry_pairs:
            for label in (a, b):
                if not 1 <= label <= j - 1:
                    raise SchemaError(f"symmetry pair references bone {label}")
                if label in seen:
                    raise SchemaError(f"bone {label} appears in two symmetry pairs")
                seen.add(label)

    @property
    def bone_count(self) -> int:
        return self.joint_count - 1

    @property
    def parent_array(self) -> np.ndarray:
        """parents[1:] as an int array indexed by bone slot."""
        return np.asarray(self.parents[1:], dtype=np.int64)

    def symmetry_slots(self) -> tuple[tuple[int, int], ...]:
        """Symmetry pairs as 0-based bone slots instead of bone labels."""
        return tuple((a - 1, b - 1) for a, b in self.symmetry_pairs)

    def joint_swap_map(self) -> np.ndarray:
        """Per-joint left/right counterpart, derived from the bone pairs.

        Bone labels coincide with child joint labels, so each bone pair
        (i, j) also pairs joints i and j. Unpaired joints map to themselves.
        """
        swap = np.arange(self.joint_count, dtype=np.int64)
        for a, b in self.symmetry_pairs:
            swap[a], swap[b] = b, a
        return swap

    def bone_swap_map(self) -> np.ndarray:
        """Per-bone-slot counterpart slot under a left/right flip."""
        swap = np.arange(self.bone_count, dtype=np.int64)
        for a, b in self.symmetry_slots():
            swap[a], swap[b] = b, a
        return swap

    @classmethod
    def from_json(cls, path: str | Path) -> "SkeletonTopology":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read topology {path}: {exc}") from exc
        try:
            return cls(
                joint_count=int(raw["joint_count"]),
                parents=tuple(int(p) for p in raw["parents"]),
                bone_names=tuple(str(n) for n in raw["bone_names"]),
                symmetry_pairs=tuple(
                    (int(a), int(b)) for a, b in raw.get("symmetry_pairs", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad topology file {path}: {exc}") from exc

    def to_json(self, path: str | Path) -> None:
        payload = {
            "joint_count": self.joint_count,
            "parents": list(self.parents),
            "bone_names": list(self.bone_names),
            "symmetry_pairs": [list(p) for p in self.symmetry_pairs],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass
class Pose:
    """J joint positions in meters, shape (J, 3)."""

    joints: np.ndarray

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.ndim != 2 or self.joints.shape[1] != 3:
            raise SchemaError(f"pose must be (J, 3), got {self.joints.shape}")
        if not np.isfinite(self.joints).all():
            raise SchemaError("pose contains non-finite coordinates")

    @property
    def joint_count(self) -> int:
        return self.joints.shape[0]


@dataclass
class PoseSequence:
    """N poses sharing one topology, shape (N, J, 3), plus capture metadata."""

    frames: np.ndarray
    fps: float = 50.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise SchemaError(f"pose sequence must be (N, J, 3), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise SchemaError("pose sequence needs at least one frame")
        if not np.isfinite(self.frames).all():
            raise SchemaError("pose sequence contains non-finite coordinates")

    def __len__(self) -> int:
        return self.frames.shape[0]

    def pose(self, t: int) -> Pose:
        return Pose(self.frames[t])


@dataclass
class BoneLengths:
    """Strictly positive bone lengths in meters, shape (J-1,)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise SchemaError(f"lengths must be 1-D, got {self.values.shape}")
        if not np.isfinite(self.values).all() or (self.values <= 0).any():
            raise SchemaError("bone lengths must be finite and > 0")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class BoneDirections:
    """Unit bone direction vectors, shape (J-1, 3)."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != 3:
            raise SchemaError(f"directions must be (J-1, 3), got {self.vectors.shape}")
        norms = np.linalg.norm(self.vectors, axis=1)
        if not np.isfinite(self.vectors).all() or np.abs(norms - 1.0).max() > 1e-9:
            raise SchemaError("bone directions must be unit vectors (tol 1e-9)")

    def __len__(self) -> int:
        return self.vectors.shape[0]


def decompose_frames(
    frames: np.ndarray, topo: SkeletonTopology
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decomposition of (N, J, 3) positions.

    Returns (lengths (N, J-1), directions (N, J-1, 3)). Raises
    DegenerateBone with the first offending frame/bone.
    """
    frames = np.asarray(frames, dtype=np.float64)
    parents = topo.parent_array
    children = frames[:, 1:, :]
    offsets = children - frames[:, parents, :]
    lengths = np.linalg.norm(offsets, axis=2)
    if (lengths < DEGENERATE_LENGTH).any():
        t, slot = np.argwhere(lengths < DEGENERATE_LENGTH)[0]
        raise DegenerateBone(bone=int(slot) + 1, frame=int(t))
    directions = offsets / lengths[:, :, None]
    return lengths, directions


def reconstruct_frames(
    lengths: np.ndarray,
    directions: np.ndarray,
    roots: np.ndarray,
    topo: SkeletonTopology,
) -> np.ndarray:
    """Vectorized inverse of decompose_frames.

    lengths: (N, J-1), directions: (N, J-1, 3), roots: (N, 3).
    Walks bones in label order; parents[i] < i guarantees the parent is
    already placed.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    roots = np.asarray(roots, dtype=np.float64)
    n = lengths.shape[0]
    frames = np.empty((n, topo.joint_count, 3), dtype=np.float64)
    frames[:, 0, :] = roots
    for slot, parent in enumerate(topo.parents[1:]):
        frames[:, slot + 1, :] = (
            frames[:, parent, :] + lengths[:, slot, None] * directions[:, slot, :]
        )
    return frames


def decompose_pose(
    pose: Pose, topo: SkeletonTopology
) -> tuple[BoneLengths, BoneDirections]:
    """Split a pose into bone lengths and unit bone directions."""
    if pose.joint_count != topo.joint_count:
        raise SchemaError(
            f"pose has {pose.joint_count} joints, topology {topo.joint_count}"
        )
    lengths, directions = decompose_frames(pose.joints[None], topo)
    return BoneLengths(lengths[0]), BoneDirections(directions[0])


def reconstruct_pose(
    lengths: BoneLengths,
    directions: BoneDirections,
    root: np.ndarray,
    topo: SkeletonTopology,
) -> Pose:
    """Rebuild a pose from lengths, unit directions, and the root position."""
    if len(lengths) != topo.bone_count or len(directions) != topo.bone_count:
        raise SchemaError("lengths/directions do not match topology")
    norms = np.linalg.norm(directions.vectors, axis=1)
    if np.abs(norms - 1.0).max() > UNIT_NORM_TOL:
        raise SchemaError("directions are not unit vectors (tol 1e-6)")
    root = np.asarray(root, dtype=np.float64).reshape(3)
    frames = reconstruct_frames(
        lengths.values[None], directions.vectors[None], root[None], topo
    )
    return Pose(frames[0])


def replace_lengths(
    pose: Pose, new_lengths: BoneLengths, topo: SkeletonTopology
) -> Pose:
    """Rebuild a pose with new bone lengths but its original directions.

    The root position is untouched; every bone keeps its direction.
    """
    _, directions = decompose_pose(pose, topo)
    return reconstruct_pose(new_lengths, directions, pose.joints[0], topo)


def replace_lengths_frames(
    frames: np.ndarray, new_lengths: np.ndarray, topo: SkeletonTopology
) -> np.ndarray:
    """Frame-batched replace_lengths.

    new_lengths may be (J-1,) for one sequence-level vector or (N, J-1)
    for per-frame lengths.
    """
    frames = np.asarray(frames, dtype=np.float64)
    _, directions = decompose_frames(frames, topo)
    new_lengths = np.asarray(new_lengths, dtype=np.float64)
    if new_lengths.ndim == 1:
        new_lengths = np.broadcast_to(new_lengths, (frames.shape[0], len(new_lengths)))
    return reconstruct_frames(new_lengths, directions, frames[:, 0, :], topo)
