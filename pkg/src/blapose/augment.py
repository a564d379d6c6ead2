"""Training-time augmentation: length generators, banks, shift, and flip.

Three generators produce target bone lengths for a source pose:

* uniform, relative perturbation of the per-batch mean length,
* normal, per-bone Gaussian around the source lengths,
* bank draw, a sample from a collection of plausible bodies.

All generators enforce left/right symmetry when asked, draw from an
explicit seeded generator, and reject non-positive lengths by resampling
(clamping would pile probability mass near zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import read_length_csv, write_length_csv
from .camera import CameraIntrinsics, KeypointSequence, project_sequence
from .errors import NonPositiveResult, SchemaError
from .skeleton import (
    BoneLengths,
    PoseSequence,
    SkeletonTopology,
    decompose_frames,
    replace_lengths_frames,
)

MAX_RESAMPLE = 100

STRATEGIES = ("uniform", "normal", "synthetic")


@dataclass(frozen=True)
class AugmentationConfig:
    strategy: str = "synthetic"
    uniform_range: float = 0.3
    shift_sigma: float = 0.5
    enforce_symmetry: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SchemaError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.uniform_range < 1.0:
            raise SchemaError("uniform_range must be in (0, 1)")
        if self.shift_sigma < 0.0:
            raise SchemaError("shift_sigma must be >= 0")


@dataclass
class LengthBank:
    """S sampled per-bone length vectors plus their summary statistics."""

    samples: np.ndarray
    bone_names: tuple[str, ...]
    source: str = "dataset"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise SchemaError("bank samples must be a non-empty (S, J-1) matrix")
        if self.samples.shape[1] != len(self.bone_names):
            raise SchemaError("bank width does not match bone names")
        if (self.samples <= 0).any() or not np.isfinite(self.samples).all():
            raise SchemaError("bank lengths must be finite and > 0")
        if self.source not in ("synthetic-mesh", "dataset"):
            raise SchemaError(f"unknown bank source {self.source!r}")

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.samples.std(axis=0)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def draw(self, rng: np.random.Generator) -> BoneLengths:
        """One body sampled uniformly from the bank."""
        row = int(rng.integers(0, len(self)))
        return BoneLengths(self.samples[row])

    @classmethod
    def from_csv(cls, path: str | Path, source: str = "dataset") -> "LengthBank":
        names, samples = read_length_csv(path)
        return cls(samples=samples.astype(np.float64), bone_names=tuple(names), source=source)

    def to_csv(self, path: str | Path) -> None:
        write_length_csv(path, self.bone_names, self.samples)


def _free_slots(topo: SkeletonTopology, enforce_symmetry: bool):
    """Slots that get their own random draw, and the expansion map.

    With symmetry on, each pair draws once at its lower slot and copies to
    the partner; unpaired bones draw independently.
    """
    bones = topo.bone_count
    expand = np.arange(bones, dtype=np.int64)
    if enforce_symmetry:
        for a, b in topo.symmetry_slots():
            lo, hi = (a, b) if a < b else (b, a)
            expand[hi] = lo
    free = np.unique(expand)
    remap = {slot: i for i, slot in enumerate(free)}
    gather = np.asarray([remap[s] for s in expand], dtype=np.int64)
    return free, gather


def gen_lengths_uniform_batch(
    base: np.ndarray,
    batch_mean: np.ndarray,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
    topo: SkeletonTopology,
    size: int = 1,
) -> np.ndarray:
    """Draw `size` length vectors l + r * batch_mean with r ~ U(-r_max, r_max)."""
    base = np.asarray(base, dtype=np.float64)
    batch_mean = np.asarray(batch_mean, dtype=np.float64)
    if (batch_mean <= 0).any():
        raise SchemaError("batch mean lengths must be > 0")
    free, gather = _free_slots(topo, cfg.enforce_symmetry)
    r_free = rng.uniform(-cfg.uniform_range, cfg.uniform_range, size=(size, free.size))
    out = base[None, :] + r_free[:, gather] * batch_mean[None, :]
    for _ in range(MAX_RESAMPLE):
        bad = out <= 0
        if not bad.any():
            return out
        # redraw whole symmetry groups wherever any member went non-positive
        bad_free = np.zeros((size, free.size), dtype=bool)
        np.logical_or.at(bad_free, (np.arange(size)[:, None], gather[None, :]), bad)
        redraw = rng.uniform(-cfg.uniform_range, cfg.uniform_range, size=int(bad_free.sum()))
        r_free[bad_free] = redraw
        out = base[None, :] + r_free[:, gather] * batch_mean[None, :]
    raise NonPositiveResult("uniform generator kept producing non-positive lengths")


def gen_lengths_uniform(
    base: BoneLengths,
    batch_mean: BoneLengths,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
    topo: SkeletonTopology,
) -> BoneLengths:
    out = gen_lengths_uniform_batch(base.values, batch_mean.values, cfg, rng, topo, size=1)
    return BoneLengths(out[0])


def gen_lengths_normal_batch(
    base: np.ndarray,
    sigmas: np.ndarray,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
    topo: SkeletonTopology,
    size: int = 1,
) -> np.ndarray:
    """Draw `size` length vectors from N(base_i, sigma_i), symmetry-tied."""
    base = np.asarray(base, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if (sigmas < 0).any():
        raise SchemaError("sigmas must be >= 0")
    free, gather = _free_slots(topo, cfg.enforce_symmetry)
    # The pair is tied by sampling the lower slot and copying, so the draw
    # uses the lower slot's base and sigma.
    noise = rng.standard_normal(size=(size, free.size))
    out = base[None, free][:, gather] + (noise * sigmas[None, free])[:, gather]
    for _ in range(MAX_RESAMPLE):
        bad = out <= 0
        if not bad.any():
            return out
        bad_free = np.zeros((size, free.size), dtype=bool)
        np.logical_or.at(bad_free, (np.arange(size)[:, None], gather[None, :]), bad)
        noise[bad_free] = rng.standard_normal(size=int(bad_free.sum()))
        out = base[None, free][:, gather] + (noise * sigmas[None, free])[:, gather]
    raise NonPositiveResult("normal generator kept producing non-positive lengths")


def gen_lengths_normal(
    base: BoneLengths,
    sigmas: np.ndarray,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
    topo: SkeletonTopology,
) -> BoneLengths:
    out = gen_lengths_normal_batch(base.values, sigmas, cfg, rng, topo, size=1)
    return BoneLengths(out[0])


def regress_joints_from_mesh(
    mesh: np.ndarray, regressor: np.ndarray, topo: SkeletonTopology
) -> BoneLengths:
    """Regress joints from mesh vertices, then measure the bone lengths.

    The regressor is a (J, V) matrix of convex vertex weights; each row
    must sum to 1 within 1e-6.
    """
    mesh = np.asarray(mesh, dtype=np.float64)
    regressor = np.asarray(regressor, dtype=np.float64)
    if mesh.ndim != 2 or mesh.shape[1] != 3:
        raise SchemaError(f"mesh must be (V, 3), got {mesh.shape}")
    if regressor.shape != (topo.joint_count, mesh.shape[0]):
        raise SchemaError(
            f"regressor must be ({topo.joint_count}, {mesh.shape[0]}), got {regressor.shape}"
        )
    row_sums = regressor.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-6:
        raise SchemaError("regressor rows must sum to 1 (tol 1e-6)")
    joints = regressor @ mesh
    lengths, _ = decompose_frames(joints[None], topo)
    return BoneLengths(lengths[0])


def align_bank_mean(
    bank: LengthBank, target_mean: BoneLengths, mode: str = "additive"
) -> LengthBank:
    """Move every sample so the per-bone means match the target.

    The default additive shift leaves per-bone standard deviations
    untouched. The multiplicative mode rescales each bone by
    target/mean instead (an opt-in escape hatch; it scales the spread
    along with the mean).
    """
    target = np.asarray(target_mean.values, dtype=np.float64)
    if target.shape != (bank.samples.shape[1],):
        raise SchemaError("target mean width does not match bank")
    if mode == "additive":
        shifted = bank.samples + (target - bank.mean)[None, :]
        if (shifted <= 0).any():
            raise NonPositiveResult("mean alignment pushed a length to <= 0")
    elif mode == "multiplicative":
        shifted = bank.samples * (target / bank.mean)[None, :]
    else:
        raise SchemaError(f"unknown alignment mode {mode!r}")
    return LengthBank(samples=shifted, bone_names=bank.bone_names, source=bank.source)


def fabricate_bank(
    mean: np.ndarray,
    std: np.ndarray,
    topo: SkeletonTopology,
    bone_names,
    samples: int,
    rng: np.random.Generator,
    scale_sigma: float = 0.08,
) -> LengthBank:
    """Fabricate a plausible-body bank: global scale times a template.

    Each body is scale * mean + per-bone residual noise, with the residual
    sigma chosen so the marginal per-bone std matches the template std.
    The global scale couples all bones, mimicking banks measured from
    generated body meshes; symmetry holds by construction.
    """
    mean = np.asarray(mean, dtype=np.float64).copy()
    std = np.asarray(std, dtype=np.float64).copy()
    # paired bones share one body part; use the lower slot's stats for both
    for a, b in topo.symmetry_slots():
        lo, hi = (a, b) if a < b else (b, a)
        mean[hi] = mean[lo]
        std[hi] = std[lo]
    resid = np.sqrt(np.maximum(std**2 - (scale_sigma * mean) ** 2, 0.0))
    free, gather = _free_slots(topo, enforce_symmetry=True)
    scales = 1.0 + scale_sigma * rng.standard_normal(samples)
    noise = rng.standard_normal((samples, free.size))
    rows = scales[:, None] * mean[None, :] + (noise * resid[None, free])[:, gather]
    for _ in range(MAX_RESAMPLE):
        bad = (rows <= 0).any(axis=1) | (scales <= 0)
        if not bad.any():
            return LengthBank(
                samples=rows, bone_names=tuple(bone_names), source="synthetic-mesh"
            )
        n_bad = int(bad.sum())
        scales[bad] = 1.0 + scale_sigma * rng.standard_normal(n_bad)
        noise[bad] = rng.standard_normal((n_bad, free.size))
        rows[bad] = (
            scales[bad, None] * mean[None, :] + (noise[bad] * resid[None, free])[:, gather]
        )
    raise NonPositiveResult("bank fabrication kept producing bad bodies")


def augment_sequence(
    poses: PoseSequence,
    lengths: BoneLengths,
    cfg: AugmentationConfig,
    cam: CameraIntrinsics,
    topo: SkeletonTopology,
    rng: np.random.Generator,
) -> tuple[KeypointSequence, BoneLengths]:
    """Replace bone lengths, shift the whole sequence once, and project.

    One shift vector is drawn per sequence and added to every joint of
    every frame, so the trajectory stays smooth. Raises BehindCamera if
    the shift pushes any joint to non-positive depth; the caller is
    expected to retry with a fresh draw (see augment_sequence_retry).
    """
    replaced = replace_lengths_frames(poses.frames, lengths.values, topo)
    shift = rng.normal(0.0, cfg.shift_sigma, size=3)
    shifted = replaced + shift[None, None, :]
    kps = project_sequence(
        PoseSequence(shifted, fps=poses.fps, metadata=dict(poses.metadata)), cam
    )
    return kps, lengths


def augment_sequence_retry(
    poses: PoseSequence,
    lengths: BoneLengths,
    cfg: AugmentationConfig,
    cam: CameraIntrinsics,
    topo: SkeletonTopology,
    rng: np.random.Generator,
    max_retries: int = MAX_RESAMPLE,
) -> tuple[KeypointSequence, BoneLengths]:
    """augment_sequence with the documented retry-on-BehindCamera loop."""
    from .errors import BehindCamera

    last: BehindCamera | None = None
    for _ in range(max_retries):
        try:
            return augment_sequence(poses, lengths, cfg, cam, topo, rng)
        except BehindCamera as exc:
            last = exc
    raise last if last is not None else RuntimeError("unreachable")


def flip_keypoints(
    kps: KeypointSequence, cam: CameraIntrinsics, topo: SkeletonTopology
) -> KeypointSequence:
    """Mirror keypoints about the principal point column and swap sides."""
    swap = topo.joint_swap_map()
    out = kps.frames[:, swap, :].copy()
    out[..., 0] = 2.0 * cam.cx - out[..., 0]
    conf = None if kps.confidence is None else kps.confidence[:, swap].copy()
    return KeypointSequence(frames=out, confidence=conf, metadata=dict(kps.metadata))
