"""Glue between corpus data, augmentation, and the length model.

These helpers define the dataset conventions shared by the CLI and the
acceptance suite: normalized keypoints as model input, per-batch mean
base lengths for the uniform generator, and flip-averaged full-sequence
prediction at test time.
"""

from __future__ import annotations

import numpy as np

from .augment import (
    AugmentationConfig,
    LengthBank,
    augment_sequence_retry,
    gen_lengths_normal_batch,
    gen_lengths_uniform_batch,
)
from .camera import CameraIntrinsics, KeypointSequence, normalize_keypoints
from .corpus import CorpusSequence
from .errors import SchemaError
from .length_model import LengthModelParams, flatten_keypoints, predict_lengths
from .skeleton import BoneLengths, PoseSequence, SkeletonTopology


def build_training_pairs(
    sequences: list[CorpusSequence],
    topo: SkeletonTopology,
    cam: CameraIntrinsics,
    aug: AugmentationConfig,
    rng: np.random.Generator,
    bank: LengthBank | None = None,
    normal_sigmas: np.ndarray | None = None,
    replicas: int = 1,
    mean_batch_size: int = 256,
) -> list[tuple[KeypointSequence, np.ndarray]]:
    """Augmented (normalized keypoints, target lengths) pairs.

    Target lengths come from the configured strategy; the uniform
    generator's reference mean is computed over consecutive chunks of
    mean_batch_size source sequences.
    """
    pairs: list[tuple[KeypointSequence, np.ndarray]] = []
    for _ in range(replicas):
        for start in range(0, len(sequences), mean_batch_size):
            group = sequences[start : start + mean_batch_size]
            batch_mean = np.stack([s.lengths for s in group]).mean(axis=0)
            for seq in group:
                if aug.strategy == "synthetic":
                    if bank is None:
                        raise SchemaError("synthetic strategy needs a length bank")
                    target = bank.draw(rng)
                elif aug.strategy == "uniform":
                    target = BoneLengths(
                        gen_lengths_uniform_batch(seq.lengths, batch_mean, aug, rng, topo)[0]
                    )
                else:
                    if normal_sigmas is None:
                        raise SchemaError("normal strategy needs per-bone sigmas")
                    target = BoneLengths(
                        gen_lengths_normal_batch(seq.lengths, normal_sigmas, aug, rng, topo)[0]
                    )
                kps, target = augment_sequence_retry(
                    PoseSequence(seq.poses, fps=seq.fps), target, aug, cam, topo, rng
                )
                pairs.append((normalize_keypoints(kps, cam), target.values))
    return pairs


def evaluation_pairs(
    sequences: list[CorpusSequence], cam: CameraIntrinsics
) -> list[tuple[KeypointSequence, np.ndarray]]:
    """Clean (normalized keypoints, groundtruth lengths) pairs."""
    return [
        (normalize_keypoints(KeypointSequence(s.keypoints), cam), s.lengths)
        for s in sequences
    ]


def predict_sequence_lengths(
    sequences: list[CorpusSequence],
    params: LengthModelParams,
    topo: SkeletonTopology,
    cam: CameraIntrinsics,
    flip: bool = True,
) -> dict[str, np.ndarray]:
    """Flip-averaged full-sequence length predictions, keyed by name."""
    out = {}
    for seq in sequences:
        kps = normalize_keypoints(KeypointSequence(seq.keypoints), cam)
        out[seq.name] = predict_lengths(flatten_keypoints(kps), params, topo, flip=flip)
    return out
