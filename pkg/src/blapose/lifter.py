"""A minimal differentiable 2D-to-3D lifter and its fine-tuning loop.

The lifter is a per-frame affine map from a small window of normalized
keypoint frames to root-relative 3D joints. It exists so the adjustment
pipeline can be driven end to end at desk scale: fit it by least squares,
predict poses, adjust them with predicted bone lengths, and fine-tune it
against the combined direction + adjusted-position loss while the length
model stays frozen.

The fine-tuning gradient is exact: reconstruction is differentiated
through the bone directions, and the predicted lengths are treated as
constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss, SchemaError
from .skeleton import SkeletonTopology


@dataclass
class ToyLifter:
    """Affine lifter: flattened (2w+1)-frame window -> J 3D joints."""

    weight: np.ndarray  # (3J, (2w+1) * 2J)
    bias: np.ndarray    # (3J,)
    window: int = 1

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise SchemaError("lifter weight/bias shapes are inconsistent")
        if self.weight.shape[0] % 3 != 0:
            raise SchemaError("lifter output dim must be 3J")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise SchemaError("lifter parameters must be finite")

    @property
    def n_joints(self) -> int:
        return self.weight.shape[0] // 3

    def copy(self) -> "ToyLifter":
        return ToyLifter(self.weight.copy(), self.bias.copy(), self.window)


def window_inputs(x_flat: np.ndarray, window: int) -> np.ndarray:
    """Stack each frame with its w neighbors on both sides, edge-clamped.

    x_flat: (N, 2J) -> (N, (2w+1) * 2J).
    """
    n = x_flat.shape[0]
    cols = []
    for off in range(-window, window + 1):
        idx = np.clip(np.arange(n) + off, 0, n - 1)
        cols.append(x_flat[idx])
    return np.concatenate(cols, axis=1)


def lift(lifter: ToyLifter, x_flat: np.ndarray) -> np.ndarray:
    """Predict (N, J, 3) root-relative poses from (N, 2J) keypoints."""
    xw = window_inputs(np.asarray(x_flat, dtype=np.float64), lifter.window)
    if xw.shape[1] != lifter.weight.shape[1]:
        raise DimensionMismatch(
            f"lifter expects windowed dim {lifter.weight.shape[1]}, got {xw.shape[1]}"
        )
    out = xw @ lifter.weight.T + lifter.bias
    poses = out.reshape(x_flat.shape[0], lifter.n_joints, 3)
    return poses - poses[:, :1, :]


def fit_toy_lifter(
    dataset: list[tuple[np.ndarray, np.ndarray]], window: int = 1
) -> ToyLifter:
    """Least-squares fit of the affine map on (keypoints, 3D pose) pairs.

    dataset entries are ((N, 2J) normalized keypoints, (N, J, 3) poses);
    targets are made root-relative before fitting.
    """
    if not dataset:
        raise SchemaError("empty lifter training set")
    xs, ys = [], []
    for x_flat, poses in dataset:
        x_flat = np.asarray(x_flat, dtype=np.float64)
        poses = np.asarray(poses, dtype=np.float64)
        xs.append(window_inputs(x_flat, window))
        rel = poses - poses[:, :1, :]
        ys.append(rel.reshape(poses.shape[0], -1))
    x = np.concatenate(xs, axis=0)
    y = np.concatenate(ys, axis=0)
    x1 = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    sol, *_ = np.linalg.lstsq(x1, y, rcond=None)
    return ToyLifter(weight=sol[:-1].T, bias=sol[-1], window=window)


@dataclass(frozen=True)
class FinetuneConfig:
    lr: float = 4e-5
    lr_decay: float = 0.95
    epochs: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def finetune_loss_and_grads(
    lifter: ToyLifter,
    x_flat: np.ndarray,
    truth_frames: np.ndarray,
    target_lengths: np.ndarray,
    topo: SkeletonTopology,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Combined loss for one sequence and its exact lifter gradients.

    Loss = mean direction error + mean adjusted-position error (meters),
    where the adjusted pose is rebuilt from the lifter's directions and
    the frozen target_lengths. Gradients flow only through the
    directions; degenerate predicted bones make the direction undefined,
    which surfaces as NonFiniteLoss.
    """
    x_flat = np.asarray(x_flat, dtype=np.float64)
    truth = np.asarray(truth_frames, dtype=np.float64)
    lengths = np.asarray(target_lengths, dtype=np.float64)
    parents = topo.parent_array
    n = x_flat.shape[0]
    j = topo.joint_count
    bones = topo.bone_count

    xw = window_inputs(x_flat, lifter.window)
    out = xw @ lifter.weight.T + lifter.bias
    poses = out.reshape(n, j, 3)

    offsets = poses[:, 1:, :] - poses[:, parents, :]
    norms = np.linalg.norm(offsets, axis=2)
    if not np.isfinite(norms).all() or (norms < 1e-12).any():
        raise NonFiniteLoss(batch_index=-1)
    dirs = offsets / norms[:, :, None]

    truth_rel = truth - truth[:, :1, :]
    t_offsets = truth_rel[:, 1:, :] - truth_rel[:, parents, :]
    t_norms = np.linalg.norm(t_offsets, axis=2)
    t_dirs = t_offsets / t_norms[:, :, None]

    # direction loss
    err = dirs - t_dirs
    err_norm = np.linalg.norm(err, axis=2)
    loss_dir = float(err_norm.mean())
    with np.errstate(invalid="ignore", divide="ignore"):
        g_dirs = np.where(err_norm[:, :, None] > 0, err / err_norm[:, :, None], 0.0)
    g_dirs = g_dirs / (n * bones)

    # adjusted pose, root pinned at the origin
    adjusted = np.zeros((n, j, 3))
    for slot, parent in enumerate(topo.parents[1:]):
        adjusted[:, slot + 1, :] = (
            adjusted[:, parent, :] + lengths[slot] * dirs[:, slot, :]
        )
    pos_err = adjusted - truth_rel
    pos_norm = np.linalg.norm(pos_err, axis=2)
    loss_pos = float(pos_norm.mean())
    with np.errstate(invalid="ignore", divide="ignore"):
        g_q = np.where(pos_norm[:, :, None] > 0, pos_err / pos_norm[:, :, None], 0.0)
    g_q = g_q / (n * j)

    # pull joint gradients down the tree (children into parents), then to
    # each bone's direction
    for slot in range(bones - 1, -1, -1):
        parent = topo.parents[slot + 1]
        if parent != 0:
            g_q[:, parent, :] += g_q[:, slot + 1, :]
    g_dirs = g_dirs + lengths[None, :, None] * g_q[:, 1:, :]

    # through the normalization d = u / |u|
    dot = np.sum(g_dirs * dirs, axis=2, keepdims=True)
    g_offsets = (g_dirs - dirs * dot) / norms[:, :, None]

    # scatter bone-offset gradients to joints (parents can repeat)
    g_joints = np.zeros_like(poses)
    g_joints[:, 1:, :] += g_offsets
    for slot, parent in enumerate(topo.parents[1:]):
        g_joints[:, parent, :] -= g_offsets[:, slot, :]

    flat_g = g_joints.reshape(n, 3 * j)
    g_weight = flat_g.T @ xw
    g_bias = flat_g.sum(axis=0)
    return loss_dir + loss_pos, g_weight, g_bias


def finetune_toy_lifter(
    lifter: ToyLifter,
    dataset: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    topo: SkeletonTopology,
    cfg: FinetuneConfig = FinetuneConfig(),
) -> tuple[ToyLifter, list[dict]]:
    """Fine-tune the lifter with Adam while the length model stays frozen.

    dataset entries: ((N, 2J) keypoints, (N, J, 3) truth poses, (J-1,)
    frozen predicted lengths). One Adam step per sequence, sequences in a
    fixed order, so runs are reproducible.
    """
    tuned = lifter.copy()
    m_w = np.zeros_like(tuned.weight)
    v_w = np.zeros_like(tuned.weight)
    m_b = np.zeros_like(tuned.bias)
    v_b = np.zeros_like(tuned.bias)
    t = 0
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr * cfg.lr_decay**epoch
        losses = []
        for seq_index, (x_flat, truth, lengths) in enumerate(dataset):
            loss, g_w, g_b = finetune_loss_and_grads(tuned, x_flat, truth, lengths, topo)
            if not np.isfinite(loss):
                raise NonFiniteLoss(seq_index)
            t += 1
            for value, grad, m, v in ((tuned.weight, g_w, m_w, v_w), (tuned.bias, g_b, m_b, v_b)):
                m *= cfg.beta1
                m += (1 - cfg.beta1) * grad
                v *= cfg.beta2
                v += (1 - cfg.beta2) * grad * grad
                m_hat = m / (1 - cfg.beta1**t)
                v_hat = v / (1 - cfg.beta2**t)
                value -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            losses.append(loss)
        log.append({"epoch": epoch, "lr": lr, "loss": float(np.mean(losses))})
    return tuned, log
