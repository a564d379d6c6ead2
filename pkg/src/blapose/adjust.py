"""Pose adjustment and the evaluation metric suite.

Adjustment swaps the bone lengths of predicted poses for externally
predicted lengths while keeping every bone direction and the root, which
is the identity the whole pipeline rests on: with groundtruth directions
and groundtruth lengths the reconstruction error is exactly zero.

Metrics: MPJPE (protocol 1, root-relative), P-MPJPE (protocol 2, after
the closed-form similarity alignment), and the mean absolute bone length
error. All reported in millimeters; poses are meters internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, DimensionMismatch, LabelMismatch
from .length_model import length_loss
from .skeleton import (
    BoneDirections,
    BoneLengths,
    Pose,
    PoseSequence,
    SkeletonTopology,
    decompose_frames,
    decompose_pose,
    replace_lengths_frames,
)

M_TO_MM = 1000.0


def _as_joints(pose) -> np.ndarray:
    arr = pose.joints if isinstance(pose, Pose) else np.asarray(pose, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionMismatch(f"expected (J, 3) joints, got {arr.shape}")
    return arr


def mpjpe(pred, truth) -> float:
    """Mean per-joint position error in millimeters.

    Both poses are expected to be root-relative already.
    """
    p, t = _as_joints(pred), _as_joints(truth)
    if p.shape != t.shape:
        raise DimensionMismatch(f"joint counts differ: {p.shape} vs {t.shape}")
    return float(np.mean(np.linalg.norm(p - t, axis=1))) * M_TO_MM


def mpjpe_frames(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-frame MPJPE in millimeters for (N, J, 3) arrays."""
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    return np.mean(np.linalg.norm(pred - truth, axis=2), axis=1) * M_TO_MM


def similarity_align(pred: np.ndarray, truth: np.ndarray, allow_reflection: bool = False):
    """Least-squares similarity transform mapping pred onto truth.

    Returns (scale, rotation, translation) minimizing
    sum ||s R p_i + t - y_i||^2, with det(R) = +1 unless reflections are
    explicitly allowed.
    """
    x, y = _as_joints(pred), _as_joints(truth)
    if x.shape != y.shape or x.shape[0] < 3:
        raise DimensionMismatch("alignment needs matching poses with J >= 3")
    mu_x, mu_y = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mu_x, y - mu_y
    var_x = float((xc**2).sum()) / x.shape[0]
    if var_x < 1e-18:
        raise DegenerateConfiguration("prediction has zero variance")
    cov = yc.T @ xc / x.shape[0]
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.ones(3)
    if not allow_reflection and np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2] = -1.0
    rot = u @ np.diag(s_fix) @ vt
    scale = float((d * s_fix).sum()) / var_x
    trans = mu_y - scale * rot @ mu_x
    return scale, rot, trans


def p_mpjpe(pred, truth, allow_reflection: bool = False) -> float:
    """MPJPE after optimal similarity alignment, in millimeters."""
    x, y = _as_joints(pred), _as_joints(truth)
    scale, rot, trans = similarity_align(x, y, allow_reflection)
    aligned = scale * x @ rot.T + trans
    return mpjpe(aligned, y)


def p_mpjpe_frames(
    pred: np.ndarray, truth: np.ndarray, allow_reflection: bool = False
) -> np.ndarray:
    """Per-frame P-MPJPE in millimeters, vectorized over (N, J, 3)."""
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    n, j, _ = pred.shape
    mu_x = pred.mean(axis=1, keepdims=True)
    mu_y = truth.mean(axis=1, keepdims=True)
    xc, yc = pred - mu_x, truth - mu_y
    var_x = (xc**2).sum(axis=(1, 2)) / j
    if (var_x < 1e-18).any():
        raise DegenerateConfiguration("a frame's prediction has zero variance")
    cov = np.einsum("nja,njb->nab", yc, xc) / j
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.ones((n, 3))
    if not allow_reflection:
        dets = np.linalg.det(u) * np.linalg.det(vt)
        s_fix[:, 2] = np.where(dets < 0, -1.0, 1.0)
    rot = np.einsum("nab,nb,nbc->nac", u, s_fix, vt)
    scale = (d * s_fix).sum(axis=1) / var_x
    aligned = scale[:, None, None] * np.einsum("nja,nba->njb", pred, rot)
    trans = mu_y - scale[:, None, None] * np.einsum("nja,nba->njb", mu_x, rot)
    return mpjpe_frames(aligned + trans, truth)


def bone_length_error(pred_lengths, truth_lengths) -> float:
    """Mean absolute bone length difference in millimeters."""
    p = np.asarray(getattr(pred_lengths, "values", pred_lengths), dtype=np.float64)
    t = np.asarray(getattr(truth_lengths, "values", truth_lengths), dtype=np.float64)
    return length_loss(p, t) * M_TO_MM


def direction_loss(pred_dirs, truth_dirs) -> float:
    """Mean Euclidean distance between unit bone directions (unitless)."""
    p = np.asarray(getattr(pred_dirs, "vectors", pred_dirs), dtype=np.float64)
    t = np.asarray(getattr(truth_dirs, "vectors", truth_dirs), dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionMismatch(f"direction shapes differ: {p.shape} vs {t.shape}")
    return float(np.mean(np.linalg.norm(p - t, axis=-1)))


def total_loss(pred_pose: Pose, truth_pose: Pose, topo: SkeletonTopology) -> float:
    """Direction loss plus position loss (position term in meters).

    The position term is MPJPE converted back to meters so the two parts
    are added exactly as defined, one unitless and one in meters.
    """
    _, pred_dirs = decompose_pose(pred_pose, topo)
    _, truth_dirs = decompose_pose(truth_pose, topo)
    pos = mpjpe(pred_pose, truth_pose) / M_TO_MM
    return direction_loss(pred_dirs, truth_dirs) + pos


def adjust_poses(
    pred_poses: PoseSequence, pred_lengths, topo: SkeletonTopology
) -> PoseSequence:
    """Replace every frame's bone lengths with the predicted ones.

    pred_lengths is typically one (J-1,) vector for the whole sequence; a
    per-frame (N, J-1) array is also accepted (used by oracle checks).
    Directions and root positions are untouched.
    """
    values = np.asarray(getattr(pred_lengths, "values", pred_lengths), dtype=np.float64)
    frames = replace_lengths_frames(pred_poses.frames, values, topo)
    return PoseSequence(frames, fps=pred_poses.fps, metadata=dict(pred_poses.metadata))


@dataclass(frozen=True)
class ActionRow:
    action: str
    frames: int
    mpjpe_mm: float
    p_mpjpe_mm: float
    bone_len_err_mm: float


@dataclass
class EvaluationReport:
    """Per-action and overall metrics, overall being frame-weighted."""

    rows: list[ActionRow]
    overall: ActionRow
    fingerprint: str = ""

    def __post_init__(self):
        total = sum(r.frames for r in self.rows)
        if total != self.overall.frames:
            raise LabelMismatch("overall frame count does not match action rows")
        for name in ("mpjpe_mm", "p_mpjpe_mm", "bone_len_err_mm"):
            weighted = sum(getattr(r, name) * r.frames for r in self.rows) / total
            if abs(weighted - getattr(self.overall, name)) > 1e-9:
                raise LabelMismatch(f"overall {name} is not the frame-weighted mean")

    def to_csv_text(self) -> str:
        lines = ["action,frames,mpjpe_mm,p_mpjpe_mm,bone_len_err_mm"]
        for row in list(self.rows) + [self.overall]:
            lines.append(
                f"{row.action},{row.frames},{row.mpjpe_mm:.6f},"
                f"{row.p_mpjpe_mm:.6f},{row.bone_len_err_mm:.6f}"
            )
        return "\n".join(lines) + "\n"

    def to_markdown_text(self) -> str:
        actions = [r.action for r in self.rows]
        header = "| Metric | " + " | ".join(actions) + " | Avg |"
        sep = "|---" * (len(actions) + 2) + "|"
        lines = [header, sep]
        for label, name in (
            ("MPJPE (mm)", "mpjpe_mm"),
            ("P-MPJPE (mm)", "p_mpjpe_mm"),
            ("Bone length error (mm)", "bone_len_err_mm"),
        ):
            cells = [f"{getattr(r, name):.1f}" for r in self.rows]
            cells.append(f"{getattr(self.overall, name):.1f}")
            lines.append(f"| {label} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def row_dict(r: ActionRow) -> dict:
            return {
                "action": r.action, "frames": r.frames, "mpjpe_mm": r.mpjpe_mm,
                "p_mpjpe_mm": r.p_mpjpe_mm, "bone_len_err_mm": r.bone_len_err_mm,
            }

        return {
            "actions": [row_dict(r) for r in self.rows],
            "overall": row_dict(self.overall),
            "fingerprint": self.fingerprint,
        }


def root_relative(frames: np.ndarray) -> np.ndarray:
    return frames - frames[:, :1, :]


def evaluate(
    pred_poses: list[PoseSequence],
    truth_poses: list[PoseSequence],
    actions: list[str],
    topo: SkeletonTopology,
    fingerprint: str = "",
) -> EvaluationReport:
    """Protocol 1 + protocol 2 + bone length error, per action and overall."""
    if not (len(pred_poses) == len(truth_poses) == len(actions)):
        raise LabelMismatch(
            f"got {len(pred_poses)} predictions, {len(truth_poses)} truths, "
            f"{len(actions)} labels"
        )
    acc: dict[str, list[np.ndarray]] = {}
    for pred, truth, action in zip(pred_poses, truth_poses, actions):
        if pred.frames.shape != truth.frames.shape:
            raise LabelMismatch(
                f"sequence shape mismatch for action {action!r}: "
                f"{pred.frames.shape} vs {truth.frames.shape}"
            )
        p_rel = root_relative(pred.frames)
        t_rel = root_relative(truth.frames)
        e1 = mpjpe_frames(p_rel, t_rel)
        e2 = p_mpjpe_frames(p_rel, t_rel)
        pl, _ = decompose_frames(pred.frames, topo)
        tl, _ = decompose_frames(truth.frames, topo)
        e3 = np.mean(np.abs(pl - tl), axis=1) * M_TO_MM
        acc.setdefault(action, []).append(np.stack([e1, e2, e3], axis=1))

    rows = []
    for action in sorted(acc):
        stacked = np.concatenate(acc[action], axis=0)
        rows.append(
            ActionRow(
                action=action,
                frames=stacked.shape[0],
                mpjpe_mm=float(stacked[:, 0].mean()),
                p_mpjpe_mm=float(stacked[:, 1].mean()),
                bone_len_err_mm=float(stacked[:, 2].mean()),
            )
        )
    everything = np.concatenate([np.concatenate(v, axis=0) for v in acc.values()], axis=0)
    overall = ActionRow(
        action="overall",
        frames=everything.shape[0],
        mpjpe_mm=float(everything[:, 0].mean()),
        p_mpjpe_mm=float(everything[:, 1].mean()),
        bone_len_err_mm=float(everything[:, 2].mean()),
    )
    return EvaluationReport(rows=rows, overall=overall, fingerprint=fingerprint)
