"""Bone length prediction from 2D keypoint sequences.

Architecture: a linear projection lifts each flattened keypoint frame to c
dimensions, a single recurrent layer (GRU, optionally bidirectional) reads
the projected sequence from zero initial hidden state, and a bias-free
linear head maps the final hidden state(s) to one length per bone. The
bidirectional variant concatenates the last forward and last backward
hidden states; the unidirectional variant supports frame-by-frame online
updates.

Everything here is plain float64 numpy. The backward pass is exact
reverse-mode differentiation of the forward recurrence (checked against
central finite differences in the tests), and training uses Adam with a
per-epoch exponential learning-rate decay.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import KeypointSequence
from .errors import DimensionMismatch, NonFiniteLoss, SchemaError
from .skeleton import SkeletonTopology

CHECKPOINT_SCHEMA = 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow for very negative x lands on +inf, which the reciprocal
    # turns into the correct 0.0, so only the warning needs silencing.
    with np.errstate(over="ignore"):
        out = np.exp(-x)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


@dataclass
class GRUGateParams:
    """One direction's gate parameters (update z, reset r, candidate h)."""

    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    FIELDS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


@dataclass
class LengthModelParams:
    """All parameters of the length model.

    w_p: (c, 2J) input projection, b_p: (c,) its bias.
    fwd/bwd: recurrent gate parameters (bwd is None for the online model).
    head: (J-1, h_dim) bias-free regression, h_dim = 2c' bidirectional
    or c' unidirectional.
    """

    w_p: np.ndarray
    b_p: np.ndarray
    fwd: GRUGateParams
    bwd: GRUGateParams | None
    head: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w_p.shape[1]

    @property
    def c(self) -> int:
        return self.w_p.shape[0]

    @property
    def c_prime(self) -> int:
        return self.fwd.w_z.shape[0]

    @property
    def bidirectional(self) -> bool:
        return self.bwd is not None

    @property
    def n_joints(self) -> int:
        return self.input_dim // 2

    @property
    def bone_count(self) -> int:
        return self.head.shape[0]

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameter tensors in the fixed declaration order."""
        items = [("w_p", self.w_p), ("b_p", self.b_p)]
        items += [(f"fwd.{f}", getattr(self.fwd, f)) for f in GRUGateParams.FIELDS]
        if self.bwd is not None:
            items += [(f"bwd.{f}", getattr(self.bwd, f)) for f in GRUGateParams.FIELDS]
        items.append(("head", self.head))
        return items

    def set_array(self, name: str, value: np.ndarray) -> None:
        if "." in name:
            prefix, fname = name.split(".", 1)
            setattr(getattr(self, prefix), fname, value)
        else:
            setattr(self, name, value)

    def zeros_like(self) -> "LengthModelParams":
        def zg(g: GRUGateParams | None):
            if g is None:
                return None
            return GRUGateParams(**{f: np.zeros_like(getattr(g, f)) for f in GRUGateParams.FIELDS})

        return LengthModelParams(
            w_p=np.zeros_like(self.w_p),
            b_p=np.zeros_like(self.b_p),
            fwd=zg(self.fwd),
            bwd=zg(self.bwd),
            head=np.zeros_like(self.head),
        )

    def copy(self) -> "LengthModelParams":
        def cg(g: GRUGateParams | None):
            if g is None:
                return None
            return GRUGateParams(**{f: getattr(g, f).copy() for f in GRUGateParams.FIELDS})

        return LengthModelParams(
            w_p=self.w_p.copy(), b_p=self.b_p.copy(), fwd=cg(self.fwd), bwd=cg(self.bwd),
            head=self.head.copy(),
        )


@dataclass(frozen=True)
class TrainConfig:
    sequence_length: int = 512
    batch_size: int = 256
    lr: float = 1e-4
    lr_decay: float = 0.95
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    flip: bool = True
    c: int = 256
    c_prime: int = 512
    bidirectional: bool = True

    def __post_init__(self):
        if self.sequence_length < 1:
            raise SchemaError("sequence_length must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise SchemaError("lr_decay must be in (0, 1]")


@dataclass
class OnlineState:
    """Recurrent state carried across frames by the online model."""

    hidden: np.ndarray
    frames_seen: int = 0

    def to_bytes(self) -> bytes:
        return struct.pack("<q", self.frames_seen) + self.hidden.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "OnlineState":
        frames_seen = struct.unpack("<q", blob[:8])[0]
        hidden = np.frombuffer(blob[8:], dtype="<f8").astype(np.float64)
        return cls(hidden=hidden, frames_seen=frames_seen)


def init_params(
    n_joints: int,
    c: int = 256,
    c_prime: int = 512,
    bidirectional: bool = True,
    seed: int = 0,
) -> LengthModelParams:
    """Seeded uniform init, bound 1/sqrt(fan_in) per tensor."""
    rng = np.random.default_rng(seed)
    two_j = 2 * n_joints

    def u(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def gates():
        return GRUGateParams(
            w_z=u((c_prime, c), c), u_z=u((c_prime, c_prime), c_prime), b_z=u((c_prime,), c_prime),
            w_r=u((c_prime, c), c), u_r=u((c_prime, c_prime), c_prime), b_r=u((c_prime,), c_prime),
            w_h=u((c_prime, c), c), u_h=u((c_prime, c_prime), c_prime), b_h=u((c_prime,), c_prime),
        )

    w_p = u((c, two_j), two_j)
    b_p = u((c,), two_j)
    fwd = gates()
    bwd = gates() if bidirectional else None
    h_dim = 2 * c_prime if bidirectional else c_prime
    head = u((n_joints - 1, h_dim), h_dim)
    return LengthModelParams(w_p=w_p, b_p=b_p, fwd=fwd, bwd=bwd, head=head)


def project_input(x: np.ndarray, params: LengthModelParams) -> np.ndarray:
    """Affine projection of one flattened keypoint frame."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise DimensionMismatch(f"expected input ({params.input_dim},), got {x.shape}")
    return params.w_p @ x + params.b_p


def gru_cell(xp: np.ndarray, h_prev: np.ndarray, g: GRUGateParams) -> np.ndarray:
    """One recurrent step: h = (1-z) * h_prev + z * candidate."""
    xp = np.asarray(xp, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if xp.shape != (g.w_z.shape[1],) or h_prev.shape != (g.w_z.shape[0],):
        raise DimensionMismatch(
            f"gru_cell shapes: xp {xp.shape}, h_prev {h_prev.shape}, gates {g.w_z.shape}"
        )
    z = _sigmoid(g.w_z @ xp + g.u_z @ h_prev + g.b_z)
    r = _sigmoid(g.w_r @ xp + g.u_r @ h_prev + g.b_r)
    hh = np.tanh(g.w_h @ xp + g.u_h @ (r * h_prev) + g.b_h)
    return (1.0 - z) * h_prev + z * hh


def _final_hidden(x_frames: np.ndarray, params: LengthModelParams, g: GRUGateParams) -> np.ndarray:
    h = np.zeros(params.c_prime, dtype=np.float64)
    for t in range(x_frames.shape[0]):
        h = gru_cell(project_input(x_frames[t], params), h, g)
    return h


def forward_bigru(x_frames: np.ndarray, params: LengthModelParams) -> np.ndarray:
    """Whole-sequence forward pass, (N, 2J) keypoints to (J-1,) lengths.

    Both directions start from zero hidden state; the head sees the
    concatenated final hidden states. Raw lengths are returned (they are
    only guaranteed positive for a trained model).
    """
    x_frames = np.asarray(x_frames, dtype=np.float64)
    if x_frames.ndim != 2 or x_frames.shape[1] != params.input_dim:
        raise DimensionMismatch(f"expected (N, {params.input_dim}), got {x_frames.shape}")
    if params.bwd is None:
        return params.head @ _final_hidden(x_frames, params, params.fwd)
    h_f = _final_hidden(x_frames, params, params.fwd)
    h_b = _final_hidden(x_frames[::-1], params, params.bwd)
    return params.head @ np.concatenate([h_f, h_b])


def forward_online(
    state: OnlineState, x: np.ndarray, params: LengthModelParams
) -> tuple[OnlineState, np.ndarray]:
    """One frame-by-frame update; returns the new state and lengths.

    Uses exactly the same step functions as the batch unidirectional pass,
    so feeding a sequence stepwise reproduces that pass bit for bit.
    """
    if params.bwd is not None:
        raise DimensionMismatch("online updates need a unidirectional model")
    h = gru_cell(project_input(x, params), state.hidden, params.fwd)
    return OnlineState(hidden=h, frames_seen=state.frames_seen + 1), params.head @ h


def length_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error between length vectors."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DimensionMismatch(f"length vectors differ: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


# ---------------------------------------------------------------------------
# Batched forward/backward used by training.


@dataclass
class _DirCache:
    h_prev: np.ndarray  # (N, B, c')
    z: np.ndarray
    r: np.ndarray
    hh: np.ndarray


@dataclass
class _BatchCache:
    x: np.ndarray        # (B, N, 2J)
    xp: np.ndarray       # (B, N, c)
    fwd: _DirCache
    bwd: _DirCache | None
    h_cat: np.ndarray    # (B, h_dim)
    lengths: np.ndarray  # (B, J-1)


def _gru_forward_batch(xp_seq: np.ndarray, g: GRUGateParams) -> tuple[np.ndarray, _DirCache]:
    """xp_seq: (B, N, c) already ordered in processing direction.

    The input-side gate terms for every timestep are computed in one
    matmul up front; only the recurrent terms run inside the loop.
    """
    b, n, _ = xp_seq.shape
    cp = g.w_z.shape[0]
    cache = _DirCache(
        h_prev=np.empty((n, b, cp)), z=np.empty((n, b, cp)),
        r=np.empty((n, b, cp)), hh=np.empty((n, b, cp)),
    )
    w_zr = np.concatenate([g.w_z, g.w_r], axis=0)
    u_zr = np.concatenate([g.u_z, g.u_r], axis=0)
    b_zr = np.concatenate([g.b_z, g.b_r])
    # one flat matmul for the input side of every step, laid out (N, B, .)
    # so the loop reads contiguous slices
    flat = xp_seq.reshape(b * n, -1)
    pre_zr = (flat @ w_zr.T + b_zr).reshape(b, n, 2 * cp).transpose(1, 0, 2).copy()
    pre_h = (flat @ g.w_h.T + g.b_h).reshape(b, n, cp).transpose(1, 0, 2).copy()
    h = np.zeros((b, cp), dtype=np.float64)
    for t in range(n):
        zr = h @ u_zr.T
        zr += pre_zr[t]
        zr = _sigmoid(zr)
        z, r = zr[:, :cp], zr[:, cp:]
        rh = r * h
        hh = rh @ g.u_h.T
        hh += pre_h[t]
        np.tanh(hh, out=hh)
        cache.h_prev[t] = h
        cache.z[t] = z
        cache.r[t] = r
        cache.hh[t] = hh
        # h <- (1 - z) * h + z * hh, built in place
        step = hh - h
        step *= z
        h = h + step
    return h, cache


def _gru_backward_batch(
    d_h_final: np.ndarray, xp_seq: np.ndarray, cache: _DirCache, g: GRUGateParams
) -> tuple[np.ndarray, GRUGateParams]:
    """Reverse-mode through the recurrence; returns (dxp_seq, gate grads).

    The sequential loop only carries the recurrent gradient; weight
    gradients are reduced afterwards with large matmuls over all steps.
    """
    b, n, _ = xp_seq.shape
    cp = g.w_z.shape[0]
    d_z = np.empty((n, b, cp))
    d_r = np.empty((n, b, cp))
    d_hh = np.empty((n, b, cp))
    gh = d_h_final
    for t in range(n - 1, -1, -1):
        h_prev, z, r, hh = cache.h_prev[t], cache.z[t], cache.r[t], cache.hh[t]
        one_minus_z = 1.0 - z
        dz_pre = hh - h_prev
        dz_pre *= gh
        dz_pre *= z
        dz_pre *= one_minus_z
        dhh_pre = hh * hh
        np.subtract(1.0, dhh_pre, out=dhh_pre)
        dhh_pre *= gh
        dhh_pre *= z
        da = dhh_pre @ g.u_h  # gradient w.r.t. (r * h_prev)
        dr_pre = 1.0 - r
        dr_pre *= r
        dr_pre *= h_prev
        dr_pre *= da
        d_z[t] = dz_pre
        d_r[t] = dr_pre
        d_hh[t] = dhh_pre
        gh = gh * one_minus_z
        gh += dz_pre @ g.u_z
        da *= r
        gh += da
        gh += dr_pre @ g.u_r
    rh = cache.r * cache.h_prev
    flat = {
        "z": d_z.reshape(-1, cp), "r": d_r.reshape(-1, cp), "hh": d_hh.reshape(-1, cp),
        "xp": xp_seq.transpose(1, 0, 2).reshape(-1, xp_seq.shape[2]),
        "h_prev": cache.h_prev.reshape(-1, cp), "rh": rh.reshape(-1, cp),
    }
    grads = GRUGateParams(
        w_z=flat["z"].T @ flat["xp"], u_z=flat["z"].T @ flat["h_prev"], b_z=flat["z"].sum(axis=0),
        w_r=flat["r"].T @ flat["xp"], u_r=flat["r"].T @ flat["h_prev"], b_r=flat["r"].sum(axis=0),
        w_h=flat["hh"].T @ flat["xp"], u_h=flat["hh"].T @ flat["rh"], b_h=flat["hh"].sum(axis=0),
    )
    d_xp = (flat["z"] @ g.w_z + flat["r"] @ g.w_r + flat["hh"] @ g.w_h)
    d_xp = d_xp.reshape(n, b, -1).transpose(1, 0, 2)
    return d_xp, grads


def forward_batch(x: np.ndarray, params: LengthModelParams) -> tuple[np.ndarray, _BatchCache]:
    """Batched forward over (B, N, 2J); returns lengths (B, J-1) and cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != params.input_dim:
        raise DimensionMismatch(f"expected (B, N, {params.input_dim}), got {x.shape}")
    xp = x @ params.w_p.T + params.b_p
    h_f, cache_f = _gru_forward_batch(xp, params.fwd)
    if params.bwd is not None:
        h_b, cache_b = _gru_forward_batch(xp[:, ::-1, :], params.bwd)
        h_cat = np.concatenate([h_f, h_b], axis=1)
    else:
        cache_b = None
        h_cat = h_f
    lengths = h_cat @ params.head.T
    return lengths, _BatchCache(x=x, xp=xp, fwd=cache_f, bwd=cache_b, h_cat=h_cat, lengths=lengths)


def backward_batch(
    cache: _BatchCache, d_lengths: np.ndarray, params: LengthModelParams
) -> LengthModelParams:
    """Gradients of sum(d_lengths * lengths) w.r.t. every parameter."""
    grads = params.zeros_like()
    grads.head += d_lengths.T @ cache.h_cat
    d_h_cat = d_lengths @ params.head
    cp = params.c_prime
    d_xp = np.zeros_like(cache.xp)
    dxp_f, g_f = _gru_backward_batch(d_h_cat[:, :cp], cache.xp, cache.fwd, params.fwd)
    d_xp += dxp_f
    for f in GRUGateParams.FIELDS:
        getattr(grads.fwd, f)[...] = getattr(g_f, f)
    if params.bwd is not None:
        dxp_b, g_b = _gru_backward_batch(
            d_h_cat[:, cp:], cache.xp[:, ::-1, :], cache.bwd, params.bwd
        )
        d_xp += dxp_b[:, ::-1, :]
        for f in GRUGateParams.FIELDS:
            getattr(grads.bwd, f)[...] = getattr(g_b, f)
    flat_dxp = d_xp.reshape(-1, params.c)
    flat_x = cache.x.reshape(-1, params.input_dim)
    grads.w_p += flat_dxp.T @ flat_x
    grads.b_p += flat_dxp.sum(axis=0)
    return grads


def batch_loss(x: np.ndarray, targets: np.ndarray, params: LengthModelParams) -> float:
    lengths, _ = forward_batch(x, params)
    return float(np.mean(np.abs(lengths - targets)))


def batch_loss_and_grads(
    x: np.ndarray, targets: np.ndarray, params: LengthModelParams
) -> tuple[float, LengthModelParams]:
    """Mean-over-batch MAE loss and its exact gradients.

    The absolute-value subgradient at zero is taken as 0.
    """
    targets = np.asarray(targets, dtype=np.float64)
    lengths, cache = forward_batch(x, params)
    if lengths.shape != targets.shape:
        raise DimensionMismatch(f"targets {targets.shape} vs predictions {lengths.shape}")
    diff = lengths - targets
    loss = float(np.mean(np.abs(diff)))
    d_lengths = np.sign(diff) / diff.size
    return loss, backward_batch(cache, d_lengths, params)


# ---------------------------------------------------------------------------
# Optimizer and training loop.


class Adam:
    """Adam with externally supplied (scheduled) learning rate."""

    def __init__(self, params: LengthModelParams, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.named_arrays()}
        self.v = {k: np.zeros_like(v) for k, v in params.named_arrays()}

    def step(self, params: LengthModelParams, grads: LengthModelParams, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        grad_map = dict(grads.named_arrays())
        for name, value in params.named_arrays():
            g = grad_map[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1**self.t)
            v_hat = self.v[name] / (1 - b2**self.t)
            value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def slice_segments(frames: np.ndarray, n: int) -> list[np.ndarray]:
    """Non-overlapping windows of length n; the final partial one is dropped."""
    return [frames[s : s + n] for s in range(0, frames.shape[0] - n + 1, n)]


def flatten_keypoints(kps: KeypointSequence) -> np.ndarray:
    """(N, J, 2) keypoints to the model's (N, 2J) layout (u0,v0,u1,v1,...)."""
    n, j, _ = kps.frames.shape
    return kps.frames.reshape(n, 2 * j)


def flip_flat_keypoints(x: np.ndarray, topo: SkeletonTopology) -> np.ndarray:
    """Horizontal flip in normalized coordinates: negate u, swap sides.

    Works on (..., 2J) arrays laid out like flatten_keypoints.
    """
    j = topo.joint_count
    pts = x.reshape(x.shape[:-1] + (j, 2)).copy()
    pts = pts[..., topo.joint_swap_map(), :]
    pts[..., 0] = -pts[..., 0]
    return pts.reshape(x.shape)


def flip_targets(targets: np.ndarray, topo: SkeletonTopology) -> np.ndarray:
    """Permute per-bone targets with the left/right bone swap."""
    return targets[..., topo.bone_swap_map()]


def predict_lengths(
    x_frames: np.ndarray,
    params: LengthModelParams,
    topo: SkeletonTopology | None = None,
    flip: bool = False,
) -> np.ndarray:
    """Full-sequence prediction, optionally flip-averaged."""
    pred = forward_bigru(x_frames, params)
    if not flip:
        return pred
    if topo is None:
        raise SchemaError("flip-averaged prediction needs the topology")
    flipped = forward_bigru(flip_flat_keypoints(x_frames, topo), params)
    return 0.5 * (pred + flip_targets(flipped, topo))


@dataclass
class TrainLogEntry:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float | None = None

    def to_dict(self) -> dict:
        out = {"epoch": self.epoch, "lr": self.lr, "train_loss": self.train_loss}
        if self.val_loss is not None:
            out["val_loss"] = self.val_loss
        return out


def _stack_segments(
    dataset: list[tuple[KeypointSequence, np.ndarray]], n: int
) -> tuple[np.ndarray, np.ndarray]:
    xs, ts = [], []
    for kps, target in dataset:
        target = np.asarray(getattr(target, "values", target), dtype=np.float64)
        for seg in slice_segments(flatten_keypoints(kps), n):
            xs.append(seg)
            ts.append(target)
    if not xs:
        raise SchemaError(f"no sequence is long enough to slice to {n} frames")
    return np.stack(xs), np.stack(ts)


def train(
    dataset: list[tuple[KeypointSequence, np.ndarray]],
    cfg: TrainConfig,
    topo: SkeletonTopology,
    val_dataset: list[tuple[KeypointSequence, np.ndarray]] | None = None,
) -> tuple[LengthModelParams, list[TrainLogEntry]]:
    """Train a length model; deterministic for a fixed config and seed.

    Sequences are sliced into fixed-size segments (remainders dropped).
    When cfg.flip is on, every batch is doubled with the horizontally
    flipped copies of its samples. Batches are visited in a seeded
    shuffled order, and gradients are reduced sequentially, so reruns are
    bit-identical.
    """
    if not dataset:
        raise SchemaError("empty training dataset")
    x_all, t_all = _stack_segments(dataset, cfg.sequence_length)
    val = None
    if val_dataset:
        val = _stack_segments(val_dataset, cfg.sequence_length)

    params = init_params(
        n_joints=topo.joint_count, c=cfg.c, c_prime=cfg.c_prime,
        bidirectional=cfg.bidirectional, seed=cfg.seed,
    )
    opt = Adam(params, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)
    log: list[TrainLogEntry] = []
    n_samples = x_all.shape[0]
    batch_counter = 0

    for epoch in range(cfg.epochs):
        lr = cfg.lr * cfg.lr_decay**epoch
        order = shuffle_rng.permutation(n_samples)
        loss_sum = 0.0
        weight_sum = 0
        for start in range(0, n_samples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, tb = x_all[idx], t_all[idx]
            if cfg.flip:
                xb = np.concatenate([xb, flip_flat_keypoints(xb, topo)], axis=0)
                tb = np.concatenate([tb, flip_targets(tb, topo)], axis=0)
            loss, grads = batch_loss_and_grads(xb, tb, params)
            if not np.isfinite(loss):
                raise NonFiniteLoss(batch_counter)
            opt.step(params, grads, lr)
            loss_sum += loss * xb.shape[0]
            weight_sum += xb.shape[0]
            batch_counter += 1
        entry = TrainLogEntry(epoch=epoch, lr=lr, train_loss=loss_sum / weight_sum)
        if val is not None:
            entry.val_loss = _eval_loss(val[0], val[1], params, cfg.batch_size)
        log.append(entry)
    return params, log


def _eval_loss(x: np.ndarray, t: np.ndarray, params: LengthModelParams, batch: int) -> float:
    total = 0.0
    for start in range(0, x.shape[0], batch):
        xb, tb = x[start : start + batch], t[start : start + batch]
        lengths, _ = forward_batch(xb, params)
        total += float(np.abs(lengths - tb).sum())
    return total / (x.shape[0] * t.shape[1])


# ---------------------------------------------------------------------------
# Checkpoint file: one JSON header line, then float32 tensors in
# declaration order.


def save_checkpoint(path: str | Path, params: LengthModelParams, seed: int = 0) -> None:
    header = {
        "schema": CHECKPOINT_SCHEMA,
        "c": params.c,
        "c_prime": params.c_prime,
        "J": params.n_joints,
        "bidirectional": params.bidirectional,
        "seed": seed,
    }
    from .bundle import canonical_json

    with open(path, "wb") as fh:
        fh.write(canonical_json(header).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in params.named_arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[LengthModelParams, dict]:
    blob = Path(path).read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise SchemaError(f"{path}: missing checkpoint header")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: bad checkpoint header: {exc}") from exc
    if header.get("schema") != CHECKPOINT_SCHEMA:
        raise SchemaError(f"{path}: unsupported checkpoint schema")
    try:
        c, cp, j = int(header["c"]), int(header["c_prime"]), int(header["J"])
        bidirectional = bool(header["bidirectional"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad checkpoint header: {exc}") from exc

    template = init_params(n_joints=j, c=c, c_prime=cp, bidirectional=bidirectional, seed=0)
    payload = blob[newline + 1 :]
    offset = 0
    for name, arr in template.named_arrays():
        nbytes = arr.size * 4
        if offset + nbytes > len(payload):
            raise SchemaError(f"{path}: checkpoint payload too short at {name}")
        values = np.frombuffer(payload, dtype="<f4", count=arr.size, offset=offset)
        template.set_array(name, values.astype(np.float64).reshape(arr.shape))
        offset += nbytes
    if offset != len(payload):
        raise SchemaError(f"{path}: checkpoint payload longer than declared")
    return template, header
