"""Online inference micro-benchmark.

Measures frames per second for (a) the frame-by-frame length update
alone and (b) the update plus adjusting one lifter pose with the fresh
lengths. Case (b) does strictly more work per step, so its FPS can only
be lower. Numbers are wall-clock measurements and are not part of the
deterministic-output contract.
"""

from __future__ import annotations

import time

import numpy as np

from .length_model import LengthModelParams, OnlineState, forward_online
from .skeleton import SkeletonTopology, replace_lengths_frames

WARMUP_STEPS = 100


def _latency_stats(samples_ns: np.ndarray) -> dict:
    return {
        "median_us": float(np.median(samples_ns)) / 1e3,
        "p95_us": float(np.percentile(samples_ns, 95)) / 1e3,
    }


def bench_online(
    params: LengthModelParams,
    topo: SkeletonTopology,
    repetitions: int = 10_000,
    seed: int = 0,
) -> dict:
    """Run the online model for `repetitions` single-frame steps.

    The input stream is a seeded random walk in normalized keypoint
    space; the adjusted pose is a fixed template rebuilt each step with
    the newly predicted lengths.
    """
    if repetitions <= 0:
        return {"repetitions": 0}
    if params.bidirectional:
        raise ValueError("bench_online needs a unidirectional checkpoint")

    rng = np.random.default_rng(seed)
    dim = params.input_dim
    from .corpus import canonical_directions
    from .skeleton import reconstruct_frames

    dirs = canonical_directions(topo)[None]
    template = reconstruct_frames(
        np.full((1, topo.bone_count), 0.3), dirs, np.array([[0.0, 0.0, 4.5]]), topo
    )

    def stream():
        x = rng.normal(0.0, 0.1, size=dim)
        while True:
            x = x + rng.normal(0.0, 0.01, size=dim)
            yield x

    frames = stream()

    # warmup (not measured)
    state = OnlineState(hidden=np.zeros(params.c_prime))
    for _ in range(min(WARMUP_STEPS, repetitions)):
        state, _ = forward_online(state, next(frames), params)

    # (a) update only
    state = OnlineState(hidden=np.zeros(params.c_prime))
    lat_update = np.empty(repetitions)
    t_all = time.perf_counter()
    for i in range(repetitions):
        x = next(frames)
        t0 = time.perf_counter_ns()
        state, lengths = forward_online(state, x, params)
        lat_update[i] = time.perf_counter_ns() - t0
    total_update = time.perf_counter() - t_all

    # (b) update + adjust a template pose with the fresh lengths
    state = OnlineState(hidden=np.zeros(params.c_prime))
    lat_adjust = np.empty(repetitions)
    t_all = time.perf_counter()
    for i in range(repetitions):
        x = next(frames)
        t0 = time.perf_counter_ns()
        state, lengths = forward_online(state, x, params)
        replace_lengths_frames(template, lengths, topo)
        lat_adjust[i] = time.perf_counter_ns() - t0
    total_adjust = time.perf_counter() - t_all

    return {
        "repetitions": repetitions,
        "update_only": {
            "fps": repetitions / total_update,
            **_latency_stats(lat_update),
        },
        "update_adjust": {
            "fps": repetitions / total_adjust,
            **_latency_stats(lat_adjust),
        },
    }
