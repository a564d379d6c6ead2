import numpy as np
import pytest

import blapose
from blapose.camera import CameraIntrinsics
from blapose.skeleton import SkeletonTopology


@pytest.fixture(scope="session")
def topo() -> SkeletonTopology:
    return SkeletonTopology.from_json(blapose.asset_path(blapose.DEFAULT_TOPOLOGY))


@pytest.fixture(scope="session")
def camera() -> CameraIntrinsics:
    return CameraIntrinsics.from_json(blapose.asset_path(blapose.DEFAULT_CAMERA))


@pytest.fixture(scope="session")
def plain_camera() -> CameraIntrinsics:
    """No distortion, square pixels."""
    return CameraIntrinsics(fx=1000.0, fy=1000.0, cx=500.0, cy=400.0, width=1000, height=800)


def random_pose_frames(rng: np.random.Generator, topo: SkeletonTopology, n: int = 1) -> np.ndarray:
    """Random decomposable poses: random lengths and directions, rebuilt."""
    from blapose.skeleton import reconstruct_frames

    lengths = rng.uniform(0.05, 0.6, size=(n, topo.bone_count))
    dirs = rng.standard_normal((n, topo.bone_count, 3))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    roots = rng.uniform(-1.0, 1.0, size=(n, 3))
    return reconstruct_frames(lengths, dirs, roots, topo)


@pytest.fixture(scope="session")
def chain3() -> SkeletonTopology:
    """Tiny 3-joint chain used by small analytic cases."""
    return SkeletonTopology(
        joint_count=3,
        parents=(-1, 0, 1),
        bone_names=("a", "b"),
        symmetry_pairs=(),
    )
