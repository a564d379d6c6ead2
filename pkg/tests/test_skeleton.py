import numpy as np
import pytest

from blapose.errors import DegenerateBone, SchemaError
from blapose.skeleton import (
    BoneDirections,
    BoneLengths,
    Pose,
    SkeletonTopology,
    decompose_frames,
    decompose_pose,
    reconstruct_frames,
    reconstruct_pose,
    replace_lengths,
    replace_lengths_frames,
)

from conftest import random_pose_frames


class TestTopology:
    def test_packaged_topology_is_valid(self, topo):
        assert topo.joint_count == 17
        assert topo.bone_count == 16
        assert len(topo.symmetry_pairs) == 6

    def test_rejects_bad_parent_order(self):
        with pytest.raises(SchemaError):
            SkeletonTopology(joint_count=3, parents=(-1, 2, 1), bone_names=("a", "b"))

    def test_rejects_non_root_start(self):
        with pytest.raises(SchemaError):
            SkeletonTopology(joint_count=2, parents=(0, 0), bone_names=("a",))

    def test_rejects_overlapping_pairs(self):
        with pytest.raises(SchemaError):
            SkeletonTopology(
                joint_count=4,
                parents=(-1, 0, 0, 0),
                bone_names=("a", "b", "c"),
                symmetry_pairs=((1, 2), (2, 3)),
            )

    def test_json_round_trip(self, topo, tmp_path):
        path = tmp_path / "topo.json"
        topo.to_json(path)
        again = SkeletonTopology.from_json(path)
        assert again == topo

    def test_joint_swap_map_is_involution(self, topo):
        swap = topo.joint_swap_map()
        assert np.array_equal(swap[swap], np.arange(topo.joint_count))
        # pelvis and the midline stay put
        for joint in (0, 7, 8, 9, 10):
            assert swap[joint] == joint


class TestDecompose:
    def test_single_bone_chain(self):
        t = SkeletonTopology(joint_count=2, parents=(-1, 0), bone_names=("only",))
        lengths, dirs = decompose_pose(Pose([[0, 0, 0], [0, 0, 2]]), t)
        assert lengths.values[0] == pytest.approx(2.0)
        assert np.allclose(dirs.vectors[0], [0, 0, 1])

    def test_degenerate_bone(self):
        t = SkeletonTopology(joint_count=2, parents=(-1, 0), bone_names=("only",))
        with pytest.raises(DegenerateBone) as err:
            decompose_pose(Pose([[1, 1, 1], [1, 1, 1]]), t)
        assert err.value.bone == 1

    def test_round_trip_random_pose(self, topo):
        rng = np.random.default_rng(7)
        frames = random_pose_frames(rng, topo, n=1)
        lengths, dirs = decompose_pose(Pose(frames[0]), topo)
        rebuilt = reconstruct_pose(lengths, dirs, frames[0, 0], topo)
        assert np.abs(rebuilt.joints - frames[0]).max() < 1e-9

    def test_rigid_invariance_of_lengths(self, topo):
        rng = np.random.default_rng(8)
        frames = random_pose_frames(rng, topo, n=4)
        # random rotation via QR
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        moved = frames @ q.T + rng.uniform(-2, 2, size=3)
        l0, _ = decompose_frames(frames, topo)
        l1, _ = decompose_frames(moved, topo)
        assert np.abs(l0 - l1).max() < 1e-9


class TestReconstruct:
    def test_single_bone(self):
        t = SkeletonTopology(joint_count=2, parents=(-1, 0), bone_names=("only",))
        pose = reconstruct_pose(
            BoneLengths([1.0]), BoneDirections([[1.0, 0.0, 0.0]]), np.zeros(3), t
        )
        assert np.allclose(pose.joints[1], [1, 0, 0])

    def test_doubling_chain_lengths_doubles_positions(self, chain3):
        dirs = BoneDirections([[0, 0, 1.0], [0, 0, 1.0]])
        base = reconstruct_pose(BoneLengths([1.0, 2.0]), dirs, np.zeros(3), chain3)
        doubled = reconstruct_pose(BoneLengths([2.0, 4.0]), dirs, np.zeros(3), chain3)
        assert np.allclose(doubled.joints, 2.0 * base.joints)

    def test_rejects_non_unit_directions(self, chain3):
        bad = np.array([[0, 0, 1.0], [0, 0, 1.0]])
        with pytest.raises(SchemaError):
            BoneDirections(bad * 1.1)
        # reconstruct_pose re-checks at its looser tolerance too
        dirs = BoneDirections(bad)
        dirs.vectors = bad * (1 + 1e-4)
        with pytest.raises(SchemaError):
            reconstruct_pose(BoneLengths([1.0, 1.0]), dirs, np.zeros(3), chain3)

    def test_decompose_of_reconstruct_returns_inputs(self, topo):
        rng = np.random.default_rng(9)
        lengths = rng.uniform(0.1, 0.5, size=topo.bone_count)
        dirs = rng.standard_normal((topo.bone_count, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pose = reconstruct_pose(
            BoneLengths(lengths), BoneDirections(dirs), np.array([0.3, -0.2, 4.0]), topo
        )
        l2, d2 = decompose_pose(pose, topo)
        assert np.abs(l2.values - lengths).max() < 1e-9
        assert np.abs(d2.vectors - dirs).max() < 1e-9


class TestReplaceLengths:
    def test_identity_replacement(self, topo):
        rng = np.random.default_rng(10)
        frames = random_pose_frames(rng, topo)
        pose = Pose(frames[0])
        same = replace_lengths(pose, decompose_pose(pose, topo)[0], topo)
        assert np.abs(same.joints - pose.joints).max() < 1e-9

    def test_chain_rescale(self):
        t = SkeletonTopology(joint_count=2, parents=(-1, 0), bone_names=("only",))
        out = replace_lengths(Pose([[0, 0, 0], [0, 0, 1.0]]), BoneLengths([2.0]), t)
        assert np.allclose(out.joints[1], [0, 0, 2.0])

    def test_directions_preserved_lengths_set(self, topo):
        rng = np.random.default_rng(11)
        frames = random_pose_frames(rng, topo)
        pose = Pose(frames[0])
        new_lengths = BoneLengths(rng.uniform(0.1, 0.7, size=topo.bone_count))
        out = replace_lengths(pose, new_lengths, topo)
        l_out, d_out = decompose_pose(out, topo)
        _, d_in = decompose_pose(pose, topo)
        assert np.abs(l_out.values - new_lengths.values).max() < 1e-9
        assert np.abs(d_out.vectors - d_in.vectors).max() < 1e-9
        assert np.allclose(out.joints[0], pose.joints[0])

    def test_idempotent(self, topo):
        rng = np.random.default_rng(12)
        frames = random_pose_frames(rng, topo)
        new_lengths = BoneLengths(rng.uniform(0.1, 0.7, size=topo.bone_count))
        once = replace_lengths(Pose(frames[0]), new_lengths, topo)
        twice = replace_lengths(once, new_lengths, topo)
        assert np.abs(once.joints - twice.joints).max() < 1e-9

    def test_per_frame_lengths(self, topo):
        rng = np.random.default_rng(13)
        frames = random_pose_frames(rng, topo, n=5)
        per_frame = rng.uniform(0.1, 0.7, size=(5, topo.bone_count))
        out = replace_lengths_frames(frames, per_frame, topo)
        lengths, _ = decompose_frames(out, topo)
        assert np.abs(lengths - per_frame).max() < 1e-9


class TestBatchKinematics:
    def test_batch_round_trip(self, topo):
        rng = np.random.default_rng(14)
        frames = random_pose_frames(rng, topo, n=64)
        lengths, dirs = decompose_frames(frames, topo)
        rebuilt = reconstruct_frames(lengths, dirs, frames[:, 0, :], topo)
        assert np.abs(rebuilt - frames).max() < 1e-9

    def test_degenerate_reports_frame(self, topo):
        rng = np.random.default_rng(15)
        frames = random_pose_frames(rng, topo, n=3)
        frames[2, 5] = frames[2, topo.parents[5]]
        with pytest.raises(DegenerateBone) as err:
            decompose_frames(frames, topo)
        assert err.value.frame == 2
        assert err.value.bone == 5
