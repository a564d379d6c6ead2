import numpy as np
import pytest

from blapose.augment import flip_keypoints
from blapose.camera import (
    CameraIntrinsics,
    KeypointSequence,
    denormalize_keypoints,
    normalize_keypoints,
    project_point,
    project_points,
    project_sequence,
)
from blapose.errors import BehindCamera, SchemaError
from blapose.skeleton import PoseSequence


def brown_conrady_reference(p, cam):
    """Straight-line scalar evaluation of the distortion formulas."""
    x = p[0] / p[2]
    y = p[1] / p[2]
    r2 = x * x + y * y
    rho = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2 + cam.k3 * r2 * r2 * r2
    xd = rho * x + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x)
    yd = rho * y + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y
    return np.array([cam.fx * xd + cam.cx, cam.fy * yd + cam.cy])


class TestProjectPoint:
    def test_optical_axis_hits_principal_point(self):
        cam = CameraIntrinsics(1000, 1000, 500, 400, k1=0.3, k2=-0.1, k3=0.05, p1=0.01, p2=0.02)
        assert np.array_equal(project_point([0, 0, 2.0], cam), [500.0, 400.0])

    def test_no_distortion_affine(self, plain_camera):
        assert np.allclose(project_point([1.0, 0, 2.0], plain_camera), [1000.0, 400.0])
        # zero coefficients make the projection affine in (x/z, y/z)
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 1, size=(50, 3))
        pts[:, 2] = rng.uniform(1.0, 5.0, size=50)
        pix = project_points(pts, plain_camera)
        want_u = 1000.0 * pts[:, 0] / pts[:, 2] + 500.0
        want_v = 1000.0 * pts[:, 1] / pts[:, 2] + 400.0
        assert np.abs(pix[:, 0] - want_u).max() < 1e-9
        assert np.abs(pix[:, 1] - want_v).max() < 1e-9

    def test_radial_only_matches_reference(self):
        cam = CameraIntrinsics(1000, 1000, 500, 400, k1=0.1)
        got = project_point([1.0, 0, 2.0], cam)
        want = brown_conrady_reference([1.0, 0, 2.0], cam)
        assert np.abs(got - want).max() < 1e-9

    def test_full_distortion_matches_reference(self, camera):
        rng = np.random.default_rng(3)
        for _ in range(200):
            p = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.5, 6.0)])
            got = project_point(p, camera)
            want = brown_conrady_reference(p, camera)
            assert np.abs(got - want).max() < 1e-9

    def test_behind_camera(self, plain_camera):
        with pytest.raises(BehindCamera):
            project_point([0, 0, 0.0], plain_camera)
        with pytest.raises(BehindCamera):
            project_point([0, 0, -1.0], plain_camera)

    def test_scale_invariance_along_rays(self, camera):
        rng = np.random.default_rng(4)
        p = np.array([0.4, -0.3, 3.0])
        for lam in rng.uniform(0.2, 5.0, size=20):
            assert np.abs(project_point(p, camera) - project_point(lam * p, camera)).max() < 1e-9

    def test_rejects_bad_intrinsics(self):
        with pytest.raises(SchemaError):
            CameraIntrinsics(fx=-1, fy=1, cx=0, cy=0)


class TestProjectSequence:
    def test_elementwise_equivalence(self, camera):
        frames = np.array([[[0.1, 0.2, 3.0], [-0.4, 0.1, 4.0]]])
        seq = project_sequence(PoseSequence(frames), camera)
        for joint in range(2):
            assert np.allclose(seq.frames[0, joint], project_point(frames[0, joint], camera))
        assert np.all(seq.confidence == 1.0)

    def test_perspective_shrinks_pixel_distance(self, plain_camera):
        # a two-point rig receding along the optical axis
        rig = np.array([[[-0.3, 0.0, 2.0], [0.3, 0.2, 2.0]]])
        d_prev = None
        for extra in (0.0, 0.5, 1.0, 2.0, 4.0):
            pix = project_points(rig + [0, 0, extra], plain_camera)
            dist = np.linalg.norm(pix[0, 0] - pix[0, 1])
            if d_prev is not None:
                assert dist < d_prev
            d_prev = dist

    def test_reports_offending_frame_and_joint(self, plain_camera):
        frames = np.ones((3, 2, 3))
        frames[1, 1, 2] = -0.5
        with pytest.raises(BehindCamera) as err:
            project_sequence(PoseSequence(frames), plain_camera)
        assert err.value.frame == 1 and err.value.joint == 1

    def test_flip_commutes_with_mirrored_pose(self, topo):
        """Projecting a 3D-mirrored pose equals flipping the projection
        when the tangential terms vanish."""
        cam = CameraIntrinsics(1100, 1100, 510, 500, k1=-0.2, k2=0.2, k3=-0.001)
        rng = np.random.default_rng(5)
        from conftest import random_pose_frames

        frames = random_pose_frames(rng, topo, n=4)
        frames[..., 2] += 5.0
        mirrored = frames.copy()
        mirrored[..., 0] *= -1.0
        mirrored = mirrored[:, topo.joint_swap_map(), :]
        kps = project_sequence(PoseSequence(frames), cam)
        kps_mirrored = project_sequence(PoseSequence(mirrored), cam)
        flipped = flip_keypoints(kps, cam, topo)
        assert np.abs(kps_mirrored.frames - flipped.frames).max() < 1e-9


class TestNormalize:
    def test_principal_point_maps_to_origin(self, plain_camera):
        kps = KeypointSequence(np.array([[[500.0, 400.0]]]))
        out = normalize_keypoints(kps, plain_camera)
        assert np.allclose(out.frames[0, 0], [0.0, 0.0])

    def test_half_width_maps_to_one(self, plain_camera):
        kps = KeypointSequence(np.array([[[500.0 + 500.0, 400.0]]]))
        out = normalize_keypoints(kps, plain_camera)
        assert out.frames[0, 0, 0] == pytest.approx(1.0)

    def test_round_trip(self, camera):
        rng = np.random.default_rng(6)
        frames = rng.uniform(0, 1000, size=(4, 17, 2))
        kps = KeypointSequence(frames)
        back = denormalize_keypoints(normalize_keypoints(kps, camera), camera)
        assert np.abs(back.frames - frames).max() < 1e-9
