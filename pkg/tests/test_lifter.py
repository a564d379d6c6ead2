import numpy as np
import pytest

from blapose.errors import NonFiniteLoss
from blapose.lifter import (
    FinetuneConfig,
    ToyLifter,
    finetune_loss_and_grads,
    finetune_toy_lifter,
    fit_toy_lifter,
    lift,
    window_inputs,
)

from conftest import random_pose_frames


class TestWindowing:
    def test_shape_and_edge_clamp(self):
        x = np.arange(8.0).reshape(4, 2)
        out = window_inputs(x, window=1)
        assert out.shape == (4, 6)
        # first frame repeats itself as its left neighbor
        assert np.array_equal(out[0], np.concatenate([x[0], x[0], x[1]]))
        assert np.array_equal(out[-1], np.concatenate([x[2], x[3], x[3]]))

    def test_zero_window_is_identity(self):
        x = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(window_inputs(x, 0), x)


class TestFit:
    def test_recovers_linear_map(self, topo):
        """If poses really are affine in the keypoints, lstsq nails them."""
        rng = np.random.default_rng(0)
        j = topo.joint_count
        true_w = rng.standard_normal((3 * j, 3 * 2 * j)) * 0.1
        true_b = rng.standard_normal(3 * j) * 0.1
        xs = [rng.standard_normal((20, 2 * j)) for _ in range(3)]
        dataset = []
        for x in xs:
            xw = window_inputs(x, 1)
            poses = (xw @ true_w.T + true_b).reshape(20, j, 3)
            dataset.append((x, poses))
        lifter = fit_toy_lifter(dataset, window=1)
        for x, poses in dataset:
            got = lift(lifter, x)
            want = poses - poses[:, :1, :]
            assert np.abs(got - want).max() < 1e-8

    def test_prediction_is_root_relative(self, topo):
        rng = np.random.default_rng(1)
        dataset = [(rng.standard_normal((12, 34)), random_pose_frames(rng, topo, n=12))]
        lifter = fit_toy_lifter(dataset, window=1)
        out = lift(lifter, dataset[0][0])
        assert np.abs(out[:, 0, :]).max() == 0.0


class TestFinetuneGradients:
    def test_matches_finite_differences(self, chain3):
        rng = np.random.default_rng(2)
        n, j = 5, chain3.joint_count
        x = rng.standard_normal((n, 2 * j))
        truth = random_pose_frames(rng, chain3, n=n)
        lengths = rng.uniform(0.2, 0.6, size=chain3.bone_count)
        lifter = ToyLifter(
            weight=rng.standard_normal((3 * j, 3 * 2 * j)) * 0.3,
            bias=rng.standard_normal(3 * j) * 0.3,
            window=1,
        )
        loss, g_w, g_b = finetune_loss_and_grads(lifter, x, truth, lengths, chain3)
        step = 1e-6
        for arr, grad in ((lifter.weight, g_w), (lifter.bias, g_b)):
            flat, g_flat = arr.reshape(-1), grad.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                up, *_ = finetune_loss_and_grads(lifter, x, truth, lengths, chain3)
                flat[k] = orig - step
                down, *_ = finetune_loss_and_grads(lifter, x, truth, lengths, chain3)
                flat[k] = orig
                fd = (up - down) / (2 * step)
                assert abs(g_flat[k] - fd) / max(1.0, abs(fd)) < 1e-4

    def test_degenerate_prediction_raises(self, chain3):
        x = np.zeros((3, 6))
        truth = random_pose_frames(np.random.default_rng(3), chain3, n=3)
        lifter = ToyLifter(weight=np.zeros((9, 18)), bias=np.zeros(9), window=1)
        with pytest.raises(NonFiniteLoss):
            finetune_loss_and_grads(lifter, x, truth, np.array([0.3, 0.3]), chain3)


class TestFinetuneLoop:
    def _setup(self, topo, rng, n_seq=3, frames=30):
        dataset = []
        for _ in range(n_seq):
            truth = random_pose_frames(rng, topo, n=frames)
            x = rng.standard_normal((frames, 2 * topo.joint_count))
            lengths = rng.uniform(0.2, 0.5, size=topo.bone_count)
            dataset.append((x, truth, lengths))
        fit_set = [(x, t) for x, t, _ in dataset]
        lifter = fit_toy_lifter(fit_set, window=1)
        return lifter, dataset

    def test_zero_lr_keeps_lifter(self, topo):
        rng = np.random.default_rng(4)
        lifter, dataset = self._setup(topo, rng)
        tuned, log = finetune_toy_lifter(lifter, dataset, topo, FinetuneConfig(lr=0.0, epochs=2))
        assert np.array_equal(tuned.weight, lifter.weight)
        assert np.array_equal(tuned.bias, lifter.bias)
        assert len(log) == 2

    def test_loss_decreases_on_training_data(self, topo):
        rng = np.random.default_rng(5)
        lifter, dataset = self._setup(topo, rng)
        tuned, log = finetune_toy_lifter(
            lifter, dataset, topo, FinetuneConfig(lr=1e-3, epochs=8)
        )
        assert log[-1]["loss"] < log[0]["loss"]

    def test_reproducible(self, topo):
        rng = np.random.default_rng(6)
        lifter, dataset = self._setup(topo, rng)
        cfg = FinetuneConfig(lr=1e-3, epochs=2)
        t1, log1 = finetune_toy_lifter(lifter, dataset, topo, cfg)
        t2, log2 = finetune_toy_lifter(lifter, dataset, topo, cfg)
        assert np.array_equal(t1.weight, t2.weight)
        assert log1 == log2
