"""Round trips across the package boundary (the A11 surface)."""

import json

import numpy as np
import pytest

from blapose_ingest.convert import convert
from blapose_ingest.manifest import IngestManifest

from conftest import FIXTURES, IDENTITY_MAP, REVERSED_MAP


class TestBundleRoundTrip:
    def test_consumer_reexport_is_byte_identical(self, manifest_factory, tmp_path):
        """Convert, load with the consumer package, re-export: same bytes."""
        m = manifest_factory(
            "h36m-poses",
            [{"path": str(FIXTURES / "poses_2frame.csv"), "name": "clip_a",
              "subject": "S1", "action": "Walk", "camera": "cam0"}],
            index_map=REVERSED_MAP,
        )
        convert(IngestManifest.load(m))
        produced = tmp_path / "out" / "poses.bundle"

        from blapose.bundle import read_bundle, write_bundle

        arrays, metadata = read_bundle(produced)
        reexport = tmp_path / "reexport.bundle"
        write_bundle(reexport, arrays, metadata)
        assert produced.read_bytes() == reexport.read_bytes()

    def test_keypoint_bundle_round_trip(self, manifest_factory, tmp_path):
        m = manifest_factory(
            "detector-keypoints",
            [{"path": str(FIXTURES / "keypoints_3frame.csv"), "name": "det_a"}],
            index_map=REVERSED_MAP, has_confidence=True, out_name="kp",
        )
        convert(IngestManifest.load(m))
        produced = tmp_path / "kp" / "keypoints.bundle"

        from blapose.bundle import read_bundle, write_bundle

        arrays, metadata = read_bundle(produced)
        reexport = tmp_path / "kp_reexport.bundle"
        write_bundle(reexport, arrays, metadata)
        assert produced.read_bytes() == reexport.read_bytes()

    def test_coordinates_lossless_f32(self, manifest_factory, tmp_path):
        """f32 in, f32 out, bit for bit."""
        m = manifest_factory(
            "h36m-poses", [{"path": str(FIXTURES / "poses_2frame.csv"), "name": "c"}],
            index_map=REVERSED_MAP, out_name="lossless",
        )
        convert(IngestManifest.load(m))
        from blapose.bundle import read_bundle

        arrays, _ = read_bundle(tmp_path / "lossless" / "poses.bundle")
        src_rows = (FIXTURES / "poses_2frame.csv").read_text().strip().splitlines()
        source = np.array(
            [[np.float32(v) for v in row.split(",")] for row in src_rows], dtype=np.float32
        ).reshape(2, 17, 3)[:, ::-1, :]
        assert np.array_equal(arrays["c.poses3d"], source)


class TestBankStats:
    def test_stats_agree_with_consumer(self, manifest_factory, tmp_path):
        """Bank statistics recomputed by the consumer match the log (1e-6)."""
        m = manifest_factory(
            "mesh-joints",
            [{"path": str(FIXTURES / "mesh_a.csv"), "name": "a"},
             {"path": str(FIXTURES / "mesh_b.csv"), "name": "b"}],
            index_map=IDENTITY_MAP, out_name="bank",
        )
        log = convert(IngestManifest.load(m))

        from blapose.augment import LengthBank

        bank = LengthBank.from_csv(tmp_path / "bank" / "bank.csv")
        assert np.abs(bank.mean - np.asarray(log["mean"])).max() < 1e-6
        assert np.abs(bank.std - np.asarray(log["std"])).max() < 1e-6

    def test_bank_csv_reexport_byte_identical(self, manifest_factory, tmp_path):
        m = manifest_factory(
            "mesh-joints",
            [{"path": str(FIXTURES / "mesh_a.csv"), "name": "a"},
             {"path": str(FIXTURES / "mesh_b.csv"), "name": "b"}],
            index_map=IDENTITY_MAP, out_name="bank2",
        )
        convert(IngestManifest.load(m))
        produced = tmp_path / "bank2" / "bank.csv"

        from blapose.augment import LengthBank

        bank = LengthBank.from_csv(produced)
        reexport = tmp_path / "bank_reexport.csv"
        bank.to_csv(reexport)
        assert produced.read_bytes() == reexport.read_bytes()

    def test_bank_usable_for_mean_alignment(self, manifest_factory, tmp_path):
        m = manifest_factory(
            "mesh-joints",
            [{"path": str(FIXTURES / "mesh_b.csv"), "name": "b"}],
            index_map=IDENTITY_MAP, out_name="bank3",
        )
        convert(IngestManifest.load(m))

        from blapose.augment import LengthBank, align_bank_mean
        from blapose.skeleton import BoneLengths

        bank = LengthBank.from_csv(tmp_path / "bank3" / "bank.csv")
        target = BoneLengths(bank.mean * 1.1)
        aligned = align_bank_mean(bank, target)
        assert np.abs(aligned.mean - target.values).max() < 1e-9
