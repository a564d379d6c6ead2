import numpy as np
import pytest

from blapose.bundle import (
    read_bundle,
    read_length_csv,
    write_bundle,
    write_length_csv,
)
from blapose.errors import SchemaError


class TestBundle:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arrays = {
            "a": rng.standard_normal((3, 4)).astype(np.float32),
            "b": rng.standard_normal((2, 2, 2)).astype(np.float32),
            "scalarish": rng.standard_normal(5).astype(np.float32),
        }
        meta = {"kind": "test", "n": 3, "tag": ["x", "y"]}
        path = tmp_path / "t.bundle"
        write_bundle(path, arrays, meta)
        loaded, got_meta = read_bundle(path)
        assert got_meta == meta
        for name, arr in arrays.items():
            assert loaded[name].dtype == np.float32
            assert np.array_equal(loaded[name], arr)

    def test_write_read_write_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        arrays = {"x": rng.standard_normal((7, 3)), "y": rng.standard_normal(11)}
        p1, p2 = tmp_path / "a.bundle", tmp_path / "b.bundle"
        write_bundle(p1, arrays, {"m": 1})
        loaded, meta = read_bundle(p1)
        write_bundle(p2, loaded, meta)
        assert p1.read_bytes() == p2.read_bytes()

    def test_duplicate_names_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            write_bundle(tmp_path / "d.bundle", [("a", np.zeros(2)), ("a", np.ones(2))])

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.bundle"
        write_bundle(path, {"a": np.zeros((4, 4))})
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(SchemaError):
            read_bundle(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "t.bundle"
        write_bundle(path, {"a": np.zeros(3)})
        path.write_bytes(path.read_bytes() + b"XX")
        with pytest.raises(SchemaError):
            read_bundle(path)

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(SchemaError):
            write_bundle(tmp_path / "n.bundle", {"a": np.array([1.0, np.nan])})


class TestLengthCsv:
    def test_round_trip_exact_f32(self, tmp_path):
        rng = np.random.default_rng(2)
        samples = rng.uniform(0.05, 0.6, size=(20, 16)).astype(np.float32)
        names = [f"bone{i}" for i in range(16)]
        path = tmp_path / "bank.csv"
        write_length_csv(path, names, samples)
        got_names, got = read_length_csv(path)
        assert got_names == names
        assert np.array_equal(got, samples)

    def test_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n3.0\n")
        with pytest.raises(SchemaError):
            read_length_csv(path)

    def test_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("a,b\n")
        with pytest.raises(SchemaError):
            read_length_csv(path)
