import json

from blapose_ingest.cli import main

from conftest import FIXTURES, REVERSED_MAP


def write_manifest(tmp_path, topology_path, **extra):
    payload = {
        "kind": "h36m-poses",
        "inputs": [{"path": str(FIXTURES / "poses_2frame.csv"), "name": "clip"}],
        "output_dir": str(tmp_path / "out"),
        "topology": str(topology_path),
        "index_map": REVERSED_MAP,
    }
    payload.update(extra)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(payload))
    return path


class TestCli:
    def test_happy_path_json(self, tmp_path, topology_path, capsys):
        m = write_manifest(tmp_path, topology_path)
        assert main(["h36m-poses", "--manifest", str(m), "--json"]) == 0
        log = json.loads(capsys.readouterr().out)
        assert log["files"][0]["frames"] == 2
        assert (tmp_path / "out" / "poses.bundle").exists()
        assert (tmp_path / "out" / "convert_log.json").exists()

    def test_kind_mismatch_exits_1(self, tmp_path, topology_path):
        m = write_manifest(tmp_path, topology_path)
        assert main(["mesh-joints", "--manifest", str(m)]) == 1

    def test_unknown_kind_exits_1(self, tmp_path, topology_path):
        m = write_manifest(tmp_path, topology_path)
        assert main(["nonsense", "--manifest", str(m)]) == 1

    def test_empty_inputs_exit_1_no_outputs(self, tmp_path, topology_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        m = write_manifest(tmp_path, topology_path, inputs=[str(empty / "*.csv")])
        assert main(["h36m-poses", "--manifest", str(m)]) == 1
        assert not (tmp_path / "out").exists()

    def test_overwrite_guard_and_force(self, tmp_path, topology_path):
        m = write_manifest(tmp_path, topology_path)
        assert main(["h36m-poses", "--manifest", str(m)]) == 0
        assert main(["h36m-poses", "--manifest", str(m)]) == 1
        assert main(["h36m-poses", "--manifest", str(m), "--force"]) == 0

    def test_missing_manifest_flag_exits_1(self):
        assert main(["h36m-poses"]) == 1
