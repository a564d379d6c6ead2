import json
from pathlib import Path

import pytest

import blapose

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def topology_path() -> Path:
    return blapose.asset_path(blapose.DEFAULT_TOPOLOGY)


@pytest.fixture()
def manifest_factory(tmp_path, topology_path):
    """Write a manifest JSON next to the inputs and return its path."""

    def make(kind, inputs, out_name="out", **extra):
        payload = {
            "kind": kind,
            "inputs": inputs,
            "output_dir": str(tmp_path / out_name),
            "topology": str(topology_path),
        }
        payload.update(extra)
        path = tmp_path / f"manifest_{kind}_{out_name}.json"
        path.write_text(json.dumps(payload, indent=2))
        return path

    return make


REVERSED_MAP = list(reversed(range(17)))
IDENTITY_MAP = list(range(17))
