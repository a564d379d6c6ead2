"""Writers for the blapose on-disk formats.

Implemented here from the documented byte layout (not imported from the
consumer package) so the cross-component round-trip tests genuinely pin
both implementations to the same bytes:

* bundle file: one line of canonical JSON (sorted keys, compact
  separators) with {"arrays": [{"dtype": "f32", "name", "shape"}],
  "metadata": {...}, "schema": 1}, then the concatenated row-major
  little-endian float32 payloads in manifest order;
* length CSV: header of bone names, one sample per row, values printed
  with 9 significant digits (exact float32 round trip).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError

BUNDLE_SCHEMA = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_bundle(path, arrays, metadata=None) -> None:
    items = list(arrays.items()) if isinstance(arrays, dict) else list(arrays)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise SchemaError("bundle array names must be unique", path)
    manifest_arrays = []
    payloads = []
    for name, arr in items:
        arr = np.asarray(arr)
        if not np.isfinite(arr).all():
            raise SchemaError(f"array {name!r} contains non-finite values", path)
        manifest_arrays.append({"name": str(name), "dtype": "f32", "shape": list(arr.shape)})
        payloads.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    manifest = {
        "schema": BUNDLE_SCHEMA,
        "arrays": manifest_arrays,
        "metadata": dict(metadata or {}),
    }
    with open(path, "wb") as fh:
        fh.write(canonical_json(manifest).encode("utf-8"))
        fh.write(b"\n")
        for chunk in payloads:
            fh.write(chunk)


def read_bundle(path):
    blob = Path(path).read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise SchemaError("missing manifest line", path)
    manifest = json.loads(blob[:newline].decode("utf-8"))
    if manifest.get("schema") != BUNDLE_SCHEMA:
        raise SchemaError(f"unsupported schema {manifest.get('schema')!r}", path)
    payload = blob[newline + 1 :]
    arrays = {}
    offset = 0
    for entry in manifest["arrays"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arrays[entry["name"]] = np.frombuffer(
            payload, dtype="<f4", count=count, offset=offset
        ).reshape(shape)
        offset += count * 4
    if offset != len(payload):
        raise SchemaError("payload length does not match manifest", path)
    return arrays, manifest.get("metadata", {})


def _fmt_f32(value) -> str:
    return format(float(np.float32(value)), ".9g")


def write_length_csv(path, bone_names, samples: np.ndarray) -> None:
    samples = np.asarray(samples, dtype=np.float32)
    lines = [",".join(bone_names)]
    for row in samples:
        lines.append(",".join(_fmt_f32(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_topology(path):
    """Joint tree from the documented topology JSON schema."""
    try:
        raw = json.loads(Path(path).read_text())
        joint_count = int(raw["joint_count"])
        parents = [int(p) for p in raw["parents"]]
        bone_names = [str(n) for n in raw["bone_names"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad topology file: {exc}", path) from exc
    if len(parents) != joint_count or parents[0] != -1:
        raise SchemaError("inconsistent topology", path)
    if len(bone_names) != joint_count - 1:
        raise SchemaError("bone_names must have joint_count-1 entries", path)
    return joint_count, parents, bone_names
