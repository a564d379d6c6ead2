"""Portable binary container and the length-bank CSV format.

A bundle file is a single line of canonical JSON (the manifest) followed
by the raw array payload:

    {"arrays":[{"dtype":"f32","name":...,"shape":[...]}, ...],
     "metadata":{...}, "schema":1}\\n
    <concatenated row-major little-endian float32 arrays, manifest order>

The manifest JSON is serialized with sorted keys and compact separators,
which makes writes byte-reproducible. All payloads are float32; core math
upstream stays in float64 and is cast on write.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError

BUNDLE_SCHEMA = 1


def canonical_json(obj) -> str:
    """Deterministic JSON used for manifests and config fingerprints."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _check_metadata(meta: dict) -> None:
    try:
        canonical_json(meta)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bundle metadata is not JSON-serializable: {exc}") from exc


def write_bundle(
    path: str | Path,
    arrays: dict[str, np.ndarray] | list[tuple[str, np.ndarray]],
    metadata: dict | None = None,
) -> None:
    """Write named arrays plus metadata to a bundle file.

    Array order in the file follows the given order (dict insertion order
    is preserved). Names must be unique.
    """
    if isinstance(arrays, dict):
        items = list(arrays.items())
    else:
        items = list(arrays)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise SchemaError("bundle array names must be unique")
    metadata = dict(metadata or {})
    _check_metadata(metadata)

    manifest_arrays = []
    payloads = []
    for name, arr in items:
        arr = np.asarray(arr)
        if not np.isfinite(arr).all():
            raise SchemaError(f"array {name!r} contains non-finite values")
        f32 = np.ascontiguousarray(arr, dtype="<f4")
        manifest_arrays.append(
            {"name": str(name), "dtype": "f32", "shape": list(arr.shape)}
        )
        payloads.append(f32.tobytes())

    manifest = {
        "schema": BUNDLE_SCHEMA,
        "arrays": manifest_arrays,
        "metadata": metadata,
    }
    with open(path, "wb") as fh:
        fh.write(canonical_json(manifest).encode("utf-8"))
        fh.write(b"\n")
        for chunk in payloads:
            fh.write(chunk)


def read_bundle(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a bundle file. Returns (name -> float32 array, metadata)."""
    blob = Path(path).read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise SchemaError(f"{path}: missing manifest line")
    try:
        manifest = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: bad manifest: {exc}") from exc
    if manifest.get("schema") != BUNDLE_SCHEMA:
        raise SchemaError(f"{path}: unsupported schema {manifest.get('schema')!r}")

    payload = blob[newline + 1 :]
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in manifest.get("arrays", []):
        try:
            name = entry["name"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: bad array entry: {exc}") from exc
        if dtype != "f32":
            raise SchemaError(f"{path}: unsupported dtype {dtype!r}")
        if name in arrays:
            raise SchemaError(f"{path}: duplicate array name {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise SchemaError(f"{path}: payload shorter than manifest claims")
        arrays[name] = np.frombuffer(
            payload, dtype="<f4", count=count, offset=offset
        ).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise SchemaError(f"{path}: payload longer than manifest claims")
    return arrays, manifest.get("metadata", {})


def _format_f32(value: float) -> str:
    # 9 significant digits round-trip any float32 exactly.
    return format(float(np.float32(value)), ".9g")


def write_length_csv(path: str | Path, bone_names, samples: np.ndarray) -> None:
    """Write bank samples (S, J-1) as CSV with the bone names as header."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 2 or samples.shape[1] != len(tuple(bone_names)):
        raise SchemaError("samples must be (S, len(bone_names))")
    lines = [",".join(bone_names)]
    for row in samples:
        lines.append(",".join(_format_f32(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_length_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a bank CSV. Returns (bone names, float32 samples (S, J-1))."""
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise SchemaError(f"{path}: empty length CSV")
    names = [c.strip() for c in rows[0].split(",")]
    data = []
    for lineno, line in enumerate(rows[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(names):
            raise SchemaError(f"{path}:{lineno}: expected {len(names)} columns")
        try:
            data.append([np.float32(c) for c in cells])
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    if not data:
        raise SchemaError(f"{path}: no samples")
    return names, np.asarray(data, dtype=np.float32)
