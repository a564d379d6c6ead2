"""The converters, one per source kind.

Input layouts (all plain CSV, no header unless stated):

* h36m-poses: one row per frame, 3 columns per source joint
  (j0x, j0y, j0z, j1x, ...), meters unless units_scale says otherwise.
* detector-keypoints: one row per frame, 2 columns per source joint in
  pixels; with has_confidence, one confidence column per source joint is
  appended after the coordinates.
* mesh-joints: one file per body sample, one row per source joint
  (x, y, z).
* length-csv: headered CSV of per-bone lengths; bone_map gives the
  source column name for each target bone name.

Rows containing non-finite values are dropped and counted in the
conversion log. Coordinates are parsed straight to float32, so values a
float32 writer produced round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bundleio import (
    canonical_json,
    load_topology,
    write_bundle,
    write_length_csv,
)
from .errors import IndexMapError, SchemaError
from .manifest import IngestManifest


def _read_csv_f32(path: Path, expected_cols: int | None = None) -> np.ndarray:
    rows = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read: {exc}", path) from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if expected_cols is not None and len(cells) != expected_cols:
            raise SchemaError(
                f"line {lineno}: expected {expected_cols} columns, got {len(cells)}", path
            )
        try:
            rows.append(np.asarray(cells, dtype=np.float32))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}", path) from exc
    if not rows:
        raise SchemaError("no data rows", path)
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise SchemaError(f"ragged rows (widths {sorted(widths)})", path)
    return np.stack(rows)


def _drop_nonfinite(table: np.ndarray) -> tuple[np.ndarray, int]:
    keep = np.isfinite(table).all(axis=1)
    return table[keep], int((~keep).sum())


def _bone_lengths(joints: np.ndarray, parents: list[int]) -> np.ndarray:
    """(S, J, 3) joints to (S, J-1) lengths along the parent tree."""
    child = joints[:, 1:, :]
    parent = joints[:, parents[1:], :]
    return np.linalg.norm(child - parent, axis=2)


def _check_outputs_free(paths: list[Path], force: bool) -> None:
    if force:
        return
    existing = [str(p) for p in paths if p.exists()]
    if existing:
        raise SchemaError(
            "refusing to overwrite existing outputs (use --force): " + ", ".join(existing)
        )


def convert(manifest: IngestManifest, force: bool = False) -> dict:
    """Run the conversion for one manifest; returns the log payload."""
    joint_count, parents, bone_names = load_topology(manifest.topology)
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    _check_outputs_free([manifest.output_dir / "convert_log.json"], force)
    if manifest.kind == "h36m-poses":
        log = _convert_pose_like(manifest, joint_count, coords=3, force=force)
    elif manifest.kind == "detector-keypoints":
        log = _convert_pose_like(manifest, joint_count, coords=2, force=force)
    elif manifest.kind == "mesh-joints":
        log = build_length_bank(manifest, joint_count, parents, bone_names, force=force)
    elif manifest.kind == "length-csv":
        log = _convert_length_csv(manifest, bone_names, force=force)
    else:  # unreachable, manifest.load validates
        raise SchemaError(f"unknown kind {manifest.kind}")
    log_path = manifest.output_dir / "convert_log.json"
    log_path.write_text(canonical_json(log) + "\n")
    log["log"] = str(log_path)
    return log


def _convert_pose_like(
    manifest: IngestManifest, joint_count: int, coords: int, force: bool
) -> dict:
    out_name = "poses.bundle" if coords == 3 else "keypoints.bundle"
    out_path = manifest.output_dir / out_name
    _check_outputs_free([out_path], force)
    arrays = []
    seq_meta = []
    files_log = []
    for entry in manifest.inputs:
        table = _read_csv_f32(entry.path)
        cols = table.shape[1]
        conf_cols = 0
        if coords == 2 and manifest.has_confidence:
            if cols % (coords + 1) != 0:
                raise SchemaError(
                    f"width {cols} is not divisible by {coords + 1} (coords+confidence)",
                    entry.path,
                )
            source_joints = cols // (coords + 1)
            conf_cols = source_joints
        else:
            if cols % coords != 0:
                raise SchemaError(f"width {cols} is not divisible by {coords}", entry.path)
            source_joints = cols // coords
        index_map = manifest.resolved_index_map(joint_count, source_joints)
        table, dropped = _drop_nonfinite(table)
        if table.shape[0] == 0:
            raise SchemaError("every row was dropped as non-finite", entry.path)
        frames = table[:, : source_joints * coords].reshape(-1, source_joints, coords)
        frames = frames[:, index_map, :]
        if manifest.units_scale != 1.0:
            frames = (frames.astype(np.float64) * manifest.units_scale).astype(np.float32)
        suffix = "poses3d" if coords == 3 else "keypoints2d"
        arrays.append((f"{entry.name}.{suffix}", frames))
        if conf_cols:
            conf = table[:, source_joints * coords :][:, index_map]
            arrays.append((f"{entry.name}.confidence", conf))
        seq_meta.append(
            {
                "name": entry.name,
                "action": entry.action,
                "subject": entry.subject,
                "camera": entry.camera,
                "frames": int(frames.shape[0]),
                "fps": manifest.fps,
            }
        )
        files_log.append(
            {"input": str(entry.path), "frames": int(frames.shape[0]), "dropped": dropped}
        )
    kind = "pose-set" if coords == 3 else "keypoint-set"
    metadata = {"kind": kind, "sequences": seq_meta, "joint_count": joint_count}
    write_bundle(out_path, arrays, metadata)
    return {"kind": manifest.kind, "output": str(out_path), "files": files_log}


def build_length_bank(
    manifest: IngestManifest,
    joint_count: int,
    parents: list[int],
    bone_names: list[str],
    force: bool = False,
) -> dict:
    """Per-sample bone lengths from mesh-derived joint files, as bank CSV."""
    out_path = manifest.output_dir / "bank.csv"
    _check_outputs_free([out_path], force)
    samples = []
    files_log = []
    for entry in manifest.inputs:
        table = _read_csv_f32(entry.path, expected_cols=3)
        table, dropped = _drop_nonfinite(table)
        index_map = manifest.resolved_index_map(joint_count, table.shape[0])
        joints = table[index_map, :].astype(np.float64) * manifest.units_scale
        lengths = _bone_lengths(joints[None], parents)[0]
        if (lengths <= 0).any():
            raise SchemaError("degenerate bone in regressed joints", entry.path)
        samples.append(lengths.astype(np.float32))
        files_log.append({"input": str(entry.path), "samples": 1, "dropped": dropped})
    bank = np.stack(samples)
    write_length_csv(out_path, bone_names, bank)
    stats = bank.astype(np.float64)
    return {
        "kind": manifest.kind,
        "output": str(out_path),
        "files": files_log,
        "samples": int(bank.shape[0]),
        "mean": [float(v) for v in stats.mean(axis=0)],
        "std": [float(v) for v in stats.std(axis=0)],
    }


def _convert_length_csv(manifest: IngestManifest, bone_names: list[str], force: bool) -> dict:
    out_path = manifest.output_dir / "bank.csv"
    _check_outputs_free([out_path], force)
    all_rows = []
    files_log = []
    for entry in manifest.inputs:
        try:
            text = entry.path.read_text()
        except OSError as exc:
            raise SchemaError(f"cannot read: {exc}", entry.path) from exc
        lines = [l for l in text.splitlines() if l.strip()]
        if len(lines) < 2:
            raise SchemaError("need a header and at least one sample", entry.path)
        header = [c.strip() for c in lines[0].split(",")]
        col_of = {name: i for i, name in enumerate(header)}
        order = []
        for bone in bone_names:
            source = manifest.bone_map.get(bone, bone)
            if source not in col_of:
                raise IndexMapError(f"bone {bone!r} has no source column ({source!r} missing)")
            order.append(col_of[source])
        table = _read_csv_f32_from_lines(lines[1:], len(header), entry.path)
        table, dropped = _drop_nonfinite(table)
        scaled = table[:, order]
        if manifest.units_scale != 1.0:
            scaled = (scaled.astype(np.float64) * manifest.units_scale).astype(np.float32)
        all_rows.append(scaled)
        files_log.append(
            {"input": str(entry.path), "samples": int(scaled.shape[0]), "dropped": dropped}
        )
    bank = np.concatenate(all_rows, axis=0)
    if (bank <= 0).any():
        raise SchemaError("bank contains non-positive lengths")
    write_length_csv(out_path, bone_names, bank)
    stats = bank.astype(np.float64)
    return {
        "kind": manifest.kind,
        "output": str(out_path),
        "files": files_log,
        "samples": int(bank.shape[0]),
        "mean": [float(v) for v in stats.mean(axis=0)],
        "std": [float(v) for v in stats.std(axis=0)],
    }


def _read_csv_f32_from_lines(lines: list[str], expected_cols: int, path: Path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(lines, start=2):
        cells = line.split(",")
        if len(cells) != expected_cols:
            raise SchemaError(f"line {lineno}: expected {expected_cols} columns", path)
        try:
            rows.append(np.asarray(cells, dtype=np.float32))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}", path) from exc
    if not rows:
        raise SchemaError("no data rows", path)
    return np.stack(rows)
