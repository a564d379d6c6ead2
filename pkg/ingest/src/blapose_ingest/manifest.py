"""Ingestion manifests.

A manifest names the source kind, the input files (paths or globs), the
output directory, and the joint/bone index mapping that adapts whatever
column order the source uses to the target topology. All third-party
layout knowledge lives here; the consumer package never parses foreign
files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from glob import glob
from pathlib import Path

from .errors import IndexMapError, SchemaError

KINDS = ("h36m-poses", "detector-keypoints", "mesh-joints", "length-csv")


@dataclass
class InputEntry:
    path: Path
    name: str
    subject: str = ""
    action: str = ""
    camera: str = ""


@dataclass
class IngestManifest:
    kind: str
    inputs: list[InputEntry]
    output_dir: Path
    topology: Path
    index_map: list[int] = field(default_factory=list)
    bone_map: dict = field(default_factory=dict)
    fps: float = 50.0
    units_scale: float = 1.0
    has_confidence: bool = False

    @classmethod
    def load(cls, path: str | Path) -> "IngestManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read manifest: {exc}", path) from exc
        kind = raw.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"unknown kind {kind!r} (expected one of {KINDS})", path)
        if "output_dir" not in raw or "inputs" not in raw:
            raise SchemaError("manifest needs 'inputs' and 'output_dir'", path)
        if "topology" not in raw:
            raise SchemaError("manifest needs 'topology' (path to topology JSON)", path)

        base = path.parent
        inputs: list[InputEntry] = []
        for entry in raw["inputs"]:
            if isinstance(entry, str):
                spec, meta = entry, {}
            elif isinstance(entry, dict) and "path" in entry:
                spec, meta = entry["path"], entry
            else:
                raise SchemaError(f"bad input entry {entry!r}", path)
            matches = sorted(glob(str(base / spec))) or sorted(glob(spec))
            if not matches:
                raise SchemaError(f"input matches nothing: {spec}", path)
            for m in matches:
                p = Path(m)
                inputs.append(
                    InputEntry(
                        path=p,
                        name=str(meta.get("name", p.stem)),
                        subject=str(meta.get("subject", "")),
                        action=str(meta.get("action", "")),
                        camera=str(meta.get("camera", "")),
                    )
                )
        if not inputs:
            raise SchemaError("manifest resolves to zero input files", path)
        names = [e.name for e in inputs]
        if len(set(names)) != len(names):
            raise SchemaError("input names are not unique", path)

        topology = Path(raw["topology"])
        if not topology.is_absolute():
            topology = base / topology
        output_dir = Path(raw["output_dir"])
        if not output_dir.is_absolute():
            output_dir = base / output_dir

        return cls(
            kind=kind,
            inputs=inputs,
            output_dir=output_dir,
            topology=topology,
            index_map=[int(i) for i in raw.get("index_map", [])],
            bone_map=dict(raw.get("bone_map", {})),
            fps=float(raw.get("fps", 50.0)),
            units_scale=float(raw.get("units_scale", 1.0)),
            has_confidence=bool(raw.get("has_confidence", False)),
        )

    def resolved_index_map(self, joint_count: int, source_columns: int) -> list[int]:
        """Validate the joint mapping is total and in range."""
        if len(self.index_map) != joint_count:
            raise IndexMapError(
                f"index_map must list one source joint per output joint "
                f"({joint_count} needed, {len(self.index_map)} given)"
            )
        for out_joint, src in enumerate(self.index_map):
            if src < 0:
                raise IndexMapError(f"output joint {out_joint} is unmapped")
            if src >= source_columns:
                raise IndexMapError(
                    f"output joint {out_joint} maps to source {src}, "
                    f"but the input only has {source_columns} joints"
                )
        return self.index_map
