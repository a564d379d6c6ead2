"""Run configuration: one JSON file drives every CLI subcommand.

The file is validated against a schema, merged over defaults, and
fingerprinted (the fingerprint lands in evaluation reports so results
and configuration cannot drift apart silently).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

import blapose

from .augment import AugmentationConfig
from .bundle import canonical_json
from .corpus import DEFAULT_ACTIONS, CorpusConfig
from .errors import SchemaError
from .length_model import TrainConfig
from .lifter import FinetuneConfig

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_BOOL = {"type": "boolean"}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": _INT,
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "topology": _STR,
                "camera": _STR,
                "bank": _STR,
                "corpus_dir": _STR,
                "checkpoint": _STR,
                "lifter": _STR,
                "output_dir": _STR,
            },
        },
        "corpus": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train_sequences": _INT,
                "test_sequences": _INT,
                "frames": _INT,
                "fps": _NUM,
                "noise_sigma_px": _NUM,
                "actions": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [_STR, _NUM],
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "root_x_spread": _NUM,
                "root_y_spread": _NUM,
                "root_depth": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "initial_jitter": _NUM,
            },
        },
        "bank_gen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": _INT,
                "scale_sigma": _NUM,
            },
        },
        "augmentation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategy": {"enum": ["uniform", "normal", "synthetic"]},
                "uniform_range": _NUM,
                "shift_sigma": _NUM,
                "enforce_symmetry": _BOOL,
                "replicas": _INT,
                "batch_size": _INT,
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sequence_length": _INT,
                "batch_size": _INT,
                "lr": _NUM,
                "lr_decay": _NUM,
                "epochs": _INT,
                "beta1": _NUM,
                "beta2": _NUM,
                "eps": _NUM,
                "flip": _BOOL,
                "c": _INT,
                "c_prime": _INT,
                "bidirectional": _BOOL,
            },
        },
        "finetune": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lr": _NUM,
                "lr_decay": _NUM,
                "epochs": _INT,
                "window": _INT,
            },
        },
        "predict": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"online": _BOOL, "flip": _BOOL},
        },
        "bench": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"repetitions": _INT},
        },
    },
}


@dataclass
class RunConfig:
    seed: int = 0
    paths: dict = field(default_factory=dict)
    corpus: dict = field(default_factory=dict)
    bank_gen: dict = field(default_factory=dict)
    augmentation: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    finetune: dict = field(default_factory=dict)
    predict: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None, seed_override: int | None = None) -> "RunConfig":
        raw = {}
        if path is not None:
            try:
                raw = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise SchemaError(f"cannot read config {path}: {exc}") from exc
            try:
                jsonschema.validate(raw, CONFIG_SCHEMA)
            except jsonschema.ValidationError as exc:
                raise SchemaError(f"config {path}: {exc.message}") from exc
        cfg = cls(
            seed=int(raw.get("seed", 0)),
            paths=dict(raw.get("paths", {})),
            corpus=dict(raw.get("corpus", {})),
            bank_gen=dict(raw.get("bank_gen", {})),
            augmentation=dict(raw.get("augmentation", {})),
            train=dict(raw.get("train", {})),
            finetune=dict(raw.get("finetune", {})),
            predict=dict(raw.get("predict", {})),
            bench=dict(raw.get("bench", {})),
            raw=raw,
        )
        if seed_override is not None:
            cfg.seed = seed_override
        return cfg

    def fingerprint(self) -> str:
        """Hash of the semantic configuration (paths excluded, seed included)."""
        payload = {k: v for k, v in self.raw.items() if k != "paths"}
        payload["seed"] = self.seed
        return hashlib.sha256(canonical_json(payload).encode()).hexdigest()[:16]

    def path(self, name: str, default: Path | None = None, must_exist: bool = True) -> Path:
        """Resolve a configured path; defaults cover topology and camera."""
        value = self.paths.get(name)
        if value is None:
            if default is not None:
                return default
            raise SchemaError(f"config is missing paths.{name}")
        p = Path(value)
        if must_exist and not p.exists():
            raise SchemaError(f"paths.{name} does not exist: {p}")
        return p

    def topology_path(self) -> Path:
        return self.path("topology", default=blapose.asset_path(blapose.DEFAULT_TOPOLOGY))

    def camera_path(self) -> Path:
        return self.path("camera", default=blapose.asset_path(blapose.DEFAULT_CAMERA))

    def output_dir(self) -> Path:
        out = Path(self.paths.get("output_dir", "out"))
        out.mkdir(parents=True, exist_ok=True)
        return out

    def corpus_config(self) -> CorpusConfig:
        c = self.corpus
        actions = tuple((str(a), float(s)) for a, s in c.get("actions", DEFAULT_ACTIONS))
        return CorpusConfig(
            train_sequences=int(c.get("train_sequences", 200)),
            test_sequences=int(c.get("test_sequences", 40)),
            frames=int(c.get("frames", 600)),
            fps=float(c.get("fps", 50.0)),
            noise_sigma_px=float(c.get("noise_sigma_px", 0.0)),
            actions=actions,
            root_x_spread=float(c.get("root_x_spread", 0.35)),
            root_y_spread=float(c.get("root_y_spread", 0.15)),
            root_depth=tuple(c.get("root_depth", (4.45, 4.55))),
            initial_jitter=float(c.get("initial_jitter", 0.2)),
            seed=self.seed,
        )

    def augmentation_config(self) -> AugmentationConfig:
        a = self.augmentation
        return AugmentationConfig(
            strategy=a.get("strategy", "synthetic"),
            uniform_range=float(a.get("uniform_range", 0.3)),
            shift_sigma=float(a.get("shift_sigma", 0.5)),
            enforce_symmetry=bool(a.get("enforce_symmetry", True)),
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            sequence_length=int(t.get("sequence_length", 512)),
            batch_size=int(t.get("batch_size", 256)),
            lr=float(t.get("lr", 1e-4)),
            lr_decay=float(t.get("lr_decay", 0.95)),
            epochs=int(t.get("epochs", 20)),
            beta1=float(t.get("beta1", 0.9)),
            beta2=float(t.get("beta2", 0.999)),
            eps=float(t.get("eps", 1e-8)),
            seed=self.seed,
            flip=bool(t.get("flip", True)),
            c=int(t.get("c", 256)),
            c_prime=int(t.get("c_prime", 512)),
            bidirectional=bool(t.get("bidirectional", True)),
        )

    def finetune_config(self) -> FinetuneConfig:
        f = self.finetune
        return FinetuneConfig(
            lr=float(f.get("lr", 4e-5)),
            lr_decay=float(f.get("lr_decay", 0.95)),
            epochs=int(f.get("epochs", 5)),
        )
