"""Command-line surface for the whole pipeline.

Subcommands: gen-corpus, gen-lengths, train, predict-lengths, lift-toy,
adjust, eval, finetune, bench, report. Every subcommand takes --config
and --seed; --json prints a machine-readable summary on stdout.

Exit codes: 0 success, 1 validation error (bad usage, bad config, bad
input files), 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

import blapose

from .adjust import adjust_poses, evaluate
from .augment import (
    LengthBank,
    align_bank_mean,
    fabricate_bank,
    gen_lengths_normal_batch,
    gen_lengths_uniform_batch,
)
from .bench import bench_online
from .bundle import canonical_json, read_bundle, write_bundle
from .camera import CameraIntrinsics, KeypointSequence, normalize_keypoints
from .config import RunConfig
from .corpus import gen_synthetic_corpus, load_split
from .pipeline import build_training_pairs, evaluation_pairs
from .errors import BlaposeError, SchemaError
from .length_model import (
    OnlineState,
    flatten_keypoints,
    forward_online,
    load_checkpoint,
    predict_lengths,
    save_checkpoint,
    train,
)
from .lifter import ToyLifter, finetune_toy_lifter, fit_toy_lifter, lift
from .report import (
    bone_stats_svg,
    per_action_error_svg,
    training_curve_svg,
    write_report_files,
)
from .skeleton import BoneLengths, PoseSequence, SkeletonTopology


class CliParser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (2 is reserved for runtime)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_common(cfg: RunConfig):
    topo = SkeletonTopology.from_json(cfg.topology_path())
    cam = CameraIntrinsics.from_json(cfg.camera_path())
    return topo, cam


def _load_body_stats(topo: SkeletonTopology):
    stats = json.loads(blapose.asset_path(blapose.DEFAULT_BODY_STATS).read_text())
    mean = np.array([stats["mean"][n] for n in topo.bone_names])
    std = np.array([stats["std"][n] for n in topo.bone_names])
    return mean, std


def _bank_from_cfg(cfg: RunConfig, topo: SkeletonTopology) -> LengthBank:
    path = cfg.path("bank")
    bank = LengthBank.from_csv(path)
    if bank.samples.shape[1] != topo.bone_count:
        raise SchemaError(f"bank {path} width does not match topology")
    return bank


def cmd_gen_corpus(cfg: RunConfig, args) -> dict:
    topo, cam = _load_common(cfg)
    bank = _bank_from_cfg(cfg, topo)
    corpus_cfg = cfg.corpus_config()
    out_dir = cfg.output_dir()
    train_path, test_path = gen_synthetic_corpus(out_dir, corpus_cfg, topo, cam, bank)
    return {
        "train_bundle": str(train_path),
        "test_bundle": str(test_path),
        "train_sequences": corpus_cfg.train_sequences,
        "test_sequences": corpus_cfg.test_sequences,
        "frames": corpus_cfg.frames,
    }


def cmd_gen_lengths(cfg: RunConfig, args) -> dict:
    topo, _ = _load_common(cfg)
    rng = np.random.default_rng(cfg.seed)
    samples = args.samples or int(cfg.bank_gen.get("samples", 500))
    strategy = args.strategy or cfg.augmentation.get("strategy", "synthetic")
    mean, std = _load_body_stats(topo)
    if strategy == "synthetic":
        scale_sigma = float(cfg.bank_gen.get("scale_sigma", 0.08))
        bank = fabricate_bank(mean, std, topo, topo.bone_names, samples, rng, scale_sigma)
    else:
        base_bank = _bank_from_cfg(cfg, topo)
        aug = cfg.augmentation_config()
        rows = base_bank.samples[rng.integers(0, len(base_bank), size=samples)]
        out = np.empty_like(rows)
        for i, base in enumerate(rows):
            if strategy == "uniform":
                out[i] = gen_lengths_uniform_batch(base, base_bank.mean, aug, rng, topo)[0]
            else:
                out[i] = gen_lengths_normal_batch(base, base_bank.std, aug, rng, topo)[0]
        bank = LengthBank(samples=out, bone_names=topo.bone_names, source="dataset")
    if args.align_mean_to:
        target = LengthBank.from_csv(args.align_mean_to)
        bank = align_bank_mean(bank, BoneLengths(target.mean), mode=args.align_mode)
    out_path = Path(args.out) if args.out else cfg.output_dir() / "bank.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    bank.to_csv(out_path)
    return {
        "bank": str(out_path),
        "samples": len(bank),
        "strategy": strategy,
        "mean_first_bone_m": float(bank.mean[0]),
    }


def cmd_train(cfg: RunConfig, args) -> dict:
    topo, cam = _load_common(cfg)
    corpus_dir = cfg.path("corpus_dir")
    train_seqs = load_split(corpus_dir / "train.bundle")
    val_seqs = load_split(corpus_dir / "test.bundle")
    bank = None
    if cfg.augmentation.get("strategy", "synthetic") == "synthetic":
        bank = _bank_from_cfg(cfg, topo)
    _, std = _load_body_stats(topo)
    pairs = build_training_pairs(
        train_seqs, topo, cam, cfg.augmentation_config(),
        np.random.default_rng(cfg.seed + 2), bank=bank, normal_sigmas=std,
        replicas=int(cfg.augmentation.get("replicas", 1)),
        mean_batch_size=int(cfg.augmentation.get("batch_size", 256)),
    )
    val_pairs = evaluation_pairs(val_seqs, cam)
    tc = cfg.train_config()
    params, log = train(pairs, tc, topo, val_dataset=val_pairs)
    out_dir = cfg.output_dir()
    ckpt = out_dir / "model.ckpt"
    save_checkpoint(ckpt, params, seed=cfg.seed)
    log_path = out_dir / "train_log.json"
    log_path.write_text(canonical_json([e.to_dict() for e in log]) + "\n")
    return {
        "checkpoint": str(ckpt),
        "train_log": str(log_path),
        "epochs": tc.epochs,
        "final_train_loss": log[-1].train_loss,
        "final_val_loss": log[-1].val_loss,
    }


def _load_corpus_for_predict(cfg: RunConfig, args):
    if getattr(args, "data", None):
        return load_split(Path(args.data))
    corpus_dir = cfg.path("corpus_dir")
    return load_split(corpus_dir / "test.bundle")


def cmd_predict_lengths(cfg: RunConfig, args) -> dict:
    topo, cam = _load_common(cfg)
    params, header = load_checkpoint(cfg.path("checkpoint"))
    sequences = _load_corpus_for_predict(cfg, args)
    flip = bool(cfg.predict.get("flip", True))
    online = args.online or bool(cfg.predict.get("online", False))
    if online and params.bidirectional:
        raise SchemaError("online prediction needs a unidirectional checkpoint")
    arrays = []
    names = []
    for seq in sequences:
        kps = normalize_keypoints(KeypointSequence(seq.keypoints), cam)
        flat = flatten_keypoints(kps)
        if online:
            state = OnlineState(hidden=np.zeros(params.c_prime))
            for t in range(flat.shape[0]):
                state, pred = forward_online(state, flat[t], params)
        else:
            pred = predict_lengths(flat, params, topo, flip=flip)
        arrays.append((f"{seq.name}.lengths_pred", pred))
        names.append(seq.name)
    out_path = cfg.output_dir() / ("lengths_online.bundle" if online else "lengths.bundle")
    write_bundle(
        out_path,
        arrays,
        {
            "kind": "length-predictions",
            "sequences": names,
            "online": online,
            "flip": flip and not online,
            "model_header": header,
        },
    )
    return {"predictions": str(out_path), "sequences": len(names), "online": online}


def _write_pose_set(path, sequences_meta, frames_by_name):
    arrays = [(f"{name}.poses3d", frames_by_name[name]) for name, _ in sequences_meta]
    meta = {
        "kind": "pose-set",
        "sequences": [
            {"name": name, "action": action} for name, action in sequences_meta
        ],
    }
    write_bundle(path, arrays, meta)


def _read_pose_set(path):
    arrays, meta = read_bundle(path)
    if meta.get("kind") != "pose-set":
        raise SchemaError(f"{path} is not a pose-set bundle")
    out = []
    for entry in meta["sequences"]:
        out.append(
            (entry["name"], entry["action"], arrays[f"{entry['name']}.poses3d"].astype(np.float64))
        )
    return out


def cmd_lift_toy(cfg: RunConfig, args) -> dict:
    topo, cam = _load_common(cfg)
    corpus_dir = cfg.path("corpus_dir")
    window = int(cfg.finetune.get("window", 1))
    out_dir = cfg.output_dir()
    if args.mode == "train":
        train_seqs = load_split(corpus_dir / "train.bundle")
        dataset = []
        for seq in train_seqs:
            kps = normalize_keypoints(KeypointSequence(seq.keypoints), cam)
            dataset.append((flatten_keypoints(kps), seq.poses))
        lifter = fit_toy_lifter(dataset, window=window)
        path = out_dir / "lifter.bundle"
        write_bundle(
            path,
            {"weight": lifter.weight, "bias": lifter.bias},
            {"kind": "toy-lifter", "window": window, "joints": topo.joint_count},
        )
        return {"lifter": str(path), "window": window}
    # apply
    lifter = _load_lifter(cfg.path("lifter"))
    test_seqs = load_split(corpus_dir / "test.bundle")
    frames_by_name = {}
    seq_meta = []
    for seq in test_seqs:
        kps = normalize_keypoints(KeypointSequence(seq.keypoints), cam)
        frames_by_name[seq.name] = lift(lifter, flatten_keypoints(kps))
        seq_meta.append((seq.name, seq.action))
    path = out_dir / "lifted_poses.bundle"
    _write_pose_set(path, seq_meta, frames_by_name)
    return {"poses": str(path), "sequences": len(seq_meta)}


def _load_lifter(path) -> ToyLifter:
    arrays, meta = read_bundle(path)
    if meta.get("kind") != "toy-lifter":
        raise SchemaError(f"{path} is not a toy-lifter bundle")
    return ToyLifter(
        weight=arrays["weight"].astype(np.float64),
        bias=arrays["bias"].astype(np.float64),
        window=int(meta["window"]),
    )


def cmd_adjust(cfg: RunConfig, args) -> dict:
    topo, _ = _load_common(cfg)
    poses = _read_pose_set(Path(args.poses))
    arrays, meta = read_bundle(Path(args.lengths))
    if meta.get("kind") != "length-predictions":
        raise SchemaError(f"{args.lengths} is not a length-predictions bundle")
    frames_by_name = {}
    seq_meta = []
    for name, action, frames in poses:
        key = f"{name}.lengths_pred"
        if key not in arrays:
            raise SchemaError(f"no predicted lengths for sequence {name}")
        lengths = arrays[key].astype(np.float64)
        adjusted = adjust_poses(PoseSequence(frames), lengths, topo)
        frames_by_name[name] = adjusted.frames
        seq_meta.append((name, action))
    out_path = Path(args.out) if args.out else cfg.output_dir() / "adjusted_poses.bundle"
    _write_pose_set(out_path, seq_meta, frames_by_name)
    return {"adjusted": str(out_path), "sequences": len(seq_meta)}


def cmd_eval(cfg: RunConfig, args) -> dict:
    topo, _ = _load_common(cfg)
    pred = _read_pose_set(Path(args.pred))
    if args.truth:
        truth_seqs = load_split(Path(args.truth))
    else:
        truth_seqs = load_split(cfg.path("corpus_dir") / "test.bundle")
    truth_by_name = {s.name: s for s in truth_seqs}
    preds, truths, actions = [], [], []
    from .errors import LabelMismatch

    for name, action, frames in pred:
        if name not in truth_by_name:
            raise LabelMismatch(f"no groundtruth for sequence {name}")
        t = truth_by_name[name]
        if t.action != action:
            raise LabelMismatch(f"action mismatch for {name}: {action} vs {t.action}")
        preds.append(PoseSequence(frames))
        truths.append(PoseSequence(t.poses))
        actions.append(action)
    report = evaluate(preds, truths, actions, topo, fingerprint=cfg.fingerprint())
    stem = args.stem or "report"
    files = write_report_files(report, cfg.output_dir(), stem=stem)
    return {
        "report_files": [str(p) for p in files],
        "mpjpe_mm": report.overall.mpjpe_mm,
        "p_mpjpe_mm": report.overall.p_mpjpe_mm,
        "bone_len_err_mm": report.overall.bone_len_err_mm,
        "frames": report.overall.frames,
    }


def cmd_finetune(cfg: RunConfig, args) -> dict:
    topo, cam = _load_common(cfg)
    corpus_dir = cfg.path("corpus_dir")
    lifter = _load_lifter(cfg.path("lifter"))
    params, _ = load_checkpoint(cfg.path("checkpoint"))
    flip = bool(cfg.predict.get("flip", True))
    train_seqs = load_split(corpus_dir / "train.bundle")
    dataset = []
    for seq in train_seqs:
        kps = normalize_keypoints(KeypointSequence(seq.keypoints), cam)
        flat = flatten_keypoints(kps)
        lengths = predict_lengths(flat, params, topo, flip=flip)
        dataset.append((flat, seq.poses, lengths))
    tuned, log = finetune_toy_lifter(lifter, dataset, topo, cfg.finetune_config())
    out_dir = cfg.output_dir()
    path = out_dir / "lifter_finetuned.bundle"
    write_bundle(
        path,
        {"weight": tuned.weight, "bias": tuned.bias},
        {"kind": "toy-lifter", "window": tuned.window, "joints": topo.joint_count},
    )
    log_path = out_dir / "finetune_log.json"
    log_path.write_text(canonical_json(log) + "\n")
    return {
        "lifter": str(path),
        "log": str(log_path),
        "first_loss": log[0]["loss"],
        "final_loss": log[-1]["loss"],
    }


def cmd_bench(cfg: RunConfig, args) -> dict:
    topo, _ = _load_common(cfg)
    params, _ = load_checkpoint(cfg.path("checkpoint"))
    reps = args.reps if args.reps is not None else int(cfg.bench.get("repetitions", 10_000))
    report = bench_online(params, topo, repetitions=reps, seed=cfg.seed)
    out_path = cfg.output_dir() / "bench.json"
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    report["report"] = str(out_path)
    return report


def cmd_report(cfg: RunConfig, args) -> dict:
    out_dir = cfg.output_dir()
    emitted = []
    if args.eval_json:
        payload = json.loads(Path(args.eval_json).read_text())
        from .adjust import ActionRow, EvaluationReport

        rows = [ActionRow(**r) for r in payload["actions"]]
        overall = ActionRow(**payload["overall"])
        report = EvaluationReport(rows=rows, overall=overall, fingerprint=payload.get("fingerprint", ""))
        files = write_report_files(report, out_dir, stem="report")
        emitted += [str(p) for p in files]
        svg = out_dir / "per_action_mpjpe.svg"
        per_action_error_svg(report, svg)
        emitted.append(str(svg))
    if args.train_log:
        log = json.loads(Path(args.train_log).read_text())
        svg = out_dir / "training_curve.svg"
        training_curve_svg(log, svg)
        emitted.append(str(svg))
    if args.bank:
        bank = LengthBank.from_csv(Path(args.bank))
        svg = out_dir / "bone_stats.svg"
        bone_stats_svg(bank.bone_names, bank.mean, bank.std, svg)
        emitted.append(str(svg))
    if not emitted:
        raise SchemaError("report needs at least one of --eval-json, --train-log, --bank")
    return {"emitted": emitted}


def build_parser() -> CliParser:
    parser = CliParser(prog="blapose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--json", action="store_true", help="print a JSON summary on stdout")
        p.set_defaults(fn=fn)
        return p

    add("gen-corpus", cmd_gen_corpus)

    p = add("gen-lengths", cmd_gen_lengths)
    p.add_argument("--strategy", choices=["uniform", "normal", "synthetic"], default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--align-mean-to", type=str, default=None,
                   help="bank CSV whose per-bone means become the target")
    p.add_argument("--align-mode", choices=["additive", "multiplicative"],
                   default="additive")

    add("train", cmd_train)

    p = add("predict-lengths", cmd_predict_lengths)
    p.add_argument("--online", action="store_true")
    p.add_argument("--data", type=str, default=None, help="corpus bundle to predict on")

    p = add("lift-toy", cmd_lift_toy)
    p.add_argument("--mode", choices=["train", "apply"], required=True)

    p = add("adjust", cmd_adjust)
    p.add_argument("--poses", type=str, required=True)
    p.add_argument("--lengths", type=str, required=True)
    p.add_argument("--out", type=str, default=None)

    p = add("eval", cmd_eval)
    p.add_argument("--pred", type=str, required=True)
    p.add_argument("--truth", type=str, default=None)
    p.add_argument("--stem", type=str, default=None)

    add("finetune", cmd_finetune)

    p = add("bench", cmd_bench)
    p.add_argument("--reps", type=int, default=None)

    p = add("report", cmd_report)
    p.add_argument("--eval-json", type=str, default=None)
    p.add_argument("--train-log", type=str, default=None)
    p.add_argument("--bank", type=str, default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig.load(args.config, seed_override=args.seed)
        summary = args.fn(cfg, args)
        if args.json:
            print(json.dumps(summary, sort_keys=True))
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlaposeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
