"""Command-line interface.

Subcommands: ingest, synth, preprocess, train, evaluate, smooth, report,
gradcheck. Every command that produces a run directory writes a manifest
(command line, config, seed, package and numpy versions, timestamp) so runs
are reproducible from their outputs alone. Dataset root may also come from
the MODEMIL_DATA environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import MODES, __version__
from .bags import build_bags, load_features, load_sessions, preprocess_session, save_features, save_sessions
from .experiments import attention_report, dev_label_sequences, smooth_test_predictions
from .hmm import estimate_transitions, load_transitions, save_transitions, viterbi
from .metrics import classification_metrics, roc_curve
from .model import TransportModeClassifier
from .nn import load_arrays, save_arrays
from .shl import ingest, ingest_report
from .splits import loso_folds, split_bags
from .synth import SynthConfig, synth_generate
from .train import TrainConfig, predict_dataset, run_pretraining, run_training

__all__ = ["main"]


def _write_manifest(out_dir: Path, command: str, argv: list[str], config: dict | None, seed: int | None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "seed": seed,
        "versions": {"modemil": __version__, "numpy": np.__version__, "python": sys.version.split()[0]},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _load_train_config(path: str | None) -> TrainConfig:
    if path is None:
        return TrainConfig()
    return TrainConfig.from_json(Path(path).read_text())


def _cmd_ingest(args, argv) -> int:
    root = args.root or os.environ.get("MODEMIL_DATA")
    if not root:
        print("error: pass --root or set MODEMIL_DATA", file=sys.stderr)
        return 2
    sessions = ingest(root)
    report = ingest_report(sessions)
    save_sessions(args.out, sessions)
    _write_manifest(Path(args.out).parent, "ingest", argv, None, None)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_synth(args, argv) -> int:
    config = SynthConfig.from_json(Path(args.config).read_text()) if args.config else SynthConfig()
    sessions = synth_generate(config, np.random.default_rng(args.seed))
    save_sessions(args.out, sessions)
    _write_manifest(Path(args.out).parent, "synth", argv, json.loads(config.to_json()), args.seed)
    print(f"wrote {len(sessions)} sessions to {args.out}")
    return 0


def _cmd_preprocess(args, argv) -> int:
    sessions = load_sessions(args.sessions)
    features = [preprocess_session(s) for s in sessions]
    save_features(args.out, features)
    _write_manifest(Path(args.out).parent, "preprocess", argv, None, None)
    total = sum(f.n_minutes for f in features)
    print(f"cached features for {len(features)} sessions, {total} minutes")
    return 0


def _cmd_train(args, argv) -> int:
    features = load_features(args.features)
    config = _load_train_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    out_dir = Path(args.out)
    folds = loso_folds(features, seed=config.seed)
    users = [f.test_user for f in folds]
    test_user = args.test_user or users[0]
    if test_user not in users:
        print(f"error: unknown test user {test_user!r}; have {users}", file=sys.stderr)
        return 2
    fold = folds[users.index(test_user)]

    if config.pretrain != "none":
        model, histories = run_pretraining(config, features, fold)
        history = histories["fused"]
    else:
        dataset = build_bags(features, placement=args.placement)
        train_idx, val_idx, _ = split_bags(dataset, fold)
        model, history = run_training(config, dataset, train_idx, val_idx)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_arrays(
        out_dir / "checkpoint.npz",
        dict(model.named_tensors()),
        meta={
            "kind": "model",
            "arch": model.arch,
            "seed": model.seed,
            "test_user": test_user,
            "placement": args.placement,
            "config": json.loads(config.to_json()),
        },
    )
    (out_dir / "history.json").write_text(
        json.dumps(
            {
                "train_loss": history.train_loss,
                "val_loss": history.val_loss,
                "val_accuracy": history.val_accuracy,
                "best_epoch": history.best_epoch,
            },
            indent=2,
        )
    )
    _write_manifest(out_dir, "train", argv, json.loads(config.to_json()), config.seed)
    best = history.val_loss[history.best_epoch] if history.epochs else float("nan")
    print(f"trained {model.arch} for {history.epochs} epochs; best val loss {best:.4f}")
    return 0


def _load_model(path) -> tuple[TransportModeClassifier, dict]:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "model":
        raise ValueError(f"{path}: not a model checkpoint")
    model = TransportModeClassifier(arch=meta["arch"], seed=meta["seed"])
    model.load_state_dict(arrays)
    return model, meta


def _metric_block(name: str, metrics) -> str:
    lines = [f"[{name}]"]
    for key, value in metrics.summary().items():
        lines.append(f"  {key:<16} {value:.4f}")
    return "\n".join(lines)


def _cmd_evaluate(args, argv) -> int:
    features = load_features(args.features)
    model, meta = _load_model(args.model)
    config = TrainConfig(**meta["config"])
    folds = loso_folds(features, seed=config.seed)
    users = [f.test_user for f in folds]
    fold = folds[users.index(meta["test_user"])]
    dataset = build_bags(features, placement=meta.get("placement"))
    _, _, test_idx = split_bags(dataset, fold)
    probs, labels = predict_dataset(model, dataset, test_idx)
    raw = probs.argmax(axis=1)
    pre = classification_metrics(labels, raw)
    blocks = [_metric_block("no-hmm", pre)]
    payload = {"no_hmm": pre.summary()}

    out_dir = Path(args.out) if args.out else Path(args.model).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    transitions = estimate_transitions(dev_label_sequences(features, meta["test_user"]))
    save_transitions(out_dir / "transitions.txt", transitions)
    if args.hmm:
        smoothed = smooth_test_predictions(dataset, test_idx, probs, transitions)
        post = classification_metrics(labels, smoothed)
        blocks.append(_metric_block("hmm", post))
        payload["hmm"] = post.summary()

    sessions = np.array([dataset.refs[i].session for i in test_idx], dtype=np.int64)
    targets = np.array([dataset.refs[i].target for i in test_idx], dtype=np.int64)
    streams = np.array([dataset.refs[i].stream for i in test_idx], dtype=np.int64)
    save_arrays(
        out_dir / "predictions.npz",
        {"probs": probs, "labels": labels, "session": sessions, "target": targets, "stream": streams},
        meta={"kind": "predictions", "test_user": meta["test_user"]},
    )
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=2))
    _write_manifest(out_dir, "evaluate", argv, meta["config"], config.seed)
    print("\n".join(blocks))
    return 0


def _cmd_smooth(args, argv) -> int:
    arrays, meta = load_arrays(args.predictions)
    if meta.get("kind") != "predictions":
        raise ValueError(f"{args.predictions}: not a predictions file")
    transitions, _ = load_transitions(args.transitions)
    probs = arrays["probs"]
    smoothed = np.empty(len(probs), dtype=np.int64)
    keys = list(zip(arrays["session"], arrays["stream"]))
    for key in sorted(set(keys)):
        positions = [i for i, k in enumerate(keys) if k == key]
        positions.sort(key=lambda i: arrays["target"][i])
        smoothed[positions] = viterbi(probs[positions], transitions)
    save_arrays(Path(args.out), {**arrays, "smoothed": smoothed}, meta=meta)
    if "labels" in arrays:
        metrics = classification_metrics(arrays["labels"], smoothed)
        print(_metric_block("hmm", metrics))
    return 0


def _cmd_report(args, argv) -> int:
    run_dir = Path(args.run)
    out_dir = Path(args.out) if args.out else run_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    arrays, meta = load_arrays(run_dir / "predictions.npz")
    probs, labels = arrays["probs"], arrays["labels"]
    metrics = classification_metrics(labels, probs.argmax(axis=1))

    header = " ".join(MODES)
    np.savetxt(out_dir / "confusion.txt", metrics.confusion, fmt="%d", header=header)
    for c, mode in enumerate(MODES):
        positive = labels == c
        if positive.any() and not positive.all():
            fpr, tpr, thr = roc_curve(positive, probs[:, c])
            points = np.column_stack([fpr, tpr, thr])
            np.savetxt(out_dir / f"roc_{mode}.txt", points, header="fpr tpr threshold")
    lines = [_metric_block("no-hmm", metrics)]

    if args.features and args.model:
        features = load_features(args.features)
        model, model_meta = _load_model(args.model)
        if model.uses_attention:
            dataset = build_bags(features, placement=model_meta.get("placement"))
            folds = loso_folds(features, seed=model_meta["config"]["seed"])
            fold = folds[[f.test_user for f in folds].index(model_meta["test_user"])]
            _, _, test_idx = split_bags(dataset, fold)
            tables = attention_report(model, dataset, test_idx)
            lines.append(_format_attention(tables))
            (out_dir / "attention.json").write_text(
                json.dumps({k: v.tolist() if isinstance(v, np.ndarray) else v for k, v in tables.items()}, indent=2)
            )
    (out_dir / "summary.txt").write_text("\n\n".join(lines) + "\n")
    print(f"report written to {out_dir}")
    return 0


def _format_attention(tables: dict) -> str:
    lines = ["[attention]", f"  {'mode':<8} {'weight_std':>10} {'loc':>8} {'acc':>8}"]
    for c, mode in enumerate(tables["modes"]):
        std = tables["weight_std"][c]
        loc_w, acc_w = tables["modality"][c]
        lines.append(f"  {mode:<8} {std:>10.4f} {loc_w:>8.4f} {acc_w:>8.4f}")
    return "\n".join(lines)


def _cmd_gradcheck(args, argv) -> int:
    from .verification import full_model_check, layer_checks

    worst_layer = layer_checks(verbose=True)
    worst_model = full_model_check(verbose=True)
    ok = worst_layer < 1e-6 and worst_model < 1e-4
    print(f"layers max rel err {worst_layer:.3e} (limit 1e-6); model {worst_model:.3e} (limit 1e-4)")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog="modemil", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an SHL-preview directory into a session archive")
    p.add_argument("--root", help="dataset root (or MODEMIL_DATA)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate synthetic sessions")
    p.add_argument("--config", help="SynthConfig JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("preprocess", help="cache spectrograms and location windows")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one model on one leave-one-user-out fold")
    p.add_argument("--features", required=True)
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-user")
    p.add_argument("--placement", help="restrict training bags to one placement")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on its held-out user")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    hmm_group = p.add_mutually_exclusive_group()
    hmm_group.add_argument("--hmm", dest="hmm", action="store_true", default=True)
    hmm_group.add_argument("--no-hmm", dest="hmm", action="store_false")

    p = sub.add_parser("smooth", help="Viterbi-smooth a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--transitions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="emit tables and plot-data files for a run")
    p.add_argument("--run", required=True)
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--out")

    sub.add_parser("gradcheck", help="finite-difference checks of every layer and the full model")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "ingest": _cmd_ingest,
        "synth": _cmd_synth,
        "preprocess": _cmd_preprocess,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "smooth": _cmd_smooth,
        "report": _cmd_report,
        "gradcheck": _cmd_gradcheck,
    }
    try:
        return handlers[args.command](args, argv)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
