"""Experiment harness: placement studies, HMM-smoothed evaluation, repeats,
and the attention interpretability tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import MODES, N_MODES, PLACEMENTS
from .bags import BagDataset, SessionFeatures, UNLABELED, build_bags, mixed_streams
from .hmm import estimate_transitions, viterbi
from .metrics import ClassificationMetrics, classification_metrics, roc_curve
from .model import TransportModeClassifier
from .splits import SplitSpec, loso_folds, split_bags
from .train import TrainConfig, TrainHistory, predict_dataset, run_pretraining, run_training

__all__ = [
    "EXPERIMENT_KINDS",
    "FoldResult",
    "EvalReport",
    "dev_label_sequences",
    "smooth_test_predictions",
    "evaluate_split",
    "run_experiment",
    "attention_report",
]

EXPERIMENT_KINDS = ("per-placement", "all-placements", "mixed-one", "mixed-multiple")


def dev_label_sequences(features: list[SessionFeatures], test_user: str) -> list[np.ndarray]:
    """Per-session label sequences of the development users (train + validation)."""
    sequences = []
    for feat in features:
        if feat.user == test_user:
            continue
        labels = feat.labels[feat.labels != UNLABELED]
        if len(labels):
            sequences.append(labels)
    return sequences


def smooth_test_predictions(
    dataset: BagDataset,
    indices: np.ndarray,
    probs: np.ndarray,
    transitions: np.ndarray,
) -> np.ndarray:
    """Viterbi-decode per recording stream; returns labels aligned with ``indices``.

    Streams are the (session, stream) groups of the test bags, ordered by
    target minute; sessions never share a decode, so smoothing one session
    cannot influence another.
    """
    smoothed = np.empty(len(indices), dtype=np.int64)
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for pos, i in enumerate(indices):
        ref = dataset.refs[i]
        groups.setdefault((ref.session, ref.stream), []).append((ref.target, pos))
    for members in groups.values():
        members.sort()
        positions = [pos for _, pos in members]
        path = viterbi(probs[positions], transitions)
        smoothed[positions] = path
    return smoothed


@dataclass
class FoldResult:
    test_user: str
    run_index: int
    placement: str  # placement evaluated, or "mixed"
    pre: ClassificationMetrics
    post: ClassificationMetrics
    history: TrainHistory


@dataclass
class EvalReport:
    kind: str
    config: TrainConfig
    n_runs: int
    folds: list[FoldResult] = field(default_factory=list)
    attention: dict | None = None
    roc_points: dict[str, np.ndarray] | None = None  # per mode: (fpr, tpr, threshold) rows

    def aggregate(self) -> dict:
        """Mean and standard deviation over folds/runs/placements, pre and post HMM."""
        out = {}
        for stage in ("pre", "post"):
            metrics = [getattr(f, stage) for f in self.folds]
            for name in ("accuracy", "macro_f1", "macro_precision", "macro_recall"):
                values = np.array([getattr(m, name) for m in metrics])
                out[f"{stage}_{name}_mean"] = float(values.mean()) if len(values) else float("nan")
                out[f"{stage}_{name}_std"] = float(values.std()) if len(values) else float("nan")
        return out

    def per_placement(self, stage: str = "post") -> dict[str, float]:
        scores: dict[str, list[float]] = {}
        for fold in self.folds:
            scores.setdefault(fold.placement, []).append(getattr(fold, stage).accuracy)
        return {p: float(np.mean(v)) for p, v in scores.items()}


def evaluate_split(
    model: TransportModeClassifier,
    dataset: BagDataset,
    test_idx: np.ndarray,
    transitions: np.ndarray,
) -> tuple[ClassificationMetrics, ClassificationMetrics, np.ndarray, np.ndarray]:
    """Metrics before and after HMM smoothing on the test bags."""
    probs, labels = predict_dataset(model, dataset, test_idx)
    raw = probs.argmax(axis=1)
    smoothed = smooth_test_predictions(dataset, test_idx, probs, transitions)
    return classification_metrics(labels, raw), classification_metrics(labels, smoothed), probs, labels


def roc_tables(probs: np.ndarray, labels: np.ndarray) -> dict[str, np.ndarray]:
    """One-vs-rest ROC point table per mode present in the labels."""
    tables = {}
    for c, mode in enumerate(MODES):
        positive = labels == c
        if positive.any() and not positive.all():
            fpr, tpr, thresholds = roc_curve(positive, probs[:, c])
            tables[mode] = np.column_stack([fpr, tpr, thresholds])
    return tables


def _test_indices_by_placement(dataset: BagDataset, test_idx: np.ndarray) -> dict[str, np.ndarray]:
    by_placement: dict[str, list[int]] = {}
    for i in test_idx:
        ref = dataset.refs[i]
        names = set(dataset.placement_names(ref))
        key = names.pop() if len(names) == 1 else "mixed"
        by_placement.setdefault(key, []).append(i)
    return {k: np.array(v, dtype=np.int64) for k, v in by_placement.items()}


def _train_for_fold(
    config: TrainConfig,
    features: list[SessionFeatures],
    fold: SplitSpec,
    dataset: BagDataset,
) -> tuple[TransportModeClassifier, TrainHistory]:
    if config.pretrain != "none":
        model, histories = run_pretraining(config, features, fold)
        return model, histories["fused"]
    train_idx, val_idx, _ = split_bags(dataset, fold)
    return run_training(config, dataset, train_idx, val_idx)


def run_experiment(
    kind: str,
    features: list[SessionFeatures],
    config: TrainConfig,
    n_runs: int = 15,
    collect_attention: bool = False,
) -> EvalReport:
    """One of the placement studies, repeated ``n_runs`` times over LOSO folds.

    - per-placement: one model per placement, trained and tested on it
    - all-placements: one model on every placement's bags, tested per placement
    - mixed-one / mixed-multiple: one or four virtual placement-hopping
      streams for training, a freshly drawn virtual stream for testing

    Each run re-seeds model initialization and the train/validation split.
    Encoder pre-training draws one placement per bag, so it pairs with the
    all-placements structure only.
    """
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"kind must be one of {EXPERIMENT_KINDS}")
    if config.pretrain != "none" and kind != "all-placements":
        raise ValueError("encoder pre-training follows the all-placements protocol")
    report = EvalReport(kind=kind, config=config, n_runs=n_runs)

    def record(fold, run, placement, model, dataset, idx, transitions, history):
        pre, post, probs, labels = evaluate_split(model, dataset, idx, transitions)
        report.folds.append(FoldResult(fold.test_user, run, placement, pre, post, history))
        if report.roc_points is None:
            report.roc_points = roc_tables(probs, labels)

    for run in range(n_runs):
        run_seed = config.seed + 1009 * run
        folds = loso_folds(features, seed=run_seed)
        for fold in folds:
            transitions = estimate_transitions(dev_label_sequences(features, fold.test_user))
            run_config = _with_seed(config, run_seed)
            if kind == "per-placement":
                for placement in features[0].placements:
                    dataset = build_bags(features, placement=placement)
                    model, history = _train_for_fold(run_config, features, fold, dataset)
                    _, _, test_idx = split_bags(dataset, fold)
                    record(fold, run, placement, model, dataset, test_idx, transitions, history)
            elif kind == "all-placements":
                dataset = build_bags(features, placement=None)
                model, history = _train_for_fold(run_config, features, fold, dataset)
                _, _, test_idx = split_bags(dataset, fold)
                for placement, idx in sorted(_test_indices_by_placement(dataset, test_idx).items()):
                    record(fold, run, placement, model, dataset, idx, transitions, history)
            else:
                n_streams = 1 if kind == "mixed-one" else 4
                mix_rng = np.random.default_rng(run_seed + 17)
                dataset = mixed_streams(features, n_streams=n_streams, rng=mix_rng)
                train_idx, val_idx, _ = split_bags(dataset, fold)
                model, history = run_training(run_config, dataset, train_idx, val_idx)
                test_set = mixed_streams(features, n_streams=1, rng=np.random.default_rng(run_seed + 31))
                _, _, test_idx = split_bags(test_set, fold)
                record(fold, run, "mixed", model, test_set, test_idx, transitions, history)
                if collect_attention and run == 0:
                    report.attention = attention_report(model, test_set, test_idx)
    return report


def _with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    fields = config.__dict__.copy()
    fields["seed"] = seed
    return TrainConfig(**fields)


def attention_report(
    model: TransportModeClassifier,
    dataset: BagDataset,
    indices: np.ndarray,
    batch_size: int = 128,
) -> dict:
    """Attention interpretability tables.

    Returns per-class rows (one per mode, in mode order):

    - ``weight_std``: mean within-bag standard deviation of the acceleration
      instance weights
    - ``modality``: mean (location, acceleration) attention mass
    - ``placement``: mean share of the within-bag acceleration attention per
      placement (meaningful on mixed streams, where bags mix placements)
    """
    if not model.uses_attention:
        raise ValueError("attention tables need an attention-pooling architecture")
    n_acc = model.n_accel_instances
    std_acc: dict[int, list[float]] = {c: [] for c in range(N_MODES)}
    modality: dict[int, list[tuple[float, float]]] = {c: [] for c in range(N_MODES)}
    placement_share: dict[int, list[dict[str, float]]] = {c: [] for c in range(N_MODES)}
    indices = np.asarray(indices, dtype=np.int64)
    for lo in range(0, len(indices), batch_size):
        chunk = indices[lo : lo + batch_size]
        batch = dataset.batch(chunk)
        acc = batch["acc"]
        result = model.predict(
            acc=acc if model.uses_accel else None,
            loc_seq=batch["loc_seq"] if model.uses_loc else None,
            loc_scalars=batch["loc_scalars"] if model.uses_loc else None,
        )
        for b, i in enumerate(chunk):
            ref = dataset.refs[i]
            label = ref.label
            weights = result.attention[b]
            acc_w = weights[:n_acc]
            std_acc[label].append(float(acc_w.std()))
            if model.uses_loc:
                modality[label].append((float(weights[n_acc:].sum()), float(acc_w.sum())))
            share = acc_w / acc_w.sum() if acc_w.sum() > 0 else np.full(n_acc, 1.0 / n_acc)
            names = dataset.placement_names(ref)
            row: dict[str, float] = {}
            for name, w in zip(names, share):
                row[name] = row.get(name, 0.0) + float(w)
            placement_share[label].append(row)
    placements = sorted({p for feat in dataset.features for p in feat.placements}) or list(PLACEMENTS)
    table_std = np.array([np.mean(std_acc[c]) if std_acc[c] else np.nan for c in range(N_MODES)])
    table_modality = np.array(
        [np.mean(modality[c], axis=0) if modality[c] else (np.nan, np.nan) for c in range(N_MODES)]
    )
    table_placement = np.full((N_MODES, len(placements)), np.nan)
    for c in range(N_MODES):
        if placement_share[c]:
            for j, p in enumerate(placements):
                table_placement[c, j] = float(np.mean([row.get(p, 0.0) for row in placement_share[c]]))
    return {
        "modes": list(MODES),
        "weight_std": table_std,
        "modality": table_modality,  # columns: (location, acceleration)
        "placements": placements,
        "placement": table_placement,
    }
