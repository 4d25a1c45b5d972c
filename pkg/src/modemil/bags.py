"""Sessions, per-minute features, and bag construction.

A session holds placement-tagged 10 Hz acceleration streams, one location
stream, and one mode label per minute. Preprocessing turns it into cached
per-minute features: a spectrogram per (placement, minute) and a location
window per target minute. A bag targets one minute and packs the three most
recent one-minute spectrograms of one placement together with the 12-minute
location window ending at the target; sliding the target by one minute gives
the next bag. Targets need 12 minutes of history, so a session of M labeled
minutes yields at most M - 11 bags per placement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accel import WINDOW_SAMPLES, BandTable, band_table, magnitude_jerk, mask_augment, spectrogram
from .geo import WINDOW_MINUTES, LocStream, fill_gaps, loc_features
from .nn.checkpoint import load_arrays, save_arrays

__all__ = [
    "Session",
    "SessionFeatures",
    "BagRef",
    "BagDataset",
    "preprocess_session",
    "build_bags",
    "build_windows",
    "mixed_streams",
    "save_sessions",
    "load_sessions",
    "save_features",
    "load_features",
    "UNLABELED",
]

UNLABELED = -1
N_ACCEL_INSTANCES = 3


@dataclass
class Session:
    """One contiguous recording of one user."""

    user: str
    session_id: str
    accel: dict[str, np.ndarray]  # placement -> (n_samples, 3) at 10 Hz
    labels: np.ndarray  # (n_minutes,) mode index, UNLABELED where unknown
    location: LocStream | None = None
    start_time: float = 0.0
    accel_rate: float = 10.0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n_minutes(self) -> int:
        return len(self.labels)


@dataclass
class SessionFeatures:
    """Cached per-minute features of one session."""

    user: str
    session_id: str
    placements: tuple[str, ...]
    spectrograms: np.ndarray  # (n_placements, n_minutes, 51, 51, 2)
    loc_matrix: np.ndarray  # (n_minutes, 10, 2), zeros before minute 11
    loc_scalars: np.ndarray  # (n_minutes, 5)
    loc_avail: np.ndarray  # (n_minutes,) availability fraction of the window
    labels: np.ndarray  # (n_minutes,)

    @property
    def n_minutes(self) -> int:
        return len(self.labels)


def preprocess_session(session: Session, bands: BandTable | None = None) -> SessionFeatures:
    """Compute spectrograms and location windows for every minute of a session."""
    bands = bands or band_table()
    minutes = session.n_minutes
    placements = tuple(sorted(session.accel))
    specs = np.zeros((len(placements), minutes, 51, 51, 2))
    for p, placement in enumerate(placements):
        samples = np.asarray(session.accel[placement], dtype=np.float64)
        if len(samples) < minutes * WINDOW_SAMPLES:
            raise ValueError(
                f"{session.session_id}/{placement}: {len(samples)} samples for {minutes} labeled minutes"
            )
        for m in range(minutes):
            start = m * WINDOW_SAMPLES
            previous = samples[start - 1] if start > 0 else None
            window = magnitude_jerk(samples[start : start + WINDOW_SAMPLES], previous, session.accel_rate)
            specs[p, m] = spectrogram(window, bands)

    loc_matrix = np.zeros((minutes, 10, 2))
    loc_scalars = np.zeros((minutes, 5))
    loc_avail = np.zeros(minutes)
    if session.location is not None and minutes > 0:
        grid = fill_gaps(session.location, session.start_time, minutes)
        for m in range(WINDOW_MINUTES - 1, minutes):
            window = loc_features(grid, m - (WINDOW_MINUTES - 1))
            loc_matrix[m] = window.matrix
            loc_scalars[m] = window.scalars
            loc_avail[m] = window.availability
    return SessionFeatures(
        user=session.user,
        session_id=session.session_id,
        placements=placements,
        spectrograms=specs,
        loc_matrix=loc_matrix,
        loc_scalars=loc_scalars,
        loc_avail=loc_avail,
        labels=session.labels.copy(),
    )


@dataclass(frozen=True)
class BagRef:
    """Provenance of one bag: where each instance comes from.

    ``stream`` identifies the recording stream the bag slides along (the
    placement row for pure-placement datasets, the virtual stream index for
    mixed ones); sequence smoothing groups by it.
    """

    session: int  # index into the dataset's feature list
    placement_rows: tuple[int, ...]  # per accel instance, oldest first
    target: int  # target minute; accel minutes are target-2..target
    label: int
    stream: int = 0


class BagDataset:
    """Bags over a list of preprocessed sessions.

    The dataset stores references, not copies; ``batch`` gathers the arrays
    and optionally applies masking augmentation per acceleration instance.
    """

    def __init__(self, features: list[SessionFeatures], refs: list[BagRef]):
        self.features = features
        self.refs = refs

    def __len__(self) -> int:
        return len(self.refs)

    @property
    def n_instances(self) -> int:
        return len(self.refs[0].placement_rows) if self.refs else N_ACCEL_INSTANCES

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.refs], dtype=np.int64)

    @property
    def users(self) -> np.ndarray:
        return np.array([self.features[r.session].user for r in self.refs])

    def subset(self, indices) -> "BagDataset":
        return BagDataset(self.features, [self.refs[i] for i in indices])

    def placement_names(self, ref: BagRef) -> tuple[str, ...]:
        placements = self.features[ref.session].placements
        return tuple(placements[row] for row in ref.placement_rows)

    def batch(
        self,
        indices,
        augment_rng: np.random.Generator | None = None,
        placement_rng: np.random.Generator | None = None,
    ) -> dict:
        """Gather bag arrays for the given indices.

        ``augment_rng`` applies stripe masking per acceleration instance;
        ``placement_rng`` redraws one placement per bag uniformly (used by
        the pre-training protocol, which samples one acceleration stream out
        of the available placements per bag per epoch).
        """
        indices = np.asarray(indices, dtype=np.int64)
        n = len(indices)
        n_inst = self.n_instances
        acc = np.empty((n, n_inst, 51, 51, 2))
        loc_seq = np.empty((n, 10, 2))
        loc_scalars = np.empty((n, 5))
        labels = np.empty(n, dtype=np.int64)
        for b, i in enumerate(indices):
            ref = self.refs[i]
            feat = self.features[ref.session]
            rows = ref.placement_rows
            if placement_rng is not None:
                rows = (int(placement_rng.integers(0, len(feat.placements))),) * n_inst
            for k, row in enumerate(rows):
                minute = ref.target - (n_inst - 1 - k)
                spec = feat.spectrograms[row, minute]
                acc[b, k] = mask_augment(spec, augment_rng) if augment_rng is not None else spec
            loc_seq[b] = feat.loc_matrix[ref.target]
            loc_scalars[b] = feat.loc_scalars[ref.target]
            labels[b] = ref.label
        return {"acc": acc, "loc_seq": loc_seq, "loc_scalars": loc_scalars, "labels": labels}


def _targets(feat: SessionFeatures) -> range:
    return range(WINDOW_MINUTES - 1, feat.n_minutes)


def build_bags(
    features: list[SessionFeatures],
    placement: str | None = None,
    n_instances: int = N_ACCEL_INSTANCES,
) -> BagDataset:
    """Bags for one placement, or for every placement when ``placement`` is None.

    Bags are emitted in deterministic order (session, placement, target) and
    only for labeled target minutes with the full 12-minute history available
    inside the session. Missing location leaves the bag's location instance
    masked; it is still emitted. ``n_instances`` is the ablation knob for the
    number of successive one-minute acceleration windows per bag (at most the
    12-minute history).
    """
    if not 1 <= n_instances <= WINDOW_MINUTES:
        raise ValueError(f"n_instances must lie in [1, {WINDOW_MINUTES}]")
    refs: list[BagRef] = []
    for s, feat in enumerate(features):
        rows = range(len(feat.placements)) if placement is None else [feat.placements.index(placement)]
        for row in rows:
            for m in _targets(feat):
                if feat.labels[m] == UNLABELED:
                    continue
                refs.append(
                    BagRef(
                        session=s,
                        placement_rows=(row,) * n_instances,
                        target=m,
                        label=int(feat.labels[m]),
                        stream=row,
                    )
                )
    return BagDataset(features, refs)


def build_windows(features: list[SessionFeatures], placement: str | None = None) -> BagDataset:
    """Single-window dataset: one one-minute instance per labeled minute.

    This is the acceleration-encoder pre-training corpus; no location history
    is needed, so every labeled minute of every placement qualifies.
    """
    refs: list[BagRef] = []
    for s, feat in enumerate(features):
        rows = range(len(feat.placements)) if placement is None else [feat.placements.index(placement)]
        for row in rows:
            for m in range(feat.n_minutes):
                if feat.labels[m] == UNLABELED:
                    continue
                refs.append(
                    BagRef(session=s, placement_rows=(row,), target=m, label=int(feat.labels[m]), stream=row)
                )
    return BagDataset(features, refs)


def mixed_streams(
    features: list[SessionFeatures],
    n_streams: int,
    rng: np.random.Generator,
    dwell_mean: float = 10.0,
) -> BagDataset:
    """Bags over virtual streams that hop between placements.

    Each virtual stream assigns every minute a placement; the placement is
    redrawn uniformly at boundaries whose dwell times are geometric with the
    given mean (in one-minute windows), so switching is memoryless and
    reproducible from the rng. Every window stays traceable to exactly one
    source placement through the bag's placement rows.
    """
    refs: list[BagRef] = []
    for s, feat in enumerate(features):
        n_placements = len(feat.placements)
        for v in range(n_streams):
            choice = np.empty(feat.n_minutes, dtype=np.int64)
            m = 0
            while m < feat.n_minutes:
                row = int(rng.integers(0, n_placements))
                dwell = feat.n_minutes if not np.isfinite(dwell_mean) else int(rng.geometric(1.0 / dwell_mean))
                choice[m : m + dwell] = row
                m += dwell
            for m in _targets(feat):
                if feat.labels[m] == UNLABELED:
                    continue
                rows = tuple(int(choice[m - (N_ACCEL_INSTANCES - 1 - k)]) for k in range(N_ACCEL_INSTANCES))
                refs.append(
                    BagRef(session=s, placement_rows=rows, target=m, label=int(feat.labels[m]), stream=v)
                )
    return BagDataset(features, refs)


def save_features(path, features: list[SessionFeatures]) -> None:
    """Cache preprocessed per-minute features in the named-tensor container."""
    arrays: dict[str, np.ndarray] = {}
    meta = []
    for i, f in enumerate(features):
        meta.append({"user": f.user, "session_id": f.session_id, "placements": list(f.placements)})
        arrays[f"s{i}/spectrograms"] = f.spectrograms
        arrays[f"s{i}/loc_matrix"] = f.loc_matrix
        arrays[f"s{i}/loc_scalars"] = f.loc_scalars
        arrays[f"s{i}/loc_avail"] = f.loc_avail
        arrays[f"s{i}/labels"] = f.labels
    save_arrays(path, arrays, meta={"kind": "features", "sessions": meta})


def load_features(path) -> list[SessionFeatures]:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "features":
        raise ValueError(f"{path}: not a feature cache")
    features = []
    for i, entry in enumerate(meta["sessions"]):
        features.append(
            SessionFeatures(
                user=entry["user"],
                session_id=entry["session_id"],
                placements=tuple(entry["placements"]),
                spectrograms=arrays[f"s{i}/spectrograms"],
                loc_matrix=arrays[f"s{i}/loc_matrix"],
                loc_scalars=arrays[f"s{i}/loc_scalars"],
                loc_avail=arrays[f"s{i}/loc_avail"],
                labels=arrays[f"s{i}/labels"],
            )
        )
    return features


# -- session serialization -------------------------------------------------------


def save_sessions(path, sessions: list[Session]) -> None:
    """Persist sessions in the named-tensor container (round-trip exact)."""
    arrays: dict[str, np.ndarray] = {}
    meta = []
    for i, s in enumerate(sessions):
        entry = {
            "user": s.user,
            "session_id": s.session_id,
            "start_time": s.start_time,
            "accel_rate": s.accel_rate,
            "placements": sorted(s.accel),
            "has_location": s.location is not None,
        }
        for placement in sorted(s.accel):
            arrays[f"session{i}/accel/{placement}"] = s.accel[placement]
        arrays[f"session{i}/labels"] = s.labels
        if s.location is not None:
            arrays[f"session{i}/loc/times"] = s.location.times
            arrays[f"session{i}/loc/lats"] = s.location.lats
            arrays[f"session{i}/loc/lons"] = s.location.lons
        meta.append(entry)
    save_arrays(path, arrays, meta={"kind": "sessions", "sessions": meta})


def load_sessions(path) -> list[Session]:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "sessions":
        raise ValueError(f"{path}: not a session archive")
    sessions = []
    for i, entry in enumerate(meta["sessions"]):
        accel = {p: arrays[f"session{i}/accel/{p}"] for p in entry["placements"]}
        location = None
        if entry["has_location"]:
            location = LocStream(
                times=arrays[f"session{i}/loc/times"],
                lats=arrays[f"session{i}/loc/lats"],
                lons=arrays[f"session{i}/loc/lons"],
                session_id=entry["session_id"],
            )
        sessions.append(
            Session(
                user=entry["user"],
                session_id=entry["session_id"],
                accel=accel,
                labels=arrays[f"session{i}/labels"],
                location=location,
                start_time=entry["start_time"],
                accel_rate=entry["accel_rate"],
            )
        )
    return sessions
