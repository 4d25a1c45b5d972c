"""Acceleration preprocessing: magnitude/jerk channels and banded spectrograms.

A one-minute window of 3-axis samples at 10 Hz becomes a 600x2 matrix of
(magnitude, jerk) values, then a 51x51x2 log-power image: 51 overlapping
10-second segments by 51 frequency bands by the two channels. Band widths
follow a doubling rule clipped at one DFT bin; at the default resolution
(0.1 Hz bins, 51 bands over 51 bins) every band is a single bin and the
final band edge is the 5 Hz Nyquist frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SAMPLE_RATE_HZ",
    "WINDOW_SECONDS",
    "WINDOW_SAMPLES",
    "SEGMENT_SAMPLES",
    "SEGMENT_HOP",
    "N_SEGMENTS",
    "N_BANDS",
    "LOG_EPS",
    "BandTable",
    "band_table",
    "magnitude_jerk",
    "window_starts",
    "spectrogram",
    "mask_augment",
    "channel_stats",
    "standardize",
]

SAMPLE_RATE_HZ = 10.0
WINDOW_SECONDS = 60
WINDOW_SAMPLES = 600
SEGMENT_SAMPLES = 100  # 10 s at 10 Hz
SEGMENT_HOP = 10  # 9 s overlap
N_SEGMENTS = 1 + (WINDOW_SAMPLES - SEGMENT_SAMPLES) // SEGMENT_HOP
N_BANDS = 51
LOG_EPS = 1e-7


@dataclass(frozen=True)
class BandTable:
    """Frequency band layout: edges in Hz and the DFT bins of each band.

    ``edges`` has ``n_bands + 1`` strictly increasing entries ending at the
    Nyquist frequency; ``bin_ranges`` holds per-band half-open [start, stop)
    DFT bin index ranges that partition all bins of the segment DFT.
    """

    edges: np.ndarray
    bin_ranges: np.ndarray

    @property
    def n_bands(self) -> int:
        return len(self.bin_ranges)

    def band_of(self, freq_hz: float) -> int:
        """Index of the band whose (lower, upper] interval contains freq_hz."""
        idx = int(np.searchsorted(self.edges, freq_hz, side="left")) - 1
        if not 0 <= idx < self.n_bands:
            raise ValueError(f"{freq_hz} Hz is outside (0, {self.edges[-1]}] Hz")
        return idx


def band_table(
    f_s: float = SAMPLE_RATE_HZ,
    n_bands: int = N_BANDS,
    segment_samples: int = SEGMENT_SAMPLES,
) -> BandTable:
    """Build the band layout over the segment's one-sided DFT bins.

    Widths (in bins) double from band to band where the remaining bin budget
    allows it, never drop below one bin, and the last band is clipped so the
    table ends exactly at Nyquist. With 51 bands over 51 bins the doubling is
    never affordable and every band is one bin wide.
    """
    total_bins = segment_samples // 2 + 1
    if n_bands > total_bins:
        raise ValueError(f"{n_bands} bands exceed the {total_bins} available DFT bins")
    widths = np.empty(n_bands, dtype=np.int64)
    assigned = 0
    for i in range(n_bands - 1):
        cap = (total_bins - assigned) // (n_bands - i)
        want = 1 if i == 0 else 2 * widths[i - 1]
        widths[i] = max(1, min(want, cap))
        assigned += widths[i]
    widths[n_bands - 1] = total_bins - assigned

    stops = np.cumsum(widths)
    starts = np.concatenate(([0], stops[:-1]))
    bin_ranges = np.stack([starts, stops], axis=1)

    df = f_s / segment_samples
    nyquist = f_s / 2.0
    edges = np.empty(n_bands + 1)
    edges[0] = 0.0
    edges[1:] = (stops - 0.5) * df
    edges[-1] = nyquist
    return BandTable(edges=edges, bin_ranges=bin_ranges)


def magnitude_jerk(
    samples: np.ndarray,
    previous_sample: np.ndarray | None = None,
    f_s: float = SAMPLE_RATE_HZ,
) -> np.ndarray:
    """Orientation-free channels of a window of 3-axis samples.

    Magnitude is the per-sample Euclidean norm (gravity retained); jerk is the
    norm of the sample-to-sample difference scaled by the sampling rate. The
    first jerk value uses ``previous_sample`` (the last sample before the
    window) when given, otherwise it copies the second jerk value.

    Returns an (n, 2) matrix of (magnitude, jerk).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError("expected an (n, 3) array of 3-axis samples")
    if not np.all(np.isfinite(samples)):
        raise ValueError("window contains non-finite samples")
    magnitude = np.linalg.norm(samples, axis=1)
    diffs = np.diff(samples, axis=0)
    jerk_tail = np.linalg.norm(diffs, axis=1) * f_s
    if previous_sample is not None:
        first = np.linalg.norm(samples[0] - np.asarray(previous_sample, dtype=np.float64)) * f_s
    else:
        first = jerk_tail[0] if len(jerk_tail) else 0.0
    jerk = np.concatenate(([first], jerk_tail))
    return np.stack([magnitude, jerk], axis=1)


def window_starts(n_samples: int, window_samples: int = WINDOW_SAMPLES) -> np.ndarray:
    """Start indices of the consecutive non-overlapping windows that fit."""
    return np.arange(0, n_samples - window_samples + 1, window_samples)


def _hann(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def spectrogram(window: np.ndarray, bands: BandTable | None = None) -> np.ndarray:
    """Log-power spectrogram image of a (600, 2) magnitude/jerk window.

    Per channel: 51 Hann-windowed 10-second segments hopped by 1 second, a
    one-sided power spectrum per segment, band powers summed per the band
    table, then log(power + eps). Output is (segments, bands, channels) =
    (51, 51, 2).
    """
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (WINDOW_SAMPLES, 2):
        raise ValueError(f"expected a ({WINDOW_SAMPLES}, 2) window, got {window.shape}")
    bands = bands or band_table()
    taper = _hann(SEGMENT_SAMPLES)
    seg_index = SEGMENT_HOP * np.arange(N_SEGMENTS)[:, None] + np.arange(SEGMENT_SAMPLES)[None, :]
    out = np.empty((N_SEGMENTS, bands.n_bands, 2))
    for ch in range(2):
        segments = window[:, ch][seg_index] * taper
        power = np.abs(np.fft.rfft(segments, axis=1)) ** 2
        banded = np.add.reduceat(power, bands.bin_ranges[:, 0], axis=1)
        out[:, :, ch] = np.log(banded + LOG_EPS)
    return out


def mask_augment(spec: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stripe-masking augmentation for a (time, band, channel) spectrogram.

    Draws 0-2 frequency stripes of width 0-5 band rows and 0-2 time stripes of
    length 0-5 segment columns, uniformly positioned, and applies the same
    stripes to both channels. Masked cells take their channel's mean over the
    unmasked cells. Draw order: stripe counts (frequency then time), then per
    stripe its extent and position.
    """
    spec = np.asarray(spec, dtype=np.float64)
    n_time, n_band, n_ch = spec.shape
    k_f = int(rng.integers(0, 3))
    k_t = int(rng.integers(0, 3))
    band_mask = np.zeros(n_band, dtype=bool)
    time_mask = np.zeros(n_time, dtype=bool)
    for _ in range(k_f):
        width = int(rng.integers(0, 6))
        if width:
            start = int(rng.integers(0, n_band - width + 1))
            band_mask[start : start + width] = True
    for _ in range(k_t):
        length = int(rng.integers(0, 6))
        if length:
            start = int(rng.integers(0, n_time - length + 1))
            time_mask[start : start + length] = True
    if not band_mask.any() and not time_mask.any():
        return spec.copy()
    cell_mask = time_mask[:, None] | band_mask[None, :]
    out = spec.copy()
    for ch in range(n_ch):
        fill = spec[:, :, ch][~cell_mask].mean()
        out[:, :, ch][cell_mask] = fill
    return out


def channel_stats(specs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and standard deviation over a stack of spectrograms."""
    specs = np.asarray(specs)
    axes = tuple(range(specs.ndim - 1))
    return specs.mean(axis=axes), specs.std(axis=axes)


def standardize(spec: np.ndarray, stats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    mean, std = stats
    return (spec - mean) / np.maximum(std, 1e-12)
