"""Cardiac-cycle extraction from the per-frame measurement series.

The LVID trace drives everything: after gap filling and median+mean
smoothing, prominence-filtered local maxima are diastole frames and the
minimum between consecutive maxima is that beat's systole. Reported
measurements are the raw (unsmoothed) per-frame values so they stay
traceable to the decoder output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter, uniform_filter1d
from scipy.signal import find_peaks

from .errors import AllGaps, InvalidConfig, NoBeatsDetected
from .geometry import MeasurementTriple


@dataclass(frozen=True)
class MeasurementSeries:
    """Per-frame triples with NaN rows marking excluded (GAP) frames.

    values has shape (N, 3) ordered (ivs, lvid, lvpw); frame_indices is
    strictly increasing.
    """

    frame_indices: np.ndarray
    values: np.ndarray
    fps: float

    def __post_init__(self):
        idx = np.asarray(self.frame_indices)
        vals = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or vals.ndim != 2 or vals.shape != (idx.size, 3):
            raise InvalidConfig(
                "series needs frame_indices (N,) and values (N, 3)",
                n_indices=int(idx.size),
                values_shape=list(vals.shape),
            )
        if idx.size == 0:
            raise InvalidConfig("series must be nonempty")
        if np.any(np.diff(idx) <= 0):
            raise InvalidConfig("frame_indices must be strictly increasing")
        if self.fps <= 0 or not math.isfinite(self.fps):
            raise InvalidConfig("fps must be finite and > 0", fps=self.fps)
        object.__setattr__(self, "frame_indices", idx.astype(np.int64))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_triples(cls, entries, fps: float) -> "MeasurementSeries":
        """Build from an iterable of (frame_index, MeasurementTriple | None)."""
        idx, vals = [], []
        for frame_index, triple in entries:
            idx.append(frame_index)
            if triple is None:
                vals.append((np.nan, np.nan, np.nan))
            else:
                vals.append(triple.as_tuple())
        return cls(
            frame_indices=np.asarray(idx, dtype=np.int64),
            values=np.asarray(vals, dtype=np.float64),
            fps=fps,
        )

    @classmethod
    def from_outcomes(cls, outcomes, fps: float) -> "MeasurementSeries":
        """Build from decode.FrameOutcome records (excluded frames become gaps)."""
        return cls.from_triples(
            ((o.frame_index, o.measurement) for o in outcomes), fps
        )

    @property
    def gap_mask(self) -> np.ndarray:
        return np.isnan(self.values).any(axis=1)

    def triple_at(self, row: int) -> MeasurementTriple | None:
        if self.gap_mask[row]:
            return None
        ivs, lvid, lvpw = self.values[row]
        return MeasurementTriple(ivs=ivs, lvid=lvid, lvpw=lvpw)


@dataclass(frozen=True)
class BeatConfig:
    """Detector knobs; windows are forced odd, extrema separation comes
    from the maximum plausible heart rate."""

    max_heart_rate: float = 160.0
    min_prominence_frac: float = 0.2
    smooth_median_window: int = 3
    smooth_mean_window: int | None = None  # None -> round(fps/10), min 1

    def __post_init__(self):
        if self.max_heart_rate <= 0:
            raise InvalidConfig("max_heart_rate must be > 0")
        if self.min_prominence_frac <= 0:
            raise InvalidConfig("min_prominence_frac must be > 0")
        if self.smooth_median_window < 1:
            raise InvalidConfig("smooth_median_window must be >= 1")
        if self.smooth_mean_window is not None and self.smooth_mean_window < 1:
            raise InvalidConfig("smooth_mean_window must be >= 1")

    def median_window(self) -> int:
        return _force_odd(self.smooth_median_window)

    def mean_window(self, fps: float) -> int:
        w = self.smooth_mean_window
        if w is None:
            w = max(1, round(fps / 10.0))
        return _force_odd(w)

    def min_separation(self, fps: float) -> int:
        return max(1, int(round(fps * 60.0 / self.max_heart_rate)))


@dataclass(frozen=True)
class BeatRecord:
    beat_index: int
    diastole_frame: int
    systole_frame: int
    diastolic: MeasurementTriple
    systolic: MeasurementTriple


def _force_odd(w: int) -> int:
    return w if w % 2 == 1 else w + 1


def _fill_gaps(series: MeasurementSeries) -> np.ndarray:
    """Linearly interpolate NaN rows; boundary gaps copy the nearest kept value."""
    gaps = series.gap_mask
    if gaps.all():
        raise AllGaps("series has no kept frames")
    filled = series.values.copy()
    if gaps.any():
        pos = series.frame_indices.astype(np.float64)
        for c in range(3):
            filled[gaps, c] = np.interp(pos[gaps], pos[~gaps], filled[~gaps, c])
    return filled


def smooth_series(series: MeasurementSeries, cfg: BeatConfig) -> MeasurementSeries:
    """Gap-fill then median+mean smooth each component; indices unchanged."""
    filled = _fill_gaps(series)
    mw = cfg.median_window()
    aw = cfg.mean_window(series.fps)
    out = np.empty_like(filled)
    for c in range(3):
        col = filled[:, c]
        if mw > 1:
            col = median_filter(col, size=mw, mode="nearest")
        if aw > 1:
            col = uniform_filter1d(col, size=aw, mode="nearest")
        out[:, c] = col
    return MeasurementSeries(
        frame_indices=series.frame_indices.copy(), values=out, fps=series.fps
    )


def _nearest_kept_row(gaps: np.ndarray, row: int) -> int:
    """Closest non-gap row to ``row`` (ties resolve to the earlier frame)."""
    kept = np.flatnonzero(~gaps)
    return int(kept[np.argmin(np.abs(kept - row))])


def detect_beats(series: MeasurementSeries, cfg: BeatConfig = BeatConfig()) -> list:
    """Extract one BeatRecord per detected cardiac cycle.

    Diastoles are prominence-filtered local maxima of the smoothed LVID
    trace (prominence >= min_prominence_frac of the signal range,
    separation >= fps*60/max_heart_rate frames); boundary frames never
    qualify. Each diastole's systole is the LVID minimum before the next
    diastole; the final diastole uses the trailing segment provided its
    minimum is strictly interior (the signal demonstrably turned around,
    confirming a complete cycle). Measurements are taken from the
    unsmoothed series, falling back to the nearest kept frame when the
    selected frame is a gap.

    Raises NoBeatsDetected when no complete cycle exists and AllGaps when
    the series carries no kept frames at all.
    """
    smoothed = smooth_series(series, cfg)
    lvid = smoothed.values[:, 1]
    n = lvid.size
    signal_range = float(lvid.max() - lvid.min())
    if signal_range <= 0.0 or n < 3:
        raise NoBeatsDetected("LVID trace has no usable oscillation")

    peaks, _ = find_peaks(
        lvid,
        distance=cfg.min_separation(series.fps),
        prominence=cfg.min_prominence_frac * signal_range,
    )
    peaks = [p for p in peaks if 0 < p < n - 1]
    if not peaks:
        raise NoBeatsDetected("no diastolic peaks passed the prominence filter")

    gaps = series.gap_mask
    beats = []
    for k, d in enumerate(peaks):
        if k + 1 < len(peaks):
            stop = peaks[k + 1]
            tail = False
        else:
            stop = n
            tail = True
        segment = lvid[d + 1 : stop]
        if segment.size == 0:
            continue
        s = d + 1 + int(np.argmin(segment))
        if tail and s >= n - 1:
            continue  # still descending at the end: cycle not confirmed
        dia_row = _nearest_kept_row(gaps, d) if gaps[d] else d
        sys_row = _nearest_kept_row(gaps, s) if gaps[s] else s
        diastolic = series.triple_at(dia_row)
        systolic = series.triple_at(sys_row)
        if diastolic.lvid < systolic.lvid:
            continue  # raw values contradict the cycle; drop as unreliable
        beats.append(
            BeatRecord(
                beat_index=len(beats),
                diastole_frame=int(series.frame_indices[d]),
                systole_frame=int(series.frame_indices[s]),
                diastolic=diastolic,
                systolic=systolic,
            )
        )
    if not beats:
        raise NoBeatsDetected("no complete cardiac cycle found")
    return beats
