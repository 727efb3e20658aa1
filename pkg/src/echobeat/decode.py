"""Heatmap-to-keypoint decoding with frame-quality heuristics.

A heatmap stack is a float32 ndarray of shape (frames, 4, H, W). Each
channel decodes to the (optionally activation-weighted) centroid of the
pixels at or above the confidence threshold; sub-threshold pixels are
ignored. A channel with no surviving pixels is absent. Frames whose
three segment angles spread more than the configured limit, or with an
absent channel, are flagged so downstream averaging can skip them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .geometry import (
    _CHANNEL_ORDER,
    Calibration,
    Channel,
    Keypoint,
    KeypointSet,
    MeasurementTriple,
    Point2,
    max_pairwise_angle_spread,
    measure,
    segment_angles,
)
from .errors import DegenerateSegment

EMPTY_CHANNEL = "EMPTY_CHANNEL"
ANGLE_INCONSISTENT = "ANGLE_INCONSISTENT"


@dataclass(frozen=True)
class DecodeConfig:
    confidence_threshold: float = 0.3
    max_angle_spread: float = 30.0
    weighted_centroid: bool = True

    def __post_init__(self):
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError("confidence_threshold must lie in [0, 1]")
        if not (0.0 < self.max_angle_spread <= 180.0):
            raise ValueError("max_angle_spread must lie in (0, 180]")


@dataclass(frozen=True)
class FrameQuality:
    kept: bool
    reasons: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_reasons(cls, reasons) -> "FrameQuality":
        rs = frozenset(reasons)
        return cls(kept=not rs, reasons=rs)


@dataclass(frozen=True)
class FrameOutcome:
    """Decoded keypoints, quality verdict, and measurement of one frame."""

    frame_index: int
    keypoints: KeypointSet
    quality: FrameQuality
    measurement: MeasurementTriple | None


def _channel_centroid(ch: np.ndarray, threshold: float, weighted: bool):
    """(x, y, confidence) of one channel, or None when nothing survives.

    Uses row/column marginal sums instead of coordinate gathering so a
    480x640 channel stays well under the per-frame latency budget.
    """
    mask = ch >= threshold
    if not mask.any():
        return None
    w = np.where(mask, ch, 0.0).astype(np.float64, copy=False)
    conf = float(w.max())
    if not weighted:
        w = mask.astype(np.float64)
    s = float(w.sum())
    if s <= 0.0:
        # threshold 0 can keep only zero-valued pixels; fall back to the
        # unweighted centroid of the surviving set (uniform limit).
        w = mask.astype(np.float64)
        s = float(w.sum())
    h, wd = ch.shape
    x = float(w.sum(axis=0) @ np.arange(wd, dtype=np.float64)) / s
    y = float(w.sum(axis=1) @ np.arange(h, dtype=np.float64)) / s
    return x, y, min(max(conf, 0.0), 1.0)


def decode_frame(
    frame: np.ndarray, cfg: DecodeConfig = DecodeConfig(), frame_index: int = 0
) -> tuple:
    """Decode one (4, H, W) activation frame into (KeypointSet, FrameQuality).

    Channels with no pixel at or above the threshold are absent and add
    EMPTY_CHANNEL. When all four are present, a pairwise circular spread
    of the segment angles above cfg.max_angle_spread adds
    ANGLE_INCONSISTENT; coincident keypoints (zero-length segment) count
    as inconsistent as well.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 4:
        raise ShapeMismatch(
            "expected a (4, H, W) frame", shape=list(frame.shape)
        )
    reasons = set()
    points = {}
    for ch in _CHANNEL_ORDER:
        hit = _channel_centroid(
            frame[ch.index], cfg.confidence_threshold, cfg.weighted_centroid
        )
        if hit is None:
            reasons.add(EMPTY_CHANNEL)
            continue
        x, y, conf = hit
        points[ch] = Keypoint(position=Point2(x, y), confidence=conf, channel=ch)

    ks = KeypointSet(frame_index=frame_index, points=points)
    if ks.complete:
        try:
            spread = max_pairwise_angle_spread(segment_angles(ks))
        except DegenerateSegment:
            reasons.add(ANGLE_INCONSISTENT)
        else:
            if spread > cfg.max_angle_spread:
                reasons.add(ANGLE_INCONSISTENT)
    return ks, FrameQuality.from_reasons(reasons)


def decode_video(
    stack: np.ndarray, cfg: DecodeConfig, cal: Calibration
) -> list:
    """Decode every frame of a (F, 4, H, W) stack into FrameOutcome records.

    A frame carries a MeasurementTriple exactly when it is kept; excluded
    frames keep their reasons and no measurement. Frames are independent,
    so splitting a stack and concatenating the outcomes is equivalent to
    one pass.
    """
    stack = np.asarray(stack)
    if stack.ndim != 4 or stack.shape[1] != 4:
        raise ShapeMismatch(
            "expected a (F, 4, H, W) stack", shape=list(stack.shape)
        )
    outcomes = []
    for f in range(stack.shape[0]):
        ks, quality = decode_frame(stack[f], cfg, frame_index=f)
        m = measure(ks, cal) if quality.kept else None
        outcomes.append(
            FrameOutcome(frame_index=f, keypoints=ks, quality=quality, measurement=m)
        )
    return outcomes
