"""Synthetic PLAX phantom: periodic keypoint motion with known truth.

The cavity diameter follows a raised cosine over a (possibly irregular,
cyclically repeating) sequence of cycle lengths; walls thicken linearly
as the cavity shrinks. The four keypoints sit on a straight measurement
line, so every derived quantity has a closed form. A mock model renders
the truth as Gaussian blobs with controllable positional noise and
channel dropout, giving the decode/beats/report pipeline an end-to-end
oracle with tunable difficulty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, InvalidExtent
from .geometry import _CHANNEL_ORDER, MeasurementTriple, Point2


@dataclass(frozen=True)
class PhantomConfig:
    fps: float = 50.0
    duration_s: float = 5.0
    period_s: tuple = (1.0,)  # cycles repeat this sequence
    lvid_d: float = 4.6
    lvid_s: float = 3.0
    ivs_d: float = 1.1
    lvpw_d: float = 1.1
    wall_gain: float = 0.15
    axis_angle: float = 90.0
    origin: Point2 = field(default_factory=lambda: Point2(48.0, 20.0))
    cm_per_pixel: float = 0.05
    seed: int = 0

    def __post_init__(self):
        periods = self.period_s
        if isinstance(periods, (int, float)):
            periods = (float(periods),)
        periods = tuple(float(p) for p in periods)
        if not periods or any(p <= 0 for p in periods):
            raise InvalidConfig("period_s entries must be positive", period_s=periods)
        object.__setattr__(self, "period_s", periods)
        if self.fps <= 0 or self.duration_s <= 0:
            raise InvalidConfig("fps and duration_s must be positive")
        if not (self.lvid_d > self.lvid_s > 0):
            raise InvalidConfig(
                "need lvid_d > lvid_s > 0", lvid_d=self.lvid_d, lvid_s=self.lvid_s
            )
        if self.ivs_d <= 0 or self.lvpw_d <= 0:
            raise InvalidConfig("wall thicknesses must be positive")
        if self.wall_gain < 0:
            raise InvalidConfig("wall_gain must be >= 0")
        if self.cm_per_pixel <= 0:
            raise InvalidConfig("cm_per_pixel must be positive")
        if self.duration_s < periods[0] + periods[1 % len(periods)]:
            raise InvalidConfig(
                "clip must cover at least two cardiac cycles",
                duration_s=self.duration_s,
            )

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration_s))


@dataclass(frozen=True)
class MockModelConfig:
    noise_sigma_px: float = 0.0
    blob_sigma_px: float = 1.5
    peak_value: float = 1.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma_px < 0:
            raise InvalidConfig("noise_sigma_px must be >= 0")
        if self.blob_sigma_px <= 0:
            raise InvalidConfig("blob_sigma_px must be > 0")
        if not (0.0 < self.peak_value <= 1.0):
            raise InvalidConfig("peak_value must lie in (0, 1]")
        if not (0.0 <= self.dropout_prob < 1.0):
            raise InvalidConfig("dropout_prob must lie in [0, 1)")


@dataclass(frozen=True)
class Trajectory:
    """Ground truth for one synthetic clip.

    points has shape (F, 4, 2) in channel order with (x, y) pixel
    coordinates; measurements has shape (F, 3) in (ivs, lvid, lvpw) cm.
    """

    config: PhantomConfig
    points: np.ndarray
    measurements: np.ndarray
    diastole_frames: tuple
    systole_frames: tuple

    @property
    def n_frames(self) -> int:
        return int(self.points.shape[0])

    def points_for_frame(self, f: int) -> dict:
        return {
            ch: Point2(float(self.points[f, k, 0]), float(self.points[f, k, 1]))
            for k, ch in enumerate(_CHANNEL_ORDER)
        }

    def triple_for_frame(self, f: int) -> MeasurementTriple:
        ivs, lvid, lvpw = self.measurements[f]
        return MeasurementTriple(ivs=float(ivs), lvid=float(lvid), lvpw=float(lvpw))


def _phase_at(t: np.ndarray, periods: tuple) -> np.ndarray:
    """Continuous cycle count at each time; integer values are cycle starts."""
    phase = np.empty_like(t)
    for i, tv in enumerate(t):
        cycle = 0
        start = 0.0
        while True:
            p = periods[cycle % len(periods)]
            if tv < start + p:
                phase[i] = cycle + (tv - start) / p
                break
            start += p
            cycle += 1
    return phase


def _cycle_marks(cfg: PhantomConfig) -> tuple:
    """(diastole_frames, systole_frames) from the closed-form cycle times."""
    periods = cfg.period_s
    n = cfg.n_frames
    diastole, systole = [], []
    start = 0.0
    cycle = 0
    while start < cfg.duration_s:
        p = periods[cycle % len(periods)]
        df = int(round(start * cfg.fps))
        if df < n:
            diastole.append(df)
        sf = int(round((start + p / 2.0) * cfg.fps))
        if sf < n:
            systole.append(sf)
        start += p
        cycle += 1
    return tuple(diastole), tuple(systole)


def generate_trajectory(cfg: PhantomConfig) -> Trajectory:
    """Closed-form keypoint trajectory plus per-frame truth measurements.

    LVID(t) interpolates between the systolic and diastolic diameter with
    a raised cosine of the cycle phase (maxima at cycle starts); both
    walls gain wall_gain cm per cm of cavity reduction. The four points
    lie on the ray from the origin at axis_angle, spaced by the segment
    lengths converted to pixels.
    """
    n = cfg.n_frames
    t = np.arange(n, dtype=np.float64) / cfg.fps
    phase = _phase_at(t, cfg.period_s)
    lvid = cfg.lvid_s + (cfg.lvid_d - cfg.lvid_s) * (1.0 + np.cos(2.0 * math.pi * phase)) / 2.0
    squeeze = cfg.lvid_d - lvid
    ivs = cfg.ivs_d + cfg.wall_gain * squeeze
    lvpw = cfg.lvpw_d + cfg.wall_gain * squeeze
    measurements = np.stack([ivs, lvid, lvpw], axis=1)

    theta = math.radians(cfg.axis_angle)
    u = np.array([math.cos(theta), math.sin(theta)])
    start = np.array([cfg.origin.x, cfg.origin.y])
    cum_px = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(measurements / cfg.cm_per_pixel, axis=1)], axis=1
    )
    points = start[None, None, :] + cum_px[:, :, None] * u[None, None, :]

    diastole, systole = _cycle_marks(cfg)
    return Trajectory(
        config=cfg,
        points=points,
        measurements=measurements,
        diastole_frames=diastole,
        systole_frames=systole,
    )


def render_heatmaps(
    traj: Trajectory, mock: MockModelConfig, height: int, width: int
) -> np.ndarray:
    """Render the trajectory as a (F, 4, H, W) float32 heatmap stack.

    Each present channel is a Gaussian blob of sd blob_sigma_px and peak
    peak_value centered on the truth point displaced by noise_sigma_px
    times a unit normal per axis (so different noise levels under one
    seed share the same draws); jittered centers clamp into the image.
    Channels lost to dropout stay all-zero. Blob support is truncated
    beyond six sigmas, where the tail is below 2e-8 of the peak.
    """
    if height < 1 or width < 1:
        raise InvalidExtent("extent must be positive", height=height, width=width)
    n = traj.n_frames
    rng = np.random.default_rng(mock.seed)
    unit_noise = rng.standard_normal((n, 4, 2))
    centers = traj.points + mock.noise_sigma_px * unit_noise
    centers[..., 0] = np.clip(centers[..., 0], 0.0, width - 1.0)
    centers[..., 1] = np.clip(centers[..., 1], 0.0, height - 1.0)
    if mock.dropout_prob > 0.0:
        dropped = rng.random((n, 4)) < mock.dropout_prob
    else:
        dropped = np.zeros((n, 4), dtype=bool)

    stack = np.zeros((n, 4, height, width), dtype=np.float32)
    radius = int(math.ceil(6.0 * mock.blob_sigma_px))
    two_sigma_sq = 2.0 * mock.blob_sigma_px ** 2
    for f in range(n):
        for k in range(4):
            if dropped[f, k]:
                continue
            cx, cy = centers[f, k]
            x0 = max(0, int(math.floor(cx)) - radius)
            x1 = min(width, int(math.ceil(cx)) + radius + 1)
            y0 = max(0, int(math.floor(cy)) - radius)
            y1 = min(height, int(math.ceil(cy)) + radius + 1)
            xs = np.arange(x0, x1, dtype=np.float64) - cx
            ys = np.arange(y0, y1, dtype=np.float64) - cy
            blob = mock.peak_value * np.exp(
                -(ys[:, None] ** 2 + xs[None, :] ** 2) / two_sigma_sq
            )
            stack[f, k, y0:y1, x0:x1] = blob.astype(np.float32)
    return stack
