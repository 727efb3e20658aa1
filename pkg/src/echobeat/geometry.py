"""Domain types and pure geometry for PLAX wall measurements.

A frame is summarized by four named keypoints lying (roughly) on one
measurement line. Walking the line top to bottom, consecutive point
pairs delimit the three clinical segments:

    IVS_TOP -> LV_SEPTAL     interventricular septum (ivs)
    LV_SEPTAL -> LV_POSTERIOR left ventricular internal dimension (lvid)
    LV_POSTERIOR -> PW_BOTTOM posterior wall (lvpw)

Coordinates are continuous pixel positions (x = column, y = row).
Physical lengths come from an explicit pixel-to-cm calibration; there is
deliberately no implicit pixel-unit fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateSegment, InvalidConfig, MissingKeypoint


class Channel(Enum):
    """The four keypoint channels, in fixed artifact-wide order."""

    IVS_TOP = "ivs_top"
    LV_SEPTAL = "lv_septal"
    LV_POSTERIOR = "lv_posterior"
    PW_BOTTOM = "pw_bottom"

    @property
    def index(self) -> int:
        return _CHANNEL_ORDER.index(self)


_CHANNEL_ORDER = (
    Channel.IVS_TOP,
    Channel.LV_SEPTAL,
    Channel.LV_POSTERIOR,
    Channel.PW_BOTTOM,
)

#: Ordered endpoint pairs of the three measured segments.
SEGMENTS = (
    (Channel.IVS_TOP, Channel.LV_SEPTAL),
    (Channel.LV_SEPTAL, Channel.LV_POSTERIOR),
    (Channel.LV_POSTERIOR, Channel.PW_BOTTOM),
)

SEGMENT_NAMES = ("ivs", "lvid", "lvpw")


@dataclass(frozen=True)
class Point2:
    """A continuous 2D pixel position (x = column, y = row)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidConfig("point coordinates must be finite", x=self.x, y=self.y)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Keypoint:
    """One detected (or annotated) landmark with a confidence score."""

    position: Point2
    confidence: float
    channel: Channel

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidConfig(
                "keypoint confidence must lie in [0, 1]", confidence=self.confidence
            )


@dataclass(frozen=True)
class KeypointSet:
    """The keypoints of one frame; a channel may be absent (undetected).

    ``points`` maps each present channel to its Keypoint. Channels are
    unique by construction of the mapping.
    """

    frame_index: int
    points: dict  # Channel -> Keypoint

    def __post_init__(self):
        if self.frame_index < 0:
            raise InvalidConfig("frame_index must be >= 0", frame_index=self.frame_index)
        for ch, kp in self.points.items():
            if kp.channel is not ch:
                raise InvalidConfig(
                    "keypoint filed under the wrong channel",
                    slot=ch.value,
                    keypoint_channel=kp.channel.value,
                )

    @classmethod
    def from_positions(cls, frame_index: int, positions: dict, confidence: float = 1.0):
        """Build a set from a Channel -> Point2 mapping with uniform confidence."""
        pts = {
            ch: Keypoint(position=p, confidence=confidence, channel=ch)
            for ch, p in positions.items()
        }
        return cls(frame_index=frame_index, points=pts)

    @property
    def complete(self) -> bool:
        return all(ch in self.points for ch in _CHANNEL_ORDER)

    def missing_channels(self) -> tuple:
        return tuple(ch for ch in _CHANNEL_ORDER if ch not in self.points)

    def position(self, ch: Channel) -> Point2:
        return self.points[ch].position


@dataclass(frozen=True)
class Calibration:
    """Pixel-to-physical scale and frame rate of one video."""

    cm_per_pixel: float
    fps: float

    def __post_init__(self):
        if not (math.isfinite(self.cm_per_pixel) and self.cm_per_pixel > 0):
            raise InvalidConfig(
                "cm_per_pixel must be finite and > 0", cm_per_pixel=self.cm_per_pixel
            )
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise InvalidConfig("fps must be finite and > 0", fps=self.fps)

    @classmethod
    def pixel_units(cls, fps: float) -> "Calibration":
        """Explicit escape hatch: report lengths in pixels (cm_per_pixel=1)."""
        return cls(cm_per_pixel=1.0, fps=fps)


@dataclass(frozen=True)
class MeasurementTriple:
    """IVS / LVID / LVPW lengths in cm for one frame or cardiac phase."""

    ivs: float
    lvid: float
    lvpw: float

    def __post_init__(self):
        for name in SEGMENT_NAMES:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidConfig(f"{name} must be finite and >= 0", value=v)

    def as_tuple(self) -> tuple:
        return (self.ivs, self.lvid, self.lvpw)


def _require_complete(ks: KeypointSet) -> None:
    missing = ks.missing_channels()
    if missing:
        raise MissingKeypoint(
            "frame cannot be measured: missing keypoint channel(s)",
            frame_index=ks.frame_index,
            missing=[ch.value for ch in missing],
        )


def measure(ks: KeypointSet, cal: Calibration) -> MeasurementTriple:
    """Turn a complete keypoint set into the three segment lengths (cm).

    Each length is the Euclidean distance between the segment's named
    endpoints scaled by ``cal.cm_per_pixel``. Channels are matched by
    name, never by position in any container.

    Raises MissingKeypoint when any channel is absent.
    """
    _require_complete(ks)
    lengths = [
        ks.position(a).distance_to(ks.position(b)) * cal.cm_per_pixel
        for a, b in SEGMENTS
    ]
    return MeasurementTriple(ivs=lengths[0], lvid=lengths[1], lvpw=lengths[2])


def segment_angles(ks: KeypointSet) -> tuple:
    """Angles (degrees) of the three segments, in (ivs, lvid, lvpw) order.

    The angle of a segment is atan2(dy, dx) of its ordered endpoint pair,
    reported in (-180, 180] (the -180 branch folds to +180 so the range
    is half-open).

    Raises MissingKeypoint for an incomplete set and DegenerateSegment
    when a segment has zero length.
    """
    _require_complete(ks)
    angles = []
    for name, (a, b) in zip(SEGMENT_NAMES, SEGMENTS):
        pa, pb = ks.position(a), ks.position(b)
        dx, dy = pb.x - pa.x, pb.y - pa.y
        if dx == 0.0 and dy == 0.0:
            raise DegenerateSegment(
                "segment endpoints coincide; angle undefined",
                frame_index=ks.frame_index,
                segment=name,
            )
        deg = math.degrees(math.atan2(dy, dx))
        if deg <= -180.0:
            deg += 360.0
        angles.append(deg)
    return tuple(angles)


def circular_angle_diff(a: float, b: float) -> float:
    """Absolute angular difference folded to [0, 180] degrees."""
    d = abs(a - b) % 360.0
    return 360.0 - d if d > 180.0 else d


def max_pairwise_angle_spread(angles) -> float:
    """Largest circular difference among any two of the given angles."""
    angles = list(angles)
    best = 0.0
    for i in range(len(angles)):
        for j in range(i + 1, len(angles)):
            best = max(best, circular_angle_diff(angles[i], angles[j]))
    return best
