"""Study-level aggregation of per-beat measurements.

A study value is the center (mean by default, median by option) of the
per-beat diastolic measurements, plus the systolic LVID; an optional
threshold rule turns the diastolic wall means into a hypertrophy flag.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from .errors import EmptyBeats, InsufficientBeats, InvalidConfig

_MEASURES = (
    ("ivsd", lambda b: b.diastolic.ivs),
    ("lvidd", lambda b: b.diastolic.lvid),
    ("lvpwd", lambda b: b.diastolic.lvpw),
    ("lvids", lambda b: b.systolic.lvid),
)

ANY = "ANY"
ALL = "ALL"


@dataclass(frozen=True)
class LvhRule:
    """Explicit wall-thickness thresholds; no clinical default is shipped."""

    ivs_threshold_cm: float
    lvpw_threshold_cm: float
    combinator: str = ANY

    def __post_init__(self):
        if self.ivs_threshold_cm <= 0 or self.lvpw_threshold_cm <= 0:
            raise InvalidConfig("LVH thresholds must be positive")
        if self.combinator not in (ANY, ALL):
            raise InvalidConfig(
                "combinator must be ANY or ALL", combinator=self.combinator
            )

    def evaluate(self, ivsd_center: float, lvpwd_center: float) -> bool:
        hits = (ivsd_center >= self.ivs_threshold_cm,
                lvpwd_center >= self.lvpw_threshold_cm)
        return any(hits) if self.combinator == ANY else all(hits)


@dataclass(frozen=True)
class MeasureStats:
    """Center/spread of one measurement over beats; sd is None for n=1."""

    mean: float
    sd: float | None
    min: float
    max: float


@dataclass(frozen=True)
class StudySummary:
    n_beats: int
    per_beat: tuple
    ivsd: MeasureStats
    lvidd: MeasureStats
    lvpwd: MeasureStats
    lvids: MeasureStats
    lvh_flag: bool | None
    config_echo: dict


def _stats(values, center: str) -> MeasureStats:
    if center == "median":
        mid = statistics.median(values)
    else:
        mid = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else None
    return MeasureStats(mean=mid, sd=sd, min=min(values), max=max(values))


def summarize(beats, rule: LvhRule | None = None, center: str = "mean",
              config_echo: dict | None = None) -> StudySummary:
    """Aggregate BeatRecords into a StudySummary.

    The headline value of each measurement is the mean over beats
    (median when center="median"); sd is the sample standard deviation
    and is omitted for a single beat. lvh_flag is present exactly when a
    rule is supplied.
    """
    beats = list(beats)
    if not beats:
        raise EmptyBeats("cannot summarize an empty beat list")
    if center not in ("mean", "median"):
        raise InvalidConfig("center must be 'mean' or 'median'", center=center)

    per_measure = {
        name: _stats([get(b) for b in beats], center) for name, get in _MEASURES
    }
    flag = None
    if rule is not None:
        flag = rule.evaluate(per_measure["ivsd"].mean, per_measure["lvpwd"].mean)
    echo = dict(config_echo or {})
    echo.setdefault("center", center)
    if rule is not None:
        echo.setdefault(
            "lvh_rule",
            {
                "ivs_threshold_cm": rule.ivs_threshold_cm,
                "lvpw_threshold_cm": rule.lvpw_threshold_cm,
                "combinator": rule.combinator,
            },
        )
    return StudySummary(
        n_beats=len(beats),
        per_beat=tuple(beats),
        ivsd=per_measure["ivsd"],
        lvidd=per_measure["lvidd"],
        lvpwd=per_measure["lvpwd"],
        lvids=per_measure["lvids"],
        lvh_flag=flag,
        config_echo=echo,
    )


def beat_spread(beats) -> dict:
    """Range and sample sd of each measurement over beats (needs >= 2)."""
    beats = list(beats)
    if len(beats) < 2:
        raise InsufficientBeats(
            "beat spread needs at least two beats", n_beats=len(beats)
        )
    out = {}
    for name, get in _MEASURES:
        vals = [get(b) for b in beats]
        out[name] = {
            "range": max(vals) - min(vals),
            "sd": statistics.stdev(vals),
        }
    return out
