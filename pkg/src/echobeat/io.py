"""File formats: binary tensors, JSON/JSONL documents, CSV tables.

The tensor container is deliberately minimal: magic "EHT1", a dtype code
(0 = IEEE-754 float32), the rank, two pad bytes, little-endian u32 dims,
then the row-major little-endian payload. Heatmap stacks use dims
[F, 4, H, W].

All JSON documents carry schema_version and serialize with sorted keys
so identical inputs produce byte-identical files. Per-frame output is
JSONL: one meta line followed by one record per frame. CSV tables are
headered with fixed columns: id,pred,ref for paired samples and
id,score,label for classifier scores.
"""

from __future__ import annotations

import csv
import json
import struct
from importlib import resources
from pathlib import Path

import numpy as np

from .beats import BeatRecord, MeasurementSeries
from .decode import FrameOutcome
from .errors import InvalidConfig, InvalidTensorFile, LengthMismatch
from .geometry import (
    _CHANNEL_ORDER,
    Calibration,
    Channel,
    MeasurementTriple,
    Point2,
)
from .stats import PairedSample, ScoredLabels
from .study import StudySummary

SCHEMA_VERSION = 1

TENSOR_MAGIC = b"EHT1"
_DTYPE_F32 = 0
_HEADER = struct.Struct("<4sBBxx")


def write_tensor(path, arr: np.ndarray) -> None:
    """Write an array as a float32 tensor file."""
    a = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
    if a.ndim < 1 or a.ndim > 255:
        raise InvalidTensorFile("tensor rank must be in [1, 255]", ndim=a.ndim)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, _DTYPE_F32, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(a.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor file back into a float32 array (values validated finite)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidTensorFile("file too short for a tensor header", path=str(path))
    magic, dtype, ndim = _HEADER.unpack_from(raw)
    if magic != TENSOR_MAGIC:
        raise InvalidTensorFile("bad magic; not a tensor file", path=str(path))
    if dtype != _DTYPE_F32:
        raise InvalidTensorFile("unsupported dtype code", dtype=dtype)
    dims_end = _HEADER.size + 4 * ndim
    if len(raw) < dims_end:
        raise InvalidTensorFile("truncated dims", path=str(path))
    dims = struct.unpack_from(f"<{ndim}I", raw, _HEADER.size)
    expected = int(np.prod(dims, dtype=np.int64)) * 4
    payload = raw[dims_end:]
    if len(payload) != expected:
        raise InvalidTensorFile(
            "payload length does not match dims",
            dims=list(dims),
            payload_bytes=len(payload),
            expected_bytes=expected,
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(arr).all():
        raise InvalidTensorFile("tensor contains non-finite values", path=str(path))
    return arr.copy()


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def dumps_jsonl_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def load_config(path) -> dict:
    """Parse a structured config file (YAML or JSON by extension)."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise InvalidConfig("config file must hold a mapping", path=str(path))
    return doc


def load_schema(name: str) -> dict:
    """Load one of the shipped JSON schemas by stem name."""
    ref = resources.files("echobeat.schemas").joinpath(f"{name}.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


# --- per-frame JSONL ---------------------------------------------------------


def frames_meta(cal: Calibration, n_frames: int, video_id: str | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "frames_meta",
        "video_id": video_id,
        "fps": cal.fps,
        "cm_per_pixel": cal.cm_per_pixel,
        "n_frames": n_frames,
    }


def frame_record(outcome: FrameOutcome) -> dict:
    points = []
    for ch in _CHANNEL_ORDER:
        kp = outcome.keypoints.points.get(ch)
        if kp is None:
            points.append(None)
        else:
            points.append(
                {
                    "name": ch.value,
                    "x": kp.position.x,
                    "y": kp.position.y,
                    "confidence": kp.confidence,
                }
            )
    rec = {
        "schema_version": SCHEMA_VERSION,
        "kind": "frame",
        "frame_index": outcome.frame_index,
        "points": points,
        "quality": {
            "kept": outcome.quality.kept,
            "reasons": sorted(outcome.quality.reasons),
        },
    }
    if outcome.measurement is not None:
        rec["ivs_cm"] = outcome.measurement.ivs
        rec["lvid_cm"] = outcome.measurement.lvid
        rec["lvpw_cm"] = outcome.measurement.lvpw
    return rec


def write_frames_jsonl(path, outcomes, cal: Calibration, video_id: str | None = None) -> None:
    outcomes = list(outcomes)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_jsonl_line(frames_meta(cal, len(outcomes), video_id)))
        for o in outcomes:
            fh.write(dumps_jsonl_line(frame_record(o)))


def read_frames_jsonl(path) -> tuple:
    """Return (meta, records) from a per-frame JSONL file."""
    meta = None
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") == "frames_meta":
                meta = obj
            else:
                records.append(obj)
    if meta is None:
        raise InvalidConfig("missing frames_meta line", path=str(path))
    return meta, records


def series_from_frame_records(records, fps: float) -> MeasurementSeries:
    entries = []
    for rec in sorted(records, key=lambda r: r["frame_index"]):
        if rec["quality"]["kept"]:
            triple = MeasurementTriple(
                ivs=rec["ivs_cm"], lvid=rec["lvid_cm"], lvpw=rec["lvpw_cm"]
            )
        else:
            triple = None
        entries.append((rec["frame_index"], triple))
    return MeasurementSeries.from_triples(entries, fps)


# --- beats and study reports -------------------------------------------------


def _triple_obj(m: MeasurementTriple) -> dict:
    return {"ivs_cm": m.ivs, "lvid_cm": m.lvid, "lvpw_cm": m.lvpw}


def _triple_from_obj(obj) -> MeasurementTriple:
    return MeasurementTriple(ivs=obj["ivs_cm"], lvid=obj["lvid_cm"], lvpw=obj["lvpw_cm"])


def beat_obj(beat: BeatRecord) -> dict:
    return {
        "beat_index": beat.beat_index,
        "diastole_frame": beat.diastole_frame,
        "systole_frame": beat.systole_frame,
        "diastolic": _triple_obj(beat.diastolic),
        "systolic": _triple_obj(beat.systolic),
    }


def beat_from_obj(obj) -> BeatRecord:
    return BeatRecord(
        beat_index=obj["beat_index"],
        diastole_frame=obj["diastole_frame"],
        systole_frame=obj["systole_frame"],
        diastolic=_triple_from_obj(obj["diastolic"]),
        systolic=_triple_from_obj(obj["systolic"]),
    )


def beats_doc(beats, fps: float, video_id: str | None = None) -> dict:
    beats = list(beats)
    return {
        "schema_version": SCHEMA_VERSION,
        "video_id": video_id,
        "fps": fps,
        "n_beats": len(beats),
        "beats": [beat_obj(b) for b in beats],
    }


def study_report_doc(summary: StudySummary, video_id: str | None = None) -> dict:
    def stats_obj(s):
        return {"mean": s.mean, "sd": s.sd, "min": s.min, "max": s.max}

    return {
        "schema_version": SCHEMA_VERSION,
        "video_id": video_id,
        "n_beats": summary.n_beats,
        "per_beat": [beat_obj(b) for b in summary.per_beat],
        "ivsd": stats_obj(summary.ivsd),
        "lvidd": stats_obj(summary.lvidd),
        "lvpwd": stats_obj(summary.lvpwd),
        "lvids": stats_obj(summary.lvids),
        "lvh_flag": summary.lvh_flag,
        "config_echo": summary.config_echo,
    }


# --- annotations -------------------------------------------------------------


def annotation_doc(video_id: str, cal: Calibration, frames) -> dict:
    """frames: iterable of (frame_index, phase or None, Channel->Point2)."""
    out_frames = []
    for frame_index, phase, points in frames:
        out_frames.append(
            {
                "frame_index": frame_index,
                "phase": phase,
                "points": [
                    {"name": ch.value, "x": points[ch].x, "y": points[ch].y}
                    for ch in _CHANNEL_ORDER
                ],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "video_id": video_id,
        "fps": cal.fps,
        "cm_per_pixel": cal.cm_per_pixel,
        "frames": out_frames,
    }


def annotation_points(frame_obj) -> dict:
    """Channel -> Point2 mapping of one annotation frame (names must be unique)."""
    by_name = {}
    for p in frame_obj["points"]:
        if p["name"] in by_name:
            raise InvalidConfig("duplicate point name in frame", name=p["name"])
        by_name[p["name"]] = Point2(float(p["x"]), float(p["y"]))
    points = {}
    for ch in _CHANNEL_ORDER:
        if ch.value not in by_name:
            raise InvalidConfig("annotation frame missing point", name=ch.value)
        points[ch] = by_name[ch.value]
    return points


# --- CSV tables --------------------------------------------------------------


def _read_csv_rows(path) -> tuple:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InvalidConfig("CSV file has no header", path=str(path))
        fields = [f.strip() for f in reader.fieldnames]
        rows = list(reader)
    return fields, rows


def _column(path, wanted: str):
    fields, rows = _read_csv_rows(path)
    if "id" not in fields or wanted not in fields:
        raise InvalidConfig(
            f"CSV must carry columns id,{wanted}", path=str(path), columns=fields
        )
    return {row["id"]: float(row[wanted]) for row in rows}


def read_paired_csv(pred_path, ref_path) -> PairedSample:
    """Join prediction and reference CSVs on id.

    The canonical layout is a single file with header id,pred,ref passed
    as both paths; two files each holding id plus its own column work
    equally. Ids present on only one side raise LengthMismatch.
    """
    preds = _column(pred_path, "pred")
    refs = _column(ref_path, "ref")
    if set(preds) != set(refs):
        raise LengthMismatch(
            "prediction and reference ids do not match",
            only_pred=sorted(set(preds) - set(refs))[:5],
            only_ref=sorted(set(refs) - set(preds))[:5],
        )
    ids = tuple(sorted(preds))
    return PairedSample(
        ids=ids,
        pred=np.array([preds[i] for i in ids]),
        ref=np.array([refs[i] for i in ids]),
    )


def read_scored_csv(path) -> ScoredLabels:
    fields, rows = _read_csv_rows(path)
    for col in ("id", "score", "label"):
        if col not in fields:
            raise InvalidConfig(
                "CSV must carry columns id,score,label", path=str(path), columns=fields
            )
    scores = np.array([float(r["score"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows])
    return ScoredLabels(scores=scores, labels=labels)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
