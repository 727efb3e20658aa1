"""Beat-by-beat left-ventricular wall measurement from keypoint heatmaps.

The pipeline turns per-frame 4-channel activation maps into frame, beat,
and study-level IVS/LVID/LVPW measurements, provides the label/loss
kernels used to train such models, the statistics to evaluate them, and
a synthetic phantom that gives everything a known ground truth.
"""

from .beats import BeatConfig, BeatRecord, MeasurementSeries, detect_beats, smooth_series
from .decode import DecodeConfig, FrameOutcome, FrameQuality, decode_frame, decode_video
from .geometry import (
    Calibration,
    Channel,
    Keypoint,
    KeypointSet,
    MeasurementTriple,
    Point2,
    measure,
    segment_angles,
)
from .labels import (
    JitterConfig,
    LossConfig,
    augmented_loss,
    rasterize,
    soft_centroid,
    weighted_mse,
    weighted_mse_grad,
)
from .phantom import MockModelConfig, PhantomConfig, generate_trajectory, render_heatmaps
from .stats import (
    BootstrapConfig,
    PairedSample,
    ScoredLabels,
    bias,
    bootstrap_ci,
    mae,
    precision_recall,
    r_squared,
    roc_auc,
    test_retest,
)
from .study import LvhRule, StudySummary, beat_spread, summarize

__version__ = "0.1.0"

__all__ = [
    "BeatConfig",
    "BeatRecord",
    "BootstrapConfig",
    "Calibration",
    "Channel",
    "DecodeConfig",
    "FrameOutcome",
    "FrameQuality",
    "JitterConfig",
    "Keypoint",
    "KeypointSet",
    "LossConfig",
    "LvhRule",
    "MeasurementSeries",
    "MeasurementTriple",
    "MockModelConfig",
    "PairedSample",
    "PhantomConfig",
    "Point2",
    "ScoredLabels",
    "StudySummary",
    "augmented_loss",
    "beat_spread",
    "bias",
    "bootstrap_ci",
    "decode_frame",
    "decode_video",
    "detect_beats",
    "generate_trajectory",
    "mae",
    "measure",
    "precision_recall",
    "r_squared",
    "rasterize",
    "render_heatmaps",
    "roc_auc",
    "segment_angles",
    "smooth_series",
    "soft_centroid",
    "summarize",
    "test_retest",
    "weighted_mse",
    "weighted_mse_grad",
]
