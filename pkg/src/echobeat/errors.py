"""Exception hierarchy shared by all echobeat modules.

Every error carries a short machine-readable ``code`` and an optional
``context`` dict; the CLI serializes these as the error JSON it prints
on stderr.
"""

from __future__ import annotations


class EchobeatError(Exception):
    """Base class for all echobeat data errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_json_obj(self) -> dict:
        return {"code": self.code, "message": self.message, "context": self.context}


class MissingKeypoint(EchobeatError):
    """A frame lacks one of the four named keypoints and cannot be measured."""

    code = "missing_keypoint"


class DegenerateSegment(EchobeatError):
    """A measurement segment has zero length; its angle is undefined."""

    code = "degenerate_segment"


class ShapeMismatch(EchobeatError):
    """Array arguments disagree in shape, or a stack is not 4-channel."""

    code = "shape_mismatch"


class EmptyChannel(EchobeatError):
    """A heatmap channel has no usable activation (soft centroid undefined)."""

    code = "empty_channel"


class AllGaps(EchobeatError):
    """A measurement series contains no kept frames."""

    code = "all_gaps"


class NoBeatsDetected(EchobeatError):
    """No complete cardiac cycle could be extracted from the series."""

    code = "no_beats_detected"


class EmptyBeats(EchobeatError):
    """A study summary was requested for an empty beat list."""

    code = "empty_beats"


class InsufficientBeats(EchobeatError):
    """Fewer beats than the operation requires (spread needs at least two)."""

    code = "insufficient_beats"


class LengthMismatch(EchobeatError):
    """Paired vectors have different lengths or too few entries."""

    code = "length_mismatch"


class DegenerateVariance(EchobeatError):
    """A correlation-style statistic is undefined because a side is constant."""

    code = "degenerate_variance"


class SingleClass(EchobeatError):
    """Classifier scores contain only one label class."""

    code = "single_class"


class InvalidConfig(EchobeatError):
    """A configuration value violates its documented invariant."""

    code = "invalid_config"


class InvalidExtent(EchobeatError):
    """An image extent is empty or otherwise unusable."""

    code = "invalid_extent"


class InvalidTensorFile(EchobeatError):
    """A tensor file is corrupt or not in the supported format."""

    code = "invalid_tensor_file"


class BootstrapDegenerate(EchobeatError):
    """Too many bootstrap resamples were degenerate for the statistic."""

    code = "bootstrap_degenerate"
