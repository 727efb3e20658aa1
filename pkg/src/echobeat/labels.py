"""Training-label rasterization and the weighted-MSE loss kernels.

Labels are 4-channel one-hot images: per channel, the single pixel
nearest the (optionally jittered) annotation point is 1 and everything
else is 0. The loss is a per-pixel mean squared error that weighs the
background (y=0) and foreground (y=1) residuals separately:

    loss = (1/n) * sum_i [ alpha*(1-y_i)*(y_i-p_i)^2 + (1-alpha)*y_i*(y_i-p_i)^2 ]

with n the total pixel count over all channels. An optional augmentation
adds, with one shared weight, the squared distance of each channel's
soft centroid from the true point plus the squared error of the three
derived segment lengths.

All kernels compute in float64 regardless of input dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyChannel, InvalidConfig, InvalidExtent, ShapeMismatch
from .geometry import (
    _CHANNEL_ORDER,
    Calibration,
    Channel,
    KeypointSet,
    Point2,
    measure,
)


@dataclass(frozen=True)
class JitterConfig:
    """Isotropic Gaussian positional noise applied before rasterization.

    sigma is in pixels; 0 disables jitter. Draws are deterministic in
    (sigma, seed).
    """

    sigma: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidConfig("jitter sigma must be finite and >= 0", sigma=self.sigma)


@dataclass(frozen=True)
class LossConfig:
    """Weights of the loss: background/foreground balance and augmentation."""

    alpha: float = 0.001
    lambda_aux: float = 0.001

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidConfig("alpha must lie in [0, 1]", alpha=self.alpha)
        if not (math.isfinite(self.lambda_aux) and self.lambda_aux >= 0):
            raise InvalidConfig("lambda_aux must be >= 0", lambda_aux=self.lambda_aux)


def _round_half_away(v: np.ndarray) -> np.ndarray:
    # np.round ties to even; labels need deterministic half-away-from-zero.
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def nearest_pixel(p: Point2, height: int, width: int) -> tuple:
    """(ix, iy) of the pixel center nearest p, clamped into the image."""
    ix = int(_round_half_away(np.float64(p.x)))
    iy = int(_round_half_away(np.float64(p.y)))
    return (min(max(ix, 0), width - 1), min(max(iy, 0), height - 1))


def _check_extent(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise InvalidExtent("image extent must be positive", height=height, width=width)


def rasterize(points: dict, height: int, width: int, jitter: JitterConfig) -> np.ndarray:
    """Rasterize the four named points into a (4, H, W) one-hot label image.

    ``points`` maps every Channel to a Point2. Each point is displaced by
    independent N(0, sigma^2) noise per axis (seeded), then the nearest
    pixel center (ties rounded half away from zero, per axis) in that
    channel is set to 1. Jittered points falling outside the image clamp
    to the border pixel, so every channel always carries exactly one 1.
    """
    _check_extent(height, width)
    missing = [ch.value for ch in _CHANNEL_ORDER if ch not in points]
    if missing:
        raise InvalidConfig("rasterize requires all four channels", missing=missing)

    rng = np.random.default_rng(jitter.seed)
    noise = rng.standard_normal((4, 2)) * jitter.sigma

    label = np.zeros((4, height, width), dtype=np.float32)
    for k, ch in enumerate(_CHANNEL_ORDER):
        p = points[ch]
        jittered = Point2(p.x + noise[k, 0], p.y + noise[k, 1])
        ix, iy = nearest_pixel(jittered, height, width)
        label[k, iy, ix] = 1.0
    return label


def _as_pair(pred, label) -> tuple:
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatch(
            "prediction and label shapes differ",
            pred_shape=list(p.shape),
            label_shape=list(y.shape),
        )
    return p, y


def weighted_mse(pred, label, alpha: float) -> float:
    """Background/foreground-weighted mean squared error over all pixels.

    Background pixels (y=0) contribute alpha*(y-p)^2, foreground pixels
    (y=1) contribute (1-alpha)*(y-p)^2; the sum is divided by the total
    pixel count n. Zero exactly when pred equals label (for 0<alpha<1).
    """
    p, y = _as_pair(pred, label)
    sq = (y - p) ** 2
    total = alpha * ((1.0 - y) * sq).sum() + (1.0 - alpha) * (y * sq).sum()
    return float(total / y.size)


def weighted_mse_grad(pred, label, alpha: float) -> np.ndarray:
    """Analytic gradient of weighted_mse with respect to each prediction pixel.

    d/dp_i = (2/n) * [alpha*(1-y_i) + (1-alpha)*y_i] * (p_i - y_i)
    """
    p, y = _as_pair(pred, label)
    w = alpha * (1.0 - y) + (1.0 - alpha) * y
    return (2.0 / y.size) * w * (p - y)


def soft_centroid(channel: np.ndarray) -> Point2:
    """Activation-weighted mean pixel position of one channel.

    Activations are clamped at zero and normalized to sum 1. Raises
    EmptyChannel when nothing remains after the clamp.
    """
    c = np.asarray(channel, dtype=np.float64)
    if c.ndim != 2:
        raise ShapeMismatch("soft_centroid expects a 2D channel", shape=list(c.shape))
    w = np.clip(c, 0.0, None)
    s = w.sum()
    if s <= 0.0:
        raise EmptyChannel("channel has no positive activation; centroid undefined")
    h, wd = c.shape
    x = float((w.sum(axis=0) @ np.arange(wd)) / s)
    y = float((w.sum(axis=1) @ np.arange(h)) / s)
    return Point2(x, y)


def augmented_loss(
    pred,
    label,
    true_points: dict,
    cal: Calibration,
    cfg: LossConfig,
) -> float:
    """weighted_mse plus the point-location and measurement L2 penalties.

    The augmentation is lambda_aux * (location + measurement) where
    location sums, over channels, the squared pixel distance between the
    prediction's soft centroid and the true point, and measurement sums
    the squared differences of the three segment lengths computed (via
    the calibration) from those soft centroids versus the true points.
    """
    p, y = _as_pair(pred, label)
    if p.shape[0] != 4 or p.ndim != 3:
        raise ShapeMismatch("augmented_loss expects (4, H, W) arrays", shape=list(p.shape))
    base = weighted_mse(p, y, cfg.alpha)
    if cfg.lambda_aux == 0.0:
        return base

    centroids = {ch: soft_centroid(p[ch.index]) for ch in _CHANNEL_ORDER}
    location = sum(
        (centroids[ch].x - true_points[ch].x) ** 2
        + (centroids[ch].y - true_points[ch].y) ** 2
        for ch in _CHANNEL_ORDER
    )
    pred_m = measure(KeypointSet.from_positions(0, centroids), cal)
    true_m = measure(KeypointSet.from_positions(0, dict(true_points)), cal)
    measurement = sum(
        (pm - tm) ** 2 for pm, tm in zip(pred_m.as_tuple(), true_m.as_tuple())
    )
    return base + cfg.lambda_aux * (location + measurement)


def finite_difference_grad(pred, label, alpha: float, h: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of weighted_mse (verification oracle).

    Perturbs every pixel by +-h and differences the scalar loss. Kept
    independent of weighted_mse_grad so the two can cross-check.
    """
    p, y = _as_pair(pred, label)
    g = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = p[idx]
        p[idx] = orig + h
        up = weighted_mse(p, y, alpha)
        p[idx] = orig - h
        dn = weighted_mse(p, y, alpha)
        p[idx] = orig
        g[idx] = (up - dn) / (2.0 * h)
    return g


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """Elementwise |a-b| / max(|a|, |b|, floor), reduced with max."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
