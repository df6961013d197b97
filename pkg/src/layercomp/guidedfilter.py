"""Edge-aware guided filtering.

The filter output is a local linear function of a guide image: within every
(2r+1)^2 window centered at pixel k, coefficients

    a_k = cov(I, p) / (var(I) + eps)
    b_k = mean(p) - a_k * mean(I)

are fit by ridge regression of the input p against the guide I, then each
output pixel averages the coefficients of every window that contains it:

    q_i = mean_k(a) * I_i + mean_k(b)

Large eps shrinks a toward 0 and the output toward a box-smoothed mean of
the input; small eps preserves the guide's edges and texture.

Windows are clipped at the raster border and normalized by the true
in-bounds pixel count (no padding). Window statistics use integral images,
with var clamped at 0 to absorb floating-point cancellation. A window with
var = 0 and eps = 0 degenerates to a = 0, b = mean(p); no division by zero
occurs. Color rasters are filtered channel by channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import Image

__all__ = [
    "FilterConfig",
    "WindowStats",
    "box_mean",
    "window_counts",
    "window_stats",
    "guided_filter",
    "guided_filter_raw",
]


@dataclass(frozen=True)
class FilterConfig:
    """Guided filter parameters: window radius and regularization."""

    radius: int = 16
    eps: float = 1e-7

    def __post_init__(self):
        if not isinstance(self.radius, (int, np.integer)) or self.radius < 1:
            raise ValueError(f"radius must be an integer >= 1, got {self.radius}")
        if not (self.eps >= 0.0):
            raise ValueError(f"eps must be nonnegative, got {self.eps}")


@dataclass(frozen=True)
class WindowStats:
    """Per-pixel window statistics and regression coefficients."""

    mean_guide: np.ndarray
    mean_input: np.ndarray
    var_guide: np.ndarray
    cov_guide_input: np.ndarray
    a: np.ndarray
    b: np.ndarray
    window_count: np.ndarray


def _window_sums(arr: np.ndarray, radius: int) -> np.ndarray:
    """Sum over each clipped (2r+1)^2 window via an integral image."""
    h, w = arr.shape
    integral = np.zeros((h + 1, w + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    i = np.arange(h)
    j = np.arange(w)
    y1 = np.maximum(i - radius, 0)
    y2 = np.minimum(i + radius, h - 1) + 1
    x1 = np.maximum(j - radius, 0)
    x2 = np.minimum(j + radius, w - 1) + 1
    return (
        integral[y2[:, None], x2[None, :]]
        - integral[y1[:, None], x2[None, :]]
        - integral[y2[:, None], x1[None, :]]
        + integral[y1[:, None], x1[None, :]]
    )


def window_counts(shape: tuple, radius: int) -> np.ndarray:
    """In-bounds pixel count of each clipped window (exact integers)."""
    h, w = shape
    i = np.arange(h)
    j = np.arange(w)
    ny = np.minimum(i + radius, h - 1) - np.maximum(i - radius, 0) + 1
    nx = np.minimum(j + radius, w - 1) - np.maximum(j - radius, 0) + 1
    return ny[:, None] * nx[None, :]


def box_mean(arr: np.ndarray, radius: int) -> np.ndarray:
    """Mean over each (2r+1)^2 window clipped to the raster bounds."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"box_mean expects a 2-D raster, got shape {arr.shape}")
    if not isinstance(radius, (int, np.integer)) or radius < 1:
        raise ValueError(f"radius must be an integer >= 1, got {radius}")
    return _window_sums(arr, radius) / window_counts(arr.shape, radius)


def window_stats(guide: np.ndarray, inp: np.ndarray, cfg: FilterConfig) -> WindowStats:
    """Window means, variance, covariance, and ridge coefficients.

    Operates on single-channel float arrays of equal shape.
    """
    guide = np.asarray(guide, dtype=np.float64)
    inp = np.asarray(inp, dtype=np.float64)
    if guide.shape != inp.shape or guide.ndim != 2:
        raise ValueError(
            f"guide and input must be equal-shape 2-D rasters, "
            f"got {guide.shape} and {inp.shape}"
        )
    r = cfg.radius
    counts = window_counts(guide.shape, r)
    mean_i = _window_sums(guide, r) / counts
    mean_p = _window_sums(inp, r) / counts
    corr_ii = _window_sums(guide * guide, r) / counts
    corr_ip = _window_sums(guide * inp, r) / counts
    var_i = np.maximum(corr_ii - mean_i * mean_i, 0.0)
    cov_ip = corr_ip - mean_i * mean_p
    denom = var_i + cfg.eps
    a = np.where(denom > 0.0, cov_ip / np.where(denom > 0.0, denom, 1.0), 0.0)
    b = mean_p - a * mean_i
    return WindowStats(
        mean_guide=mean_i,
        mean_input=mean_p,
        var_guide=var_i,
        cov_guide_input=cov_ip,
        a=a,
        b=b,
        window_count=counts,
    )


def _filter_channel(guide: np.ndarray, inp: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    stats = window_stats(guide, inp, cfg)
    return box_mean(stats.a, cfg.radius) * guide + box_mean(stats.b, cfg.radius)


def guided_filter_raw(guide: Image, inp: Image, cfg: FilterConfig = FilterConfig()) -> np.ndarray:
    """Filter without the final value clamp; returns an (H, W, C) array.

    Useful for measuring properties of the linear-model output itself,
    e.g. how its variance responds to eps.
    """
    if guide.data.shape != inp.data.shape:
        raise ValueError(
            f"guide shape {guide.data.shape} does not match "
            f"input shape {inp.data.shape}"
        )
    out = np.empty_like(inp.data)
    for c in range(guide.channels):
        out[:, :, c] = _filter_channel(guide.data[:, :, c], inp.data[:, :, c], cfg)
    return out


def guided_filter(guide: Image, inp: Image, cfg: FilterConfig = FilterConfig()) -> Image:
    """Transfer the input's appearance onto the guide's detail structure.

    The guide supplies edges and texture, the input supplies the values
    being smoothed onto them. Output values are clamped to [0, 1].
    """
    return Image(np.clip(guided_filter_raw(guide, inp, cfg), 0.0, 1.0))
