"""Parametric 2-D transforms and differentiable bilinear resampling.

Coordinates are normalized to [-1, 1] on both axes so transform parameters
are independent of raster resolution: the corner pixel centers of an H x W
raster sit exactly at (+-1, +-1) and the pixel pitch is 2/(W-1) horizontally
and 2/(H-1) vertically.

Warping is backward: each output pixel's normalized coordinate is mapped
through the transform to a source location, which is sampled bilinearly.
Source locations outside the raster contribute zero, so off-canvas content
vanishes instead of smearing.

Three transform families are supported:

* ``AffineWarp``      2x3 matrix.
* ``HomographyWarp``  3x3 projective matrix, stored with its last entry
                      normalized to 1 (the map is scale-invariant).
* ``TpsWarp``         thin plate spline: affine part plus radial kernel
                      U(r) = r^2 log(r^2) anchored at K control points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .imagecore import Image, MaskMap

__all__ = [
    "AffineWarp",
    "HomographyWarp",
    "TpsWarp",
    "WarpParams",
    "SingularTransformError",
    "identity_affine",
    "translation_affine",
    "fit_tps",
    "map_points",
    "warp_image",
    "warp_to_dict",
    "warp_from_dict",
]

_TPS_MOMENT_TOL = 1e-8


class SingularTransformError(ValueError):
    """Raised when a transform or fitting system is singular."""


def _readonly(arr, shape, name) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AffineWarp:
    """Affine map: (x, y) -> M[:, :2] @ (x, y) + M[:, 2]."""

    matrix: np.ndarray  # (2, 3)

    def __post_init__(self):
        object.__setattr__(
            self, "matrix", _readonly(self.matrix, (2, 3), "affine matrix")
        )


@dataclass(frozen=True)
class HomographyWarp:
    """Projective map with the matrix normalized so H[2, 2] = 1."""

    matrix: np.ndarray  # (3, 3)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography contains non-finite values")
        if m[2, 2] == 0.0:
            raise SingularTransformError(
                "homography cannot be normalized: last entry is zero"
            )
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < 1e-12:
            raise SingularTransformError("homography matrix is singular")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class TpsWarp:
    """Thin plate spline map.

    The displacement surface is A^T [1, x, y] plus a radial sum
    sum_k weights[k] * U(|p - src[k]|). The kernel weights must satisfy the
    moment conditions [1 | src]^T weights = 0, which fit_tps enforces by
    construction.
    """

    src: np.ndarray      # (K, 2) control points
    affine: np.ndarray   # (3, 2) rows: constant, x, y
    weights: np.ndarray  # (K, 2)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.float64)
        if src.ndim != 2 or src.shape[1] != 2 or src.shape[0] < 3:
            raise ValueError(
                f"control points must have shape (K>=3, 2), got {src.shape}"
            )
        k = src.shape[0]
        object.__setattr__(self, "src", _readonly(src, (k, 2), "control points"))
        object.__setattr__(
            self, "affine", _readonly(self.affine, (3, 2), "affine block")
        )
        object.__setattr__(
            self, "weights", _readonly(self.weights, (k, 2), "kernel weights")
        )
        p = np.hstack([np.ones((k, 1)), self.src])
        moment = p.T @ self.weights
        if np.abs(moment).max() > _TPS_MOMENT_TOL:
            raise ValueError(
                "kernel weights violate the moment conditions "
                f"(max residual {np.abs(moment).max():.3g})"
            )


WarpParams = Union[AffineWarp, HomographyWarp, TpsWarp]


def identity_affine() -> AffineWarp:
    return AffineWarp(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def translation_affine(tx: float, ty: float) -> AffineWarp:
    """Affine warp that samples the source at (x + tx, y + ty).

    Backward convention: positive tx moves image content left.
    """
    return AffineWarp(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))


def _tps_kernel(d2: np.ndarray) -> np.ndarray:
    """U(r) = r^2 log(r^2) expressed in squared distances, with U(0) = 0."""
    out = np.zeros_like(d2)
    nz = d2 > 0.0
    out[nz] = d2[nz] * np.log(d2[nz])
    return out


def fit_tps(src, dst, reg: float = 0.0) -> TpsWarp:
    """Fit a thin plate spline sending each src point to its dst point.

    With reg = 0 the fitted map interpolates the control points exactly;
    reg > 0 adds reg * I to the kernel block, trading exactness for
    smoothness. Affine-consistent point pairs yield zero kernel weights.

    Raises SingularTransformError for collinear or duplicate source points
    when the system cannot be solved.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape[0] < 3:
        raise ValueError(f"src must have shape (K>=3, 2), got {src.shape}")
    if dst.shape != src.shape:
        raise ValueError(
            f"dst shape {dst.shape} does not match src shape {src.shape}"
        )
    if reg < 0.0:
        raise ValueError(f"regularization must be nonnegative, got {reg}")
    k = src.shape[0]

    diff = src[:, None, :] - src[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    kernel = _tps_kernel(d2) + reg * np.eye(k)
    p = np.hstack([np.ones((k, 1)), src])
    system = np.zeros((k + 3, k + 3))
    system[:k, :k] = kernel
    system[:k, k:] = p
    system[k:, :k] = p.T
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = dst

    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularTransformError(
            "singular thin plate spline system "
            "(collinear or duplicate source points)"
        )
    solution = np.linalg.solve(system, rhs)
    weights = solution[:k]
    affine = solution[k:]
    # Clean up rounding in the moment conditions so construction validates.
    weights = weights - p @ np.linalg.lstsq(p, weights, rcond=None)[0]
    return TpsWarp(src=src, affine=affine, weights=weights)


def map_points(params: WarpParams, pts: np.ndarray) -> np.ndarray:
    """Map (N, 2) normalized coordinates through a transform.

    Homography points on the line at infinity come back non-finite; the
    sampler treats them as out-of-bounds.
    """
    pts = np.asarray(pts, dtype=np.float64)
    if isinstance(params, AffineWarp):
        m = params.matrix
        return pts @ m[:, :2].T + m[:, 2]
    if isinstance(params, HomographyWarp):
        m = params.matrix
        homo = np.hstack([pts, np.ones((pts.shape[0], 1))]) @ m.T
        with np.errstate(divide="ignore", invalid="ignore"):
            return homo[:, :2] / homo[:, 2:3]
    if isinstance(params, TpsWarp):
        diff = pts[:, None, :] - params.src[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        radial = _tps_kernel(d2) @ params.weights
        poly = np.hstack([np.ones((pts.shape[0], 1)), pts]) @ params.affine
        return poly + radial
    raise TypeError(f"unsupported warp parameter type {type(params)!r}")


def _axis_coords(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return 2.0 * np.arange(n) / (n - 1) - 1.0


def _bilinear_sample(arr: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) at normalized coords, zero outside the raster."""
    h, w = arr.shape[:2]
    finite = np.isfinite(sx) & np.isfinite(sy)
    sx = np.where(finite, sx, -3.0)
    sy = np.where(finite, sy, -3.0)
    # Guard against overflow in the int conversion for extreme coordinates.
    px = np.clip((sx + 1.0) * 0.5 * (w - 1), -2.0, w + 1.0)
    py = np.clip((sy + 1.0) * 0.5 * (h - 1), -2.0, h + 1.0)
    # Snap sub-nanopixel offsets so integer-pitch maps degenerate to copies.
    px = np.where(np.abs(px - np.rint(px)) < 1e-9, np.rint(px), px)
    py = np.where(np.abs(py - np.rint(py)) < 1e-9, np.rint(py), py)

    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0

    out = np.zeros(px.shape + (arr.shape[2],))
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        yy = y0 + dy
        iny = (yy >= 0) & (yy < h)
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xx = x0 + dx
            inb = iny & (xx >= 0) & (xx < w)
            vals = arr[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            out += (wy * wx * inb)[:, None] * vals
    return out


def warp_image(raster, params: WarpParams, out_size=None):
    """Backward-warp an Image or MaskMap through a transform.

    Each output pixel's normalized coordinate is mapped through ``params``
    to a source location and sampled bilinearly; samples outside the source
    are zero. ``out_size`` is an int (square), an (H, W) pair, or None to
    keep the input size. Returns the same kind of raster as the input.
    """
    if isinstance(raster, MaskMap):
        arr = raster.data[:, :, None]
        is_mask = True
    elif isinstance(raster, Image):
        arr = raster.data
        is_mask = False
    else:
        raise TypeError(f"expected Image or MaskMap, got {type(raster)!r}")

    if out_size is None:
        out_h, out_w = arr.shape[:2]
    elif isinstance(out_size, (int, np.integer)):
        out_h = out_w = int(out_size)
    else:
        out_h, out_w = out_size
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {(out_h, out_w)}")

    gx, gy = np.meshgrid(_axis_coords(out_w), _axis_coords(out_h))
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    source = map_points(params, grid)
    sampled = _bilinear_sample(arr, source[:, 0], source[:, 1])
    sampled = np.clip(sampled.reshape(out_h, out_w, arr.shape[2]), 0.0, 1.0)
    if is_mask:
        return MaskMap(sampled[:, :, 0])
    return Image(sampled)


def warp_to_dict(params: WarpParams) -> dict:
    """Serialize warp parameters to their JSON form."""
    if isinstance(params, AffineWarp):
        return {"type": "affine", "m": [float(v) for v in params.matrix.ravel()]}
    if isinstance(params, HomographyWarp):
        return {
            "type": "homography",
            "m": [float(v) for v in params.matrix.ravel()],
        }
    if isinstance(params, TpsWarp):
        return {
            "type": "tps",
            "src": [[float(x), float(y)] for x, y in params.src],
            "affine": [float(v) for v in params.affine.ravel()],
            "weights": [[float(x), float(y)] for x, y in params.weights],
        }
    raise TypeError(f"unsupported warp parameter type {type(params)!r}")


def warp_from_dict(doc: dict) -> WarpParams:
    """Parse the JSON form produced by warp_to_dict."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("warp document must be an object with a 'type' field")
    kind = doc["type"]
    if kind == "affine":
        m = np.asarray(doc["m"], dtype=np.float64)
        if m.shape != (6,):
            raise ValueError(f"affine 'm' must hold 6 floats, got {m.shape}")
        return AffineWarp(m.reshape(2, 3))
    if kind == "homography":
        m = np.asarray(doc["m"], dtype=np.float64)
        if m.shape != (9,):
            raise ValueError(f"homography 'm' must hold 9 floats, got {m.shape}")
        return HomographyWarp(m.reshape(3, 3))
    if kind == "tps":
        src = np.asarray(doc["src"], dtype=np.float64)
        affine = np.asarray(doc["affine"], dtype=np.float64)
        if affine.shape != (6,):
            raise ValueError(
                f"tps 'affine' must hold 6 floats, got {affine.shape}"
            )
        weights = np.asarray(doc["weights"], dtype=np.float64)
        return TpsWarp(src=src, affine=affine.reshape(3, 2), weights=weights)
    raise ValueError(f"unknown warp type {kind!r}")
