"""Occlusion-order hierarchy compositing.

With M foreground layers there are M! ways to stack them. Each stacking is
an occlusion order: a permutation of layer indices, highest priority first.
A composite is formed for every order and the final image is their weighted
sum under a simplex weight vector, blended over the background where no
layer covers.

Masks are soft: occlusion uses products for intersection and 1 - m for
complement, which reduces exactly to boolean set algebra on {0, 1} masks
and stays differentiable in between. For a priority sequence (p1, ..., pM)
the visible part of layer pj is

    visible(pj) = m[pj] * prod_{k < j} (1 - m[pk])

and the per-order composite is sum_j fg[pj] * visible(pj). Per pixel, the
visible masks plus the background coverage prod_j (1 - m[j]) always sum
to 1, so compositing preserves the [0, 1] value range.

Orders are enumerated lexicographically, and that enumeration fixes the
indexing of weight vectors everywhere in this package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imagecore import Image, MaskMap

__all__ = [
    "MAX_FOREGROUNDS",
    "OcclusionOrder",
    "HierarchyWeights",
    "Composite",
    "TooManyForegroundsError",
    "InvalidWeightsError",
    "enumerate_orders",
    "order_index",
    "visible_masks",
    "order_composites",
    "background_coverage",
    "compose_hierarchy",
    "softmax_weights",
]

MAX_FOREGROUNDS = 6

OcclusionOrder = tuple  # permutation of range(M), highest priority first


class TooManyForegroundsError(ValueError):
    """Raised when M! orderings would exceed the configured cap."""


class InvalidWeightsError(ValueError):
    """Raised when hierarchy weights leave the probability simplex."""


@dataclass(frozen=True)
class HierarchyWeights:
    """Simplex vector of length M!, indexed by lexicographic order.

    Weights must be nonnegative and sum to 1 within 1e-6.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise InvalidWeightsError(
                f"weights must be a vector, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise InvalidWeightsError("weights contain non-finite values")
        if _order_count_from_length(len(w)) is None:
            raise InvalidWeightsError(
                f"weight count {len(w)} is not a factorial M! for any M >= 1"
            )
        if w.min() < 0.0:
            raise InvalidWeightsError(
                f"weights must be nonnegative, got minimum {w.min():.3g}"
            )
        if abs(w.sum() - 1.0) > 1e-6:
            raise InvalidWeightsError(
                f"weights must sum to 1 within 1e-6, got {w.sum():.8f}"
            )
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def num_foregrounds(self) -> int:
        return _order_count_from_length(len(self.weights))


@dataclass(frozen=True)
class Composite:
    """A composed image together with the union of warped layer masks."""

    image: Image
    combined_mask: MaskMap


def _order_count_from_length(n: int):
    """Return M with M! == n, or None."""
    m, fact = 1, 1
    while fact < n:
        m += 1
        fact *= m
    return m if fact == n else None


def enumerate_orders(m: int, cap: int = MAX_FOREGROUNDS) -> list[OcclusionOrder]:
    """All M! occlusion orders in lexicographic sequence."""
    if m < 1:
        raise ValueError(f"foreground count must be >= 1, got {m}")
    if m > cap:
        raise TooManyForegroundsError(
            f"{m} foregrounds give {math.factorial(m)} orderings, "
            f"exceeding the cap of {cap} foregrounds "
            f"({math.factorial(cap)} orderings)"
        )
    return list(itertools.permutations(range(m)))


def order_index(order: Sequence[int]) -> int:
    """Lexicographic index of a permutation (the Lehmer code)."""
    order = tuple(order)
    m = len(order)
    if sorted(order) != list(range(m)):
        raise ValueError(f"{order} is not a permutation of range({m})")
    index = 0
    for i, p in enumerate(order):
        smaller = sum(1 for q in order[i + 1 :] if q < p)
        index += smaller * math.factorial(m - 1 - i)
    return index


def _mask_stack(masks: Sequence[MaskMap]) -> np.ndarray:
    if len(masks) == 0:
        raise ValueError("at least one mask is required")
    shape = masks[0].data.shape
    for i, m in enumerate(masks):
        if m.data.shape != shape:
            raise ValueError(
                f"mask {i} has shape {m.data.shape}, expected {shape}"
            )
    return np.stack([m.data for m in masks])


def _visible_stack(mask_stack: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Visible masks for one order, aligned with foreground index."""
    visible = np.empty_like(mask_stack)
    free = np.ones_like(mask_stack[0])
    for p in order:
        visible[p] = mask_stack[p] * free
        free = free * (1.0 - mask_stack[p])
    return visible


def visible_masks(
    masks: Sequence[MaskMap], order: Sequence[int]
) -> list[MaskMap]:
    """Per-layer visibility under one occlusion order.

    The result is aligned with the input list: element i is the part of
    masks[i] not covered by any higher-priority layer.
    """
    stack = _mask_stack(masks)
    m = len(masks)
    if sorted(order) != list(range(m)):
        raise ValueError(f"order {tuple(order)} is not a permutation of range({m})")
    vis = _visible_stack(stack, order)
    return [MaskMap(vis[i]) for i in range(m)]


def _fg_stack(fgs: Sequence[Image]) -> np.ndarray:
    shape = fgs[0].data.shape
    for i, f in enumerate(fgs):
        if f.data.shape != shape:
            raise ValueError(
                f"foreground {i} has shape {f.data.shape}, expected {shape}"
            )
    return np.stack([f.data for f in fgs])


def order_composites(
    fgs: Sequence[Image], masks: Sequence[MaskMap], cap: int = MAX_FOREGROUNDS
) -> np.ndarray:
    """Foreground-only composite for every order, shape (M!, H, W, C).

    Background is excluded; compose_hierarchy adds it separately. Memory
    grows factorially with M, so this is intended for small M.
    """
    fg = _fg_stack(fgs)
    mask = _mask_stack(masks)
    if fg.shape[1:3] != mask.shape[1:]:
        raise ValueError(
            f"mask dimensions {mask.shape[1:]} do not match "
            f"image dimensions {fg.shape[1:3]}"
        )
    orders = enumerate_orders(len(fgs), cap=cap)
    out = np.empty((len(orders),) + fg.shape[1:])
    for i, order in enumerate(orders):
        vis = _visible_stack(mask, order)
        out[i] = np.einsum("jhwc,jhw->hwc", fg, vis)
    return out


def background_coverage(masks: Sequence[MaskMap]) -> np.ndarray:
    """Per-pixel weight left for the background: prod_j (1 - m_j)."""
    stack = _mask_stack(masks)
    return np.prod(1.0 - stack, axis=0)


def compose_hierarchy(
    bg: Image,
    fgs: Sequence[Image],
    masks: Sequence[MaskMap],
    w,
    cap: int = MAX_FOREGROUNDS,
) -> Composite:
    """Blend all occlusion-order composites under simplex weights.

    The output image is sum_i w_i * O_i + bg * prod_j (1 - m_j) where O_i
    is the foreground composite of the i-th lexicographic order. The
    combined mask, 1 - prod_j (1 - m_j), does not depend on the weights.
    Orders with weight exactly 0 are skipped; the result is identical.
    """
    if not isinstance(w, HierarchyWeights):
        w = HierarchyWeights(np.asarray(w, dtype=np.float64))
    m = len(fgs)
    if m == 0:
        raise ValueError("at least one foreground is required")
    if len(masks) != m:
        raise ValueError(f"got {m} foregrounds but {len(masks)} masks")
    if len(w) != math.factorial(m):
        raise InvalidWeightsError(
            f"expected {math.factorial(m)} weights for {m} foregrounds, "
            f"got {len(w)}"
        )
    fg = _fg_stack(fgs)
    mask = _mask_stack(masks)
    if bg.data.shape != fg.shape[1:]:
        raise ValueError(
            f"background shape {bg.data.shape} does not match "
            f"foreground shape {fg.shape[1:]}"
        )
    if mask.shape[1:] != fg.shape[1:3]:
        raise ValueError(
            f"mask dimensions {mask.shape[1:]} do not match "
            f"image dimensions {fg.shape[1:3]}"
        )

    orders = enumerate_orders(m, cap=cap)
    acc = np.zeros_like(bg.data)
    for i, order in enumerate(orders):
        wi = w.weights[i]
        if wi == 0.0:
            continue
        vis = _visible_stack(mask, order)
        acc += wi * np.einsum("jhwc,jhw->hwc", fg, vis)
    coverage = np.prod(1.0 - mask, axis=0)
    composed = acc + bg.data * coverage[:, :, None]
    return Composite(
        image=Image(np.clip(composed, 0.0, 1.0)),
        combined_mask=MaskMap(np.clip(1.0 - coverage, 0.0, 1.0)),
    )


def softmax_weights(logits) -> HierarchyWeights:
    """Map unconstrained logits onto the simplex, max-shifted for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError(f"logits must be a vector, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    shifted = np.exp(logits - logits.max())
    return HierarchyWeights(shifted / shifted.sum())
