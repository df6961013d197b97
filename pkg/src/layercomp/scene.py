"""Scene descriptions: background, warped foreground layers, and weights.

A scene is the full input to the compositing pipeline. In memory it holds
decoded rasters; on disk it is a JSON document referencing PNG files:

    {
      "version": 1,
      "size": 128,
      "background": "bg.png",
      "foregrounds": [
        {"image": "fg0.png", "mask": "m0.png",
         "warp": {"type": "affine", "m": [1, 0, 0, 0, 1, 0]}},
        ...
      ],
      "hierarchy": {"logits": [...]}        // or {"weights": [...]}
    }

Paths are resolved relative to the document's directory. Exactly one of
logits or weights must be present; logits pass through a stable softmax at
composition time.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hierarchy import (
    MAX_FOREGROUNDS,
    Composite,
    HierarchyWeights,
    compose_hierarchy,
    softmax_weights,
)
from .imagecore import Image, MaskMap, decode_image, image_to_mask
from .warp import WarpParams, warp_from_dict, warp_image, warp_to_dict

__all__ = [
    "Foreground",
    "SceneSpec",
    "SceneValidationError",
    "SceneFormatError",
    "validate_scene",
    "compose_scene",
    "scene_to_dict",
    "load_scene_file",
]


class SceneValidationError(ValueError):
    """Raised when a scene violates its structural contract."""


class SceneFormatError(ValueError):
    """Raised when a scene document cannot be parsed."""


@dataclass(frozen=True)
class Foreground:
    """One layer: an image, its coverage mask, and its warp."""

    image: Image
    mask: MaskMap
    warp: WarpParams


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to compose one scene at a square output size.

    Exactly one of ``logits`` and ``weights`` is set. ``source_paths``
    optionally remembers where rasters were loaded from (display only).
    """

    background: Image
    foregrounds: tuple
    out_size: int
    logits: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    source_paths: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "foregrounds", tuple(self.foregrounds))
        if self.logits is not None:
            arr = np.asarray(self.logits, dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, "logits", arr)
        if self.weights is not None:
            arr = np.asarray(self.weights, dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, "weights", arr)

    @property
    def num_foregrounds(self) -> int:
        return len(self.foregrounds)

    def hierarchy_weights(self) -> HierarchyWeights:
        if self.weights is not None:
            return HierarchyWeights(self.weights)
        return softmax_weights(self.logits)


def validate_scene(spec: SceneSpec, cap: int = MAX_FOREGROUNDS) -> SceneSpec:
    """Check a scene's structural invariants; returns the scene unchanged.

    Violations raise SceneValidationError naming the offending foreground.
    """
    m = spec.num_foregrounds
    if m < 1:
        raise SceneValidationError("scene must contain at least one foreground")
    if m > cap:
        raise SceneValidationError(
            f"scene has {m} foregrounds, exceeding the cap of {cap}"
        )
    if spec.out_size < 1:
        raise SceneValidationError(
            f"output size must be positive, got {spec.out_size}"
        )
    bg = spec.background
    if (bg.height, bg.width) != (spec.out_size, spec.out_size):
        raise SceneValidationError(
            f"background is {bg.height}x{bg.width} but the scene output "
            f"size is {spec.out_size}x{spec.out_size}"
        )
    for i, fg in enumerate(spec.foregrounds):
        if (fg.mask.height, fg.mask.width) != (fg.image.height, fg.image.width):
            raise SceneValidationError(
                f"foreground {i}: mask is {fg.mask.height}x{fg.mask.width} "
                f"but its image is {fg.image.height}x{fg.image.width}"
            )
        if fg.image.channels != bg.channels:
            raise SceneValidationError(
                f"foreground {i}: image has {fg.image.channels} channels "
                f"but the background has {bg.channels}"
            )
    expected = math.factorial(m)
    if (spec.logits is None) == (spec.weights is None):
        raise SceneValidationError(
            "scene must carry exactly one of hierarchy logits or weights"
        )
    values = spec.logits if spec.logits is not None else spec.weights
    kind = "logits" if spec.logits is not None else "weights"
    if values.ndim != 1 or len(values) != expected:
        raise SceneValidationError(
            f"expected {expected} weights ({m}! orderings) in hierarchy "
            f"{kind}, got {len(values)}"
        )
    if not np.all(np.isfinite(values)):
        raise SceneValidationError(f"hierarchy {kind} contain non-finite values")
    if spec.weights is not None:
        HierarchyWeights(spec.weights)  # simplex check
    return spec


def compose_scene(spec: SceneSpec, cap: int = MAX_FOREGROUNDS) -> Composite:
    """Warp every foreground to the output size and blend the scene."""
    validate_scene(spec, cap=cap)
    size = spec.out_size
    warped_fgs = [warp_image(fg.image, fg.warp, size) for fg in spec.foregrounds]
    warped_masks = [warp_image(fg.mask, fg.warp, size) for fg in spec.foregrounds]
    return compose_hierarchy(
        spec.background, warped_fgs, warped_masks, spec.hierarchy_weights(), cap=cap
    )


def scene_to_dict(spec: SceneSpec, paths: dict) -> dict:
    """Serialize a scene to its JSON document form.

    ``paths`` maps 'background' to a path and 'foregrounds' to a list of
    {'image': path, 'mask': path} entries; rasters themselves are written
    separately as PNGs.
    """
    doc = {
        "version": 1,
        "size": spec.out_size,
        "background": paths["background"],
        "foregrounds": [
            {
                "image": entry["image"],
                "mask": entry["mask"],
                "warp": warp_to_dict(fg.warp),
            }
            for fg, entry in zip(spec.foregrounds, paths["foregrounds"])
        ],
    }
    if spec.logits is not None:
        doc["hierarchy"] = {"logits": [float(v) for v in spec.logits]}
    else:
        doc["hierarchy"] = {"weights": [float(v) for v in spec.weights]}
    return doc


def _load_png(path: str, what: str) -> Image:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {what} file {path!r}: {exc}") from exc
    return decode_image(data)


def load_scene_file(path: str, cap: int = MAX_FOREGROUNDS) -> SceneSpec:
    """Load and validate a scene JSON document, decoding referenced PNGs.

    Parse failures raise SceneFormatError naming the location; unresolvable
    raster files surface as OSError naming the foreground.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read scene file {path!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(
            f"malformed scene JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a JSON object")
    if doc.get("version") != 1:
        raise SceneFormatError(
            f"unsupported scene version {doc.get('version')!r}; expected 1"
        )
    for key in ("size", "background", "foregrounds", "hierarchy"):
        if key not in doc:
            raise SceneFormatError(f"scene document missing {key!r} field")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    background = _load_png(resolve(doc["background"]), "background")
    entries = doc["foregrounds"]
    if not isinstance(entries, list):
        raise SceneFormatError("'foregrounds' must be a list")
    foregrounds = []
    for i, entry in enumerate(entries):
        for key in ("image", "mask", "warp"):
            if key not in entry:
                raise SceneFormatError(f"foreground {i} missing {key!r} field")
        image = _load_png(resolve(entry["image"]), f"foreground {i} image")
        mask_img = _load_png(resolve(entry["mask"]), f"foreground {i} mask")
        if mask_img.channels != 1:
            raise SceneFormatError(
                f"foreground {i}: mask PNG must be grayscale, "
                f"got {mask_img.channels} channels"
            )
        try:
            warp = warp_from_dict(entry["warp"])
        except ValueError as exc:
            raise SceneFormatError(f"foreground {i}: {exc}") from exc
        foregrounds.append(
            Foreground(image=image, mask=image_to_mask(mask_img), warp=warp)
        )
    hierarchy = doc["hierarchy"]
    if not isinstance(hierarchy, dict) or (
        ("logits" in hierarchy) == ("weights" in hierarchy)
    ):
        raise SceneFormatError(
            "'hierarchy' must carry exactly one of 'logits' or 'weights'"
        )
    logits = hierarchy.get("logits")
    weights = hierarchy.get("weights")
    spec = SceneSpec(
        background=background,
        foregrounds=tuple(foregrounds),
        out_size=int(doc["size"]),
        logits=None if logits is None else np.asarray(logits, dtype=np.float64),
        weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        source_paths={"scene": path},
    )
    return validate_scene(spec, cap=cap)
