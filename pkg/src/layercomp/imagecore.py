"""Core raster containers and the PNG file boundary.

All pixel data lives in float64 arrays with values in [0, 1], row-major with
the origin at the top-left corner. Images carry 1 or 3 channels; masks are
single-channel coverage maps. Both are immutable after construction so they
can be shared freely between threads.

File I/O is restricted to 8-bit grayscale and RGB PNG. 8-bit samples map to
v / 255 on decode; encoding rounds half up and clamps, so any value on the
1/255 grid survives a round trip exactly.
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage

__all__ = [
    "Image",
    "MaskMap",
    "ImageDecodeError",
    "UnsupportedFormatError",
    "decode_image",
    "encode_image",
    "mask_to_image",
    "image_to_mask",
]


class ImageDecodeError(ValueError):
    """Raised when a byte stream is not a well-formed PNG."""


class UnsupportedFormatError(ValueError):
    """Raised for well-formed PNGs outside the 8-bit gray/RGB subset."""


def _as_raster(data, channels_allowed) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"raster must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[2] not in channels_allowed:
        raise ValueError(
            f"channel count must be one of {sorted(channels_allowed)}, "
            f"got {arr.shape[2]}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"raster dimensions must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"raster values must lie in [0, 1], got range "
            f"[{arr.min():.6g}, {arr.max():.6g}]"
        )
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """H x W x C float raster in [0, 1], C in {1, 3}.

    A 2-D array is accepted and stored as a single-channel H x W x 1 raster.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_raster(self.data, {1, 3}))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class MaskMap:
    """H x W float coverage map in [0, 1].

    ``binary`` declares that every element is exactly 0 or 1; this is
    validated at construction.
    """

    data: np.ndarray
    binary: bool = field(default=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        arr = _as_raster(arr, {1})[:, :, 0]
        arr.flags.writeable = False
        if self.binary and not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError("mask flagged binary contains values outside {0, 1}")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_COLOR_TYPE_NAMES = {
    3: "palette",
    4: "grayscale+alpha",
    6: "RGB+alpha",
}


def _inspect_png(data: bytes) -> None:
    """Walk the chunk structure, rejecting malformed or unsupported streams.

    Structural failures raise ImageDecodeError naming the byte offset;
    valid PNGs outside 8-bit gray/RGB raise UnsupportedFormatError.
    """
    if len(data) < 8 or data[:8] != _PNG_SIGNATURE:
        raise ImageDecodeError("not a PNG stream: signature mismatch at offset 0")
    pos = 8
    seen_ihdr = False
    seen_idat = False
    while True:
        if pos == len(data):
            raise ImageDecodeError(
                f"stream ends at offset {pos} without an IEND chunk"
            )
        if pos + 8 > len(data):
            raise ImageDecodeError(f"truncated chunk header at offset {pos}")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        ctype = data[pos + 4 : pos + 8]
        if not all(65 <= b <= 90 or 97 <= b <= 122 for b in ctype):
            raise ImageDecodeError(f"invalid chunk type at offset {pos + 4}")
        if pos + 12 + length > len(data):
            raise ImageDecodeError(f"truncated chunk data at offset {pos + 8}")
        payload = data[pos + 8 : pos + 8 + length]
        (crc,) = struct.unpack(
            ">I", data[pos + 8 + length : pos + 12 + length]
        )
        if zlib.crc32(ctype + payload) & 0xFFFFFFFF != crc:
            raise ImageDecodeError(f"chunk CRC mismatch at offset {pos}")
        if not seen_ihdr:
            if ctype != b"IHDR":
                raise ImageDecodeError(
                    f"first chunk at offset {pos} is not IHDR"
                )
            if length != 13:
                raise ImageDecodeError(
                    f"IHDR has invalid length {length} at offset {pos}"
                )
            width, height, bit_depth, color_type, _comp, _filt, interlace = (
                struct.unpack(">IIBBBBB", payload)
            )
            if width == 0 or height == 0:
                raise ImageDecodeError(
                    f"IHDR declares zero dimension at offset {pos + 8}"
                )
            if bit_depth != 8:
                raise UnsupportedFormatError(
                    f"unsupported bit depth {bit_depth}; only 8-bit supported"
                )
            if color_type not in (0, 2):
                name = _COLOR_TYPE_NAMES.get(color_type, str(color_type))
                raise UnsupportedFormatError(
                    f"unsupported color type {name}; "
                    "only grayscale and RGB supported"
                )
            if interlace != 0:
                raise UnsupportedFormatError("interlaced PNG not supported")
            seen_ihdr = True
        elif ctype == b"IDAT":
            seen_idat = True
        elif ctype == b"IEND":
            if not seen_idat:
                raise ImageDecodeError(
                    f"IEND at offset {pos} but no IDAT chunk seen"
                )
            return
        pos += 12 + length


def decode_image(data: bytes) -> Image:
    """Decode an 8-bit grayscale or RGB PNG byte stream.

    Each 8-bit sample v maps to v / 255 exactly.
    """
    _inspect_png(data)
    try:
        with _PILImage.open(io.BytesIO(data)) as pil:
            pil.load()
            arr = np.asarray(pil, dtype=np.uint8)
    except Exception as exc:  # corrupt compressed data past the chunk walk
        raise ImageDecodeError(f"invalid PNG pixel data: {exc}") from exc
    return Image(arr.astype(np.float64) / 255.0)


def encode_image(img: Image) -> bytes:
    """Encode an Image as an 8-bit PNG.

    Floats map to round-half-up(f * 255) clamped to [0, 255], so decoding
    the result reproduces any value on the 1/255 grid exactly.
    """
    quantized = np.floor(img.data * 255.0 + 0.5)
    quantized = np.clip(quantized, 0.0, 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = _PILImage.fromarray(quantized[:, :, 0], mode="L")
    else:
        pil = _PILImage.fromarray(quantized, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def mask_to_image(mask: MaskMap) -> Image:
    """View a mask as a single-channel image (for PNG encoding)."""
    return Image(mask.data)


def image_to_mask(img: Image, binary: bool = False) -> MaskMap:
    """Interpret a single-channel image as a mask."""
    if img.channels != 1:
        raise ValueError(
            f"mask images must be single-channel, got {img.channels} channels"
        )
    return MaskMap(img.data[:, :, 0], binary=binary)
