"""Warp one test card through all three transform families.

The sampler is backward: parameters map output coordinates to source
coordinates in the normalized [-1, 1] square, so a positive translation
pulls content the other way. Off-canvas samples are zero.
"""

import os

import numpy as np

from layercomp import (
    AffineWarp,
    HomographyWarp,
    Image,
    encode_image,
    fit_tps,
    translation_affine,
    warp_image,
)

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT_DIR, exist_ok=True)


def save(name, image):
    path = os.path.join(OUT_DIR, name)
    with open(path, "wb") as fh:
        fh.write(encode_image(image))
    print(f"  wrote {path}")


size = 128
ax = np.linspace(0, 1, size)
xx, yy = np.meshgrid(ax, ax)
checker = ((xx * 8).astype(int) + (yy * 8).astype(int)) % 2
card = Image(
    np.stack([checker * 0.8 + 0.1, xx * 0.9, yy * 0.9], axis=-1)
)
save("warp_source.png", card)

print("affine: shift content right/down by a quarter frame")
shifted = warp_image(card, translation_affine(-0.5, -0.5))
save("warp_translated.png", shifted)

print("affine: rotate 25 degrees about the center")
theta = np.deg2rad(25)
rot = AffineWarp(
    np.array(
        [[np.cos(theta), -np.sin(theta), 0.0], [np.sin(theta), np.cos(theta), 0.0]]
    )
)
save("warp_rotated.png", warp_image(card, rot))

print("homography: tilt the card in perspective")
h = HomographyWarp(
    np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.35, 0.0, 1.0]])
)
save("warp_perspective.png", warp_image(card, h))

print("thin plate spline: pin the corners, drag the center")
src = np.array(
    [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]
)
dst = src.copy()
dst[4] = [0.35, 0.25]
tps = fit_tps(src, dst)
print(f"  kernel weight norm {np.linalg.norm(tps.weights):.4f} (zero would mean a pure affine fit)")
save("warp_tps_bulge.png", warp_image(card, tps))

print("done: compare warp_*.png against warp_source.png")
