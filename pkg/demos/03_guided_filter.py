"""Appearance transfer with the guided filter, and its eps behavior.

A detailed composite acts as the guide while a flat, recolored version of
it acts as the input. The filter paints the input's appearance back onto
the guide's texture. Sweeping eps shows the regularization trade-off:
large eps flattens the output toward a box blur of the input.
"""

import os

import numpy as np

from layercomp import (
    FilterConfig,
    Image,
    encode_image,
    filter_sweep,
    generate_scene,
    guided_filter,
)

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT_DIR, exist_ok=True)


def save(name, image):
    path = os.path.join(OUT_DIR, name)
    with open(path, "wb") as fh:
        fh.write(encode_image(image))
    print(f"  wrote {path}")


scene = generate_scene(seed=5, m=3, size=128)
guide = scene.gt_composite
save("filter_guide.png", guide)

# a crude appearance proposal: channel-swapped and brightened
proposal = Image(np.clip(guide.data[:, :, [2, 0, 1]] * 0.6 + 0.3, 0, 1))
save("filter_input.png", proposal)

print("transferring the proposal's appearance onto the guide's detail:")
out = guided_filter(guide, proposal, FilterConfig(radius=16, eps=1e-7))
save("filter_output.png", out)

print("sweeping eps at radius 16 (variance of the pre-clamp output):")
rows = filter_sweep([1e-7, 1e-4, 1e-2, 1.0], seed=5, size=128, radius=16)
for row in rows:
    bar = "#" * int(row["variance"] * 400)
    print(f"  eps {row['eps']:.0e}: variance {row['variance']:.5f} {bar}")
print("variance only ever falls as eps grows: detail gives way to smoothing")

for eps, name in [(1e-4, "filter_eps_1e4.png"), (1e-1, "filter_eps_1e1.png")]:
    save(name, guided_filter(guide, guide, FilterConfig(radius=16, eps=eps)))
print("done: filter_eps_*.png show the same image losing detail as eps rises")
