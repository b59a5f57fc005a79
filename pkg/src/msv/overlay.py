"""Rendering views onto images: colored translucent regions plus a caption strip."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .core import InputTensor, MsvSet, mask_input

# Fixed 10-color cycle; a view's color is determined by its discovery index.
PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (170, 110, 40),
)

ALPHA = 0.5
CAPTION_HEIGHT = 16


def to_pil(x: InputTensor) -> Image.Image:
    arr = np.clip(x.data, 0.0, 1.0)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1, 1)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return Image.fromarray((arr * 255).round().astype(np.uint8), mode="RGB")


def render_overlay(x: InputTensor, msv_set: MsvSet, scale: int = 1) -> Image.Image:
    """Tint each view with its palette color and append the count caption."""
    base = np.asarray(to_pil(x), dtype=np.float64)
    h, w = base.shape[:2]
    for i, view in enumerate(msv_set.views):
        color = np.asarray(PALETTE[i % len(PALETTE)], dtype=np.float64)
        for site in view.indices:
            r, c = divmod(site, w)
            base[r, c, :] = (1 - ALPHA) * base[r, c, :] + ALPHA * color
    body = Image.fromarray(base.round().astype(np.uint8), mode="RGB")
    if scale > 1:
        body = body.resize((w * scale, h * scale), Image.NEAREST)

    out = Image.new("RGB", (body.width, body.height + CAPTION_HEIGHT), (0, 0, 0))
    out.paste(body, (0, 0))
    draw = ImageDraw.Draw(out)
    caption = f"views: {msv_set.n_views}"
    if msv_set.remainder_class == msv_set.predicted_class:
        caption += " (degenerate)"
    draw.text((2, body.height + 2), caption, fill=(255, 255, 255))
    return out


def render_masked_view(x: InputTensor, view, baseline, scale: int = 1) -> Image.Image:
    """The masked input itself: view kept, baseline elsewhere."""
    masked = mask_input(x, view, baseline)
    img = to_pil(masked)
    if scale > 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    return img
