"""
Builders shared by several test modules.
"""

import numpy as np
from scipy import ndimage

from quadflow.synthgen import SceneSpec, SpriteSpec


def textured(height: int, width: int, seed: int = 0, smooth: float = 3.0) -> np.ndarray:
    """Smooth random texture normalized to [0.1, 0.9]"""
    noise = np.random.default_rng(seed).random((height, width))
    field = ndimage.gaussian_filter(noise, smooth, mode="wrap")
    field = (field - field.min()) / (field.max() - field.min())
    return 0.1 + 0.8 * field


def blob_scene(v=(4.0, 0.0), a=(2.0, 0.0), p0=(40.0, 32.0), sigma=3.5, width=96, height=64) -> SceneSpec:
    return SceneSpec(
        width=width,
        height=height,
        background=0.0,
        supersample=4,
        sprites=[SpriteSpec(kind="blob", p0=p0, v=v, a=a, sigma=sigma)],
    )


def square_image(height: int, width: int, squares) -> np.ndarray:
    """White axis-aligned squares (x0, y0, side) on black, pixel-aligned"""
    img = np.zeros((height, width))
    for x0, y0, side in squares:
        img[y0:y0 + side, x0:x0 + side] = 1.0
    return img


def disc_scene(v=(2.0, 0.0), a=(0.0, 0.0), p0=(40.0, 32.0), radius=10.0, seed=5, width=96, height=64,
               background=0.0) -> SceneSpec:
    return SceneSpec(
        width=width,
        height=height,
        background=background,
        supersample=4,
        sprites=[SpriteSpec(kind="disc", p0=p0, v=v, a=a, radius=radius, seed=seed)],
    )
