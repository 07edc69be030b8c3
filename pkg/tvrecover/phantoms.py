import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Tuple

import numpy as np

from tvrecover.errors import InvalidInputError
from tvrecover.image_core import discrete_gradient

logger = logging.getLogger(__name__)

ELLIPSE_TABLE = Path(__file__).parent / "data" / "shepp_logan.json"


@lru_cache(maxsize=1)
def load_ellipses() -> Tuple[Tuple[float, ...], ...]:
    with open(ELLIPSE_TABLE) as f:
        table = json.load(f)
    return tuple(tuple(float(v) for v in row) for row in table["ellipses"])


def phantom(n: int) -> np.ndarray:
    """
    Ten-ellipse Shepp-Logan phantom (modified intensities) rasterized at pixel
    centers of [-1, 1]^2 and clipped to [0, 1]. Row 0 is the top of the image.

    Args:
        n: Image side, at least 16

    Returns:
        np.ndarray: n x n float image
    """
    if n < 16:
        raise InvalidInputError(f"phantom side must be at least 16, got {n}")
    centers = (np.arange(n) + 0.5) * 2.0 / n
    xs = centers - 1.0
    ys = 1.0 - centers
    grid_x, grid_y = np.meshgrid(xs, ys)
    image = np.zeros((n, n))
    for intensity, a, b, x0, y0, angle in load_ellipses():
        theta = np.radians(angle)
        dx, dy = grid_x - x0, grid_y - y0
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        image[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += intensity
    return np.clip(image, 0.0, 1.0)


def synthetic_gradient_sparse(n: int, s: int, seed: int) -> Tuple[np.ndarray, int]:
    """
    Piecewise-constant image from s additive axis-aligned rectangles.

    Returns:
        Tuple of the image and the number of non-zero gradient entries
    """
    if n < 2:
        raise InvalidInputError(f"image side must be at least 2, got {n}")
    if not 0 <= s <= n:
        raise InvalidInputError(f"rectangle count must lie in [0, {n}], got {s}")
    rng = np.random.default_rng(seed)
    image = np.zeros((n, n))
    max_side = max(2, n // 4)
    for _ in range(s):
        height, width = rng.integers(2, max_side + 1, size=2)
        row = int(rng.integers(0, n - height + 1))
        col = int(rng.integers(0, n - width + 1))
        image[row:row + height, col:col + width] += rng.uniform(0.1, 1.0)
    support = int(np.count_nonzero(discrete_gradient(image).as_array()))
    logger.debug(f"Synthetic image n={n}, rectangles={s}: gradient support {support}")
    return image, support


def checkerboard(n: int, block: int = 1) -> np.ndarray:
    idx = np.arange(n) // block
    return ((idx[:, None] + idx[None, :]) % 2).astype(float)


def random_images(n: int, count: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((n, n)) for _ in range(count)]
