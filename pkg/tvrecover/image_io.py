import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from PIL import Image

from tvrecover.errors import InvalidInputError
from tvrecover.image_core import as_image

logger = logging.getLogger(__name__)

PGM_MAXVAL = 65535


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_pgm(path: Union[str, Path], image) -> Dict[str, Any]:
    """
    Write a real image as a 16-bit binary PGM (P5), linearly scaled from its
    (min, max) range, plus a sidecar `<path>.json` recording that range.

    Args:
        path: Destination .pgm file
        image: Real 2-D array

    Returns:
        Dict: the sidecar contents
    """
    image = as_image(image)
    if np.iscomplexobj(image):
        raise InvalidInputError("PGM output needs a real image")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        levels = np.rint((image - lo) / (hi - lo) * PGM_MAXVAL)
    else:
        levels = np.zeros_like(image)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(levels.astype(np.int32)).save(path, format="PPM")
    meta = {"min": lo, "max": hi, "shape": list(image.shape)}
    with open(sidecar_path(path), "w") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info(f"Wrote {path} ({image.shape[0]}x{image.shape[1]}, range [{lo:.4g}, {hi:.4g}])")
    return meta


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """
    Read a PGM and map its levels back to floats. Without a sidecar the image
    is returned scaled to [0, 1].
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            mode = img.mode
            levels = np.asarray(img, dtype=np.float64)
    except OSError as e:
        raise InvalidInputError(f"could not read {path} as PGM: {e}") from e
    if levels.ndim != 2:
        raise InvalidInputError(f"{path} is not a greyscale image")
    maxval = 255 if mode == "L" else PGM_MAXVAL
    meta_path = sidecar_path(path)
    if meta_path.exists():
        with open(meta_path) as f:
            meta = json.load(f)
        lo, hi = float(meta["min"]), float(meta["max"])
        maxval = PGM_MAXVAL
    else:
        logger.warning(f"No sidecar for {path}; returning levels scaled to [0, 1]")
        lo, hi = 0.0, 1.0
    return lo + levels / maxval * (hi - lo)
