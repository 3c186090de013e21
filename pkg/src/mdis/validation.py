"""Input coercion shared by the estimator API and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError
from .io import GrayImage, load_image, pad_to_dyadic


def check_image(X) -> GrayImage:
    """Coerce a path, a 2-D array in [0, 1] or a :class:`GrayImage`."""
    if isinstance(X, GrayImage):
        return X
    if isinstance(X, (str, Path)):
        return load_image(X)
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a 2-D luminance array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InvalidInputError("luminance values must lie in [0, 1]")
    return pad_to_dyadic(arr)


def check_images(X) -> list:
    """Coerce one image or a collection of images into a list of :class:`GrayImage`.

    A 2-D array, a path or a :class:`GrayImage` counts as a single image; a
    3-D array is a stack along its first axis.
    """
    if isinstance(X, (GrayImage, str, Path)):
        return [check_image(X)]
    if isinstance(X, np.ndarray):
        if X.ndim == 2:
            return [check_image(X)]
        if X.ndim == 3:
            return [check_image(x) for x in X]
        raise InvalidInputError(f"expected 2-D or 3-D input, got {X.ndim}-D")
    images = [check_image(x) for x in X]
    if not images:
        raise InvalidInputError("no images given")
    return images


def check_levels(levels, side=None) -> int:
    if int(levels) != levels or levels < 1:
        raise InvalidInputError(f"levels must be a positive integer, got {levels!r}")
    if side is not None and side < (1 << int(levels)):
        raise InvalidInputError(f"a {side}-pixel image supports at most {side.bit_length() - 1} levels")
    return int(levels)
