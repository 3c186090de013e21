"""Orthonormal multi-level 2-D Haar transform.

Scales are numbered coarse to fine: scale 1 is the coarsest detail level and
scale ``levels`` the finest, so the quad-tree parent of a scale-``j``
coefficient lives at scale ``j - 1``.  Coefficient ``(r, c)`` at scale ``j``
has children ``(2r + dr, 2c + dc)`` for ``dr, dc in {0, 1}`` at scale ``j + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .io import GrayImage

ORIENTATIONS = ("LH", "HL", "HH")


@dataclass
class WaveletPyramid:
    """Detail subbands per scale plus the final approximation.

    Attributes
    ----------
    details : list of dict
        ``details[j - 1][b]`` is the square coefficient grid of orientation
        ``b`` at scale ``j``; side doubles from one scale to the next.
    approx : ndarray
        LL grid, same side as the scale-1 details.
    crop : tuple of int
        ``(width, height)`` carried over from the source image.
    """

    details: list
    approx: np.ndarray
    crop: tuple = field(default=None)

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def side(self) -> int:
        """Side of the image this pyramid was computed from."""
        return self.approx.shape[0] << self.levels

    def subband(self, scale: int, orientation: str) -> np.ndarray:
        return self.details[scale - 1][orientation]

    def scale_side(self, scale: int) -> int:
        return self.details[scale - 1]["LH"].shape[0]

    def energy(self) -> float:
        total = float(np.sum(self.approx**2))
        for bands in self.details:
            total += sum(float(np.sum(bands[b] ** 2)) for b in ORIENTATIONS)
        return total


def _analysis(x: np.ndarray):
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a + b - c - d) / 2.0
    hl = (a - b + c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return ll, {"LH": lh, "HL": hl, "HH": hh}


def _synthesis(ll, bands):
    lh, hl, hh = bands["LH"], bands["HL"], bands["HH"]
    out = np.empty((2 * ll.shape[0], 2 * ll.shape[1]))
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 0::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return out


def forward_haar(image, levels: int = 5) -> WaveletPyramid:
    """Decompose ``image`` into ``levels`` detail scales.

    Each step maps a 2x2 block ``[[a, b], [c, d]]`` to
    ``LL = (a+b+c+d)/2``, ``LH = (a+b-c-d)/2``, ``HL = (a-b+c-d)/2`` and
    ``HH = (a-b-c+d)/2``, then recurses on LL.

    Parameters
    ----------
    image : GrayImage or ndarray
        Square grid whose side is divisible by ``2**levels``.
    levels : int
        Number of decomposition steps.
    """
    if isinstance(image, GrayImage):
        x, crop = image.data, image.crop
    else:
        x = np.asarray(image, dtype=np.float64)
        crop = (x.shape[1], x.shape[0]) if x.ndim == 2 else None
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InvalidInputError(f"expected a square image, got shape {x.shape}")
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    if x.shape[0] % (1 << levels):
        raise InvalidInputError(f"image side {x.shape[0]} too small or not divisible for {levels} levels")

    details = []
    ll = x
    for _ in range(levels):
        ll, bands = _analysis(ll)
        details.append(bands)
    details.reverse()
    return WaveletPyramid(details, ll, crop)


def inverse_haar(pyramid: WaveletPyramid) -> np.ndarray:
    """Exact synthesis inverse of :func:`forward_haar`."""
    ll = np.asarray(pyramid.approx, dtype=np.float64)
    for j, bands in enumerate(pyramid.details, start=1):
        for b in ORIENTATIONS:
            if bands[b].shape != ll.shape:
                raise InvalidInputError(
                    f"scale {j} {b} has shape {bands[b].shape}, expected {ll.shape}"
                )
        ll = _synthesis(ll, bands)
    return ll
