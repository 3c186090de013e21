"""Image decoding, dyadic padding, fixation ingestion and map output.

Coordinates follow the image convention used throughout the package:
``x`` is the pixel column and ``y`` the pixel row, both 0-based.  Sizes are
reported as ``(width, height)`` while arrays are indexed ``[row, col]``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import DecodeError, FixationParseError, InvalidInputError, OutOfRangeError

REC601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """Square, power-of-two luminance image with the pre-padding size.

    Attributes
    ----------
    data : ndarray of shape (side, side)
        Luminance in [0, 1].
    crop : tuple of int
        ``(width, height)`` of the source before padding.
    """

    data: np.ndarray
    crop: tuple[int, int]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise InvalidInputError(f"GrayImage must be square, got shape {data.shape}")
        if not is_power_of_two(data.shape[0]):
            raise InvalidInputError(f"GrayImage side {data.shape[0]} is not a power of two")
        w, h = self.crop
        if not (1 <= w <= data.shape[1] and 1 <= h <= data.shape[0]):
            raise InvalidInputError(f"crop {self.crop} does not fit a {data.shape[0]}-pixel square")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "crop", (int(w), int(h)))

    @property
    def side(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def cropped(self) -> np.ndarray:
        w, h = self.crop
        return self.data[:h, :w]


@dataclass(frozen=True)
class FixationSet:
    """Eye fixations as integer ``(x, y)`` pixels inside ``frame = (width, height)``."""

    points: np.ndarray
    frame: tuple[int, int]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        w, h = self.frame
        if w < 1 or h < 1:
            raise InvalidInputError(f"invalid frame {self.frame}")
        bad = (pts[:, 0] < 0) | (pts[:, 0] >= w) | (pts[:, 1] < 0) | (pts[:, 1] >= h)
        if bad.any():
            x, y = pts[np.argmax(bad)]
            raise OutOfRangeError(f"fixation ({x}, {y}) outside frame {w}x{h}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "frame", (int(w), int(h)))

    def __len__(self):
        return len(self.points)

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True)
class DensityMap:
    """Non-negative fixation density on a ``(height, width)`` grid, max-normalized."""

    data: np.ndarray

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def pad_to_dyadic(pixels) -> GrayImage:
    """Reflect-pad an arbitrary luminance grid to the enclosing power-of-two square.

    Padding is appended on the right and bottom so the source stays anchored at
    the origin.  The mirror axis sits on the outer pixel boundary (the edge
    pixel is repeated), and numpy repeats the reflection when the padding is
    wider than the source.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    h, w = arr.shape
    side = next_power_of_two(max(h, w))
    padded = np.pad(arr, ((0, side - h), (0, side - w)), mode="symmetric")
    return GrayImage(padded, (w, h))


def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    # header: magic, width, height, maxval, each separated by whitespace; '#' starts a comment
    tokens = []
    pos = 0
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*([^\s#]+)")
    for _ in range(4):
        m = token_re.match(raw, pos)
        if m is None:
            raise DecodeError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise DecodeError(f"{path}: bad PGM header") from exc
    if not 0 < maxval < 65536:
        raise DecodeError(f"{path}: bad PGM maxval {maxval}")
    if w == 0 or h == 0:
        raise InvalidInputError(f"{path}: zero-dimension image")
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = raw[pos + 1:]
        need = w * h * dtype.itemsize
        if len(body) < need:
            raise DecodeError(f"{path}: truncated PGM raster")
        values = np.frombuffer(body[:need], dtype=dtype)
    elif magic == b"P2":
        try:
            values = np.array(raw[pos:].split(), dtype=np.int64)
        except ValueError as exc:
            raise DecodeError(f"{path}: bad ASCII PGM raster") from exc
        if values.size < w * h:
            raise DecodeError(f"{path}: truncated PGM raster")
        values = values[: w * h]
    else:
        raise DecodeError(f"{path}: unsupported PNM magic {magic!r}")
    return values.reshape(h, w).astype(np.float64) / maxval


def _read_pillow(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I;16N"):
                return np.asarray(im, dtype=np.float64) / 65535.0
            if mode == "I":
                arr = np.asarray(im, dtype=np.float64)
                return arr / (65535.0 if arr.max(initial=0) > 255 else 255.0)
            if mode == "F":
                return np.clip(np.asarray(im, dtype=np.float64), 0.0, 1.0)
            if mode == "L":
                return np.asarray(im, dtype=np.float64) / 255.0
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return rgb @ np.asarray(REC601) / 255.0


def read_luminance(path) -> np.ndarray:
    """Decode PNG or PGM to an unpadded luminance array in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise DecodeError(f"{path}: no such file")
    with path.open("rb") as fh:
        magic = fh.read(2)
    if magic in (b"P2", b"P5"):
        arr = _read_pgm(path)
    else:
        arr = _read_pillow(path)
    if arr.size == 0:
        raise InvalidInputError(f"{path}: zero-dimension image")
    return np.clip(arr, 0.0, 1.0)


def load_image(path) -> GrayImage:
    """Load an image as a padded dyadic :class:`GrayImage`."""
    return pad_to_dyadic(read_luminance(path))


_HEADER = re.compile(r"^\s*x\s*,\s*y\s*$", re.IGNORECASE)


def load_fixations(path, frame) -> FixationSet:
    """Parse a fixation CSV of ``x,y`` integer pairs.

    Parameters
    ----------
    path : path-like
        UTF-8 file, one pair per line, optionally headed by ``x,y``.
    frame : tuple of int
        ``(width, height)`` of the coordinate space, usually the image crop.
    """
    path = Path(path)
    points = []
    with path.open(encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            text = ",".join(row)
            if not text.strip():
                continue
            if line_no == 1 and _HEADER.match(text):
                continue
            if len(row) != 2:
                raise FixationParseError(path, line_no, text)
            try:
                points.append((int(row[0].strip()), int(row[1].strip())))
            except ValueError:
                raise FixationParseError(path, line_no, text) from None
    return FixationSet(np.array(points, dtype=np.int64).reshape(-1, 2), tuple(frame))


def default_density_sigma(frame) -> float:
    w, h = frame
    return 0.02 * float(np.hypot(w, h))


def density_map(fixations: FixationSet, sigma: float | None = None) -> DensityMap:
    """Sum of isotropic Gaussians at the fixations, scaled to a maximum of 1.

    Kernels are evaluated exactly on the pixel grid (no truncation), using the
    separable form ``G_y.T @ G_x``.
    """
    if len(fixations) == 0:
        raise InvalidInputError("density map needs at least one fixation")
    if sigma is None:
        sigma = default_density_sigma(fixations.frame)
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    w, h = fixations.frame
    gx = np.exp(-0.5 * ((np.arange(w)[None, :] - fixations.xs[:, None]) / sigma) ** 2)
    gy = np.exp(-0.5 * ((np.arange(h)[None, :] - fixations.ys[:, None]) / sigma) ** 2)
    dens = gy.T @ gx
    return DensityMap(dens / dens.max())


# -- output -------------------------------------------------------------------

def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> None:
    """Write a [0, 1] array as binary 8-bit PGM."""
    img = to_uint8(values)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_png(path, values: np.ndarray) -> None:
    Image.fromarray(to_uint8(values), mode="L").save(path)


def write_map(path, values: np.ndarray) -> None:
    """Write an 8-bit map, choosing PGM or PNG from the suffix."""
    if Path(path).suffix.lower() == ".pgm":
        write_pgm(path, values)
    else:
        write_png(path, values)


def write_pfm(path, values: np.ndarray) -> None:
    """Write a single-channel little-endian PFM (rows stored bottom to top)."""
    arr = np.asarray(values, dtype="<f4")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise DecodeError(f"{path}: not a grayscale PFM")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        arr = np.frombuffer(fh.read(w * h * 4), dtype=dtype).reshape(h, w)
    return arr[::-1].astype(np.float64)
