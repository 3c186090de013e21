"""Regenerate calibration/*.png from the scikit-image sample photographs.

Each photo is converted to Rec.601 luminance, center-cropped to a square and
resized to 256x256.  The committed PNGs are the training corpus for the
shipped universal HMT parameters:

    python scripts/make_calibration_corpus.py
    mdis fit-universal calibration -o src/mdis/data/universal_params.json
"""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

PHOTOS = ("camera", "astronaut", "coffee", "chelsea", "rocket", "brick", "grass", "gravel")
SIDE = 256


def to_gray(rgb):
    if rgb.ndim == 2:
        return rgb.astype(np.float64)
    return rgb[..., :3].astype(np.float64) @ np.array([0.299, 0.587, 0.114])


def square_crop(a):
    h, w = a.shape
    k = min(h, w)
    r, c = (h - k) // 2, (w - k) // 2
    return a[r:r + k, c:c + k]


def main(out="calibration"):
    out = Path(out)
    out.mkdir(exist_ok=True)
    for name in PHOTOS:
        gray = square_crop(to_gray(getattr(data, name)()))
        im = Image.fromarray(np.round(gray).clip(0, 255).astype(np.uint8), mode="L")
        im.resize((SIDE, SIDE), Image.LANCZOS).save(out / f"{name}.png")
        print(out / f"{name}.png")


if __name__ == "__main__":
    main()
