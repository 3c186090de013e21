"""Mutual-information saliency from per-scale class posteriors.

Per scale ``j`` the saliency of a node is ``H(C^j) - H(P(c | d, v))``: the
entropy of the scale's class marginal minus the entropy of the node's own
posterior, in nats, clamped at zero.  Per-scale maps are tagged ``HMT1``
(coarsest) to ``HMT<levels>`` (finest); ``HMT0`` is their pixelwise maximum.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .fusion import PosteriorGrid, fuse_all_scales
from .haar import forward_haar
from .hmt import HmtParams, default_universal_params, node_priors, upward_sweep
from .io import GrayImage
from .train import EmConfig, EmTrace, em_fit

MODES = ("UHMT", "THMT")
FUSED = "HMT0"
CONSTANT_RTOL = 1e-12


def scale_tag(scale: int) -> str:
    return f"HMT{scale}"


@dataclass
class SaliencyMap:
    """Pixel map over the source crop (``height x width``) with a provenance tag."""

    data: np.ndarray
    tag: str

    @property
    def shape(self):
        return self.data.shape


def _entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def scale_entropy(grid: PosteriorGrid) -> float:
    """Entropy of the mean posterior over all nodes of the scale (nats)."""
    if grid.posterior.size == 0:
        raise InvalidInputError("empty posterior grid")
    mean = grid.posterior.reshape(-1, 2).mean(axis=0)
    return float(_entropy(mean))


def mi_map(grid: PosteriorGrid, H: float, clamp: bool = True) -> np.ndarray:
    """Per-node information gain ``H - H(posterior)``, negatives clamped to 0 unless ``clamp=False``."""
    gain = H - _entropy(grid.posterior)
    return np.maximum(gain, 0.0) if clamp else gain


def upsample_to_pixels(node_map: np.ndarray, side: int, crop=None, tag: str = "") -> SaliencyMap:
    """Replicate each node over its dyadic square, then crop to ``crop = (width, height)``."""
    node_map = np.asarray(node_map, dtype=np.float64)
    n = node_map.shape[0]
    if node_map.ndim != 2 or node_map.shape[1] != n or side % n:
        raise InvalidInputError(f"cannot expand a {node_map.shape} node map onto {side} pixels")
    k = side // n
    pixels = np.repeat(np.repeat(node_map, k, axis=0), k, axis=1)
    if crop is not None:
        w, h = crop
        pixels = pixels[:h, :w]
    return SaliencyMap(pixels, tag)


def fuse_max(maps) -> SaliencyMap:
    """Pixelwise maximum over equally sized raw maps."""
    maps = list(maps)
    if not maps:
        raise InvalidInputError("nothing to fuse")
    shape = maps[0].data.shape
    for m in maps:
        if m.data.shape != shape:
            raise InvalidInputError(f"map {m.tag} has shape {m.data.shape}, expected {shape}")
    return SaliencyMap(np.max(np.stack([m.data for m in maps]), axis=0), FUSED)


def normalize_map(smap: SaliencyMap) -> SaliencyMap:
    """Min-max scale to [0, 1]; a constant map becomes all zeros.

    A spread within rounding of the map's magnitude counts as constant, so
    floating-point residue is never stretched into a full-range map.
    """
    x = smap.data
    lo, hi = float(x.min()), float(x.max())
    if hi - lo > CONSTANT_RTOL * max(abs(lo), abs(hi)):
        out = (x - lo) / (hi - lo)
    else:
        out = np.zeros_like(x)
    return SaliencyMap(out, smap.tag)


@dataclass
class SaliencyResult:
    """Everything :func:`compute_saliency` produces for one image.

    ``maps`` holds normalized maps keyed ``HMT0`` .. ``HMT<levels>``; ``raw``
    the same maps before normalization.
    """

    maps: dict
    raw: dict
    params: HmtParams
    posteriors: list
    entropies: list
    mode: str
    seconds: float
    trace: EmTrace | None = None
    extras: dict = field(default_factory=dict)

    def __getitem__(self, tag):
        return self.maps[tag]


def compute_saliency(
    image: GrayImage,
    params: HmtParams | None = None,
    mode: str = "UHMT",
    levels: int = 5,
    em_config: EmConfig | None = None,
    max_rounds: int = 10,
    clamp: bool = True,
    context_priors=None,
) -> SaliencyResult:
    """Run the whole pipeline on one image.

    Parameters
    ----------
    image : GrayImage
    params : HmtParams, optional
        UHMT parameters (defaults to the shipped universal set).  In THMT
        mode they seed EM instead when ``em_config`` carries no seed.
    mode : {"UHMT", "THMT"}
        THMT fits parameters to ``image`` itself before labeling.
    levels : int
        Decomposition depth; ignored when ``params`` fixes it.
    """
    mode = mode.upper()
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if params is not None:
        levels = params.levels
    start = time.perf_counter()
    pyramid = forward_haar(image, levels)
    trace = None
    if mode == "THMT":
        cfg = em_config or EmConfig()
        if cfg.seed_params is None and params is not None:
            cfg = EmConfig(cfg.max_iterations, cfg.rel_tolerance, cfg.sigma_floor, params)
        params, trace = em_fit(pyramid, cfg)
    elif params is None:
        params = default_universal_params(levels)

    beta = upward_sweep(pyramid, params)
    grids = fuse_all_scales(beta, node_priors(params), max_rounds, context_priors)

    raw = {}
    entropies = []
    for grid in grids:
        H = scale_entropy(grid)
        entropies.append(H)
        tag = scale_tag(grid.scale)
        raw[tag] = upsample_to_pixels(mi_map(grid, H, clamp), image.side, image.crop, tag)
    raw = {FUSED: fuse_max(raw.values()), **raw}
    maps = {tag: normalize_map(m) for tag, m in raw.items()}
    seconds = time.perf_counter() - start
    return SaliencyResult(maps, raw, params, grids, entropies, mode, seconds, trace)
