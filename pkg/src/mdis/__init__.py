"""Multiscale discriminant saliency with wavelet hidden Markov trees."""

__version__ = "0.1.0"

from .estimator import HMTModel, MultiscaleDiscriminantSaliency
from .exceptions import (
    ConfigurationError,
    DecodeError,
    InvalidInputError,
    MdisError,
    UndefinedMetricError,
)
from .haar import WaveletPyramid, forward_haar, inverse_haar
from .hmt import HmtParams, TreeParams, default_universal_params, load_params, save_params
from .io import FixationSet, GrayImage, density_map, load_fixations, load_image, pad_to_dyadic
from .metrics import auc, lcc, nss
from .saliency import compute_saliency
from .train import EmConfig, em_fit, fit_universal

__all__ = [
    "ConfigurationError",
    "DecodeError",
    "EmConfig",
    "FixationSet",
    "GrayImage",
    "HMTModel",
    "HmtParams",
    "InvalidInputError",
    "MdisError",
    "MultiscaleDiscriminantSaliency",
    "TreeParams",
    "UndefinedMetricError",
    "WaveletPyramid",
    "auc",
    "compute_saliency",
    "default_universal_params",
    "density_map",
    "em_fit",
    "fit_universal",
    "forward_haar",
    "inverse_haar",
    "lcc",
    "load_fixations",
    "load_image",
    "load_params",
    "nss",
    "pad_to_dyadic",
    "save_params",
]
