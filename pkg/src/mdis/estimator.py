"""scikit-learn style wrappers around the HMT trainer and the saliency pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError
from .haar import forward_haar
from .hmt import HmtParams, default_universal_params, log_likelihood
from .saliency import FUSED, MODES, compute_saliency
from .train import EmConfig, em_fit, fit_universal
from .validation import check_images, check_levels


class HMTModel(BaseEstimator):
    """Tied wavelet HMT fitted by EM.

    Fitting on a single image gives that image's own parameters (THMT);
    fitting on several images averages the per-image fits into a universal
    parameter set (UHMT).

    Parameters
    ----------
    levels : int, default=5
        Haar decomposition depth.
    max_iter : int, default=50
    tol : float, default=1e-6
        Relative log-likelihood change that stops EM.
    sigma_floor : float, default=1e-6
    init_params : HmtParams or None, default=None
        EM seed; ``None`` uses the data-driven spread initialization.

    Attributes
    ----------
    params_ : HmtParams
    traces_ : list of EmTrace
    n_images_ : int
    """

    def __init__(self, levels=5, max_iter=50, tol=1e-6, sigma_floor=1e-6, init_params=None):
        self.levels = levels
        self.max_iter = max_iter
        self.tol = tol
        self.sigma_floor = sigma_floor
        self.init_params = init_params

    def _config(self):
        return EmConfig(self.max_iter, self.tol, self.sigma_floor, self.init_params)

    def fit(self, X, y=None):
        images = check_images(X)
        levels = check_levels(self.levels, min(im.side for im in images))
        config = self._config()
        if len(images) == 1:
            params, trace = em_fit(forward_haar(images[0], levels), config)
            self.traces_ = [trace]
        else:
            params, fits = fit_universal(images, config, levels, return_fits=True)
            self.traces_ = [t for _, t in fits]
        self.params_ = params
        self.n_images_ = len(images)
        return self

    def score_samples(self, X):
        """Per-image log-likelihood of the detail coefficients."""
        check_is_fitted(self, "params_")
        return np.array(
            [log_likelihood(forward_haar(im, self.params_.levels), self.params_) for im in check_images(X)]
        )

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class MultiscaleDiscriminantSaliency(TransformerMixin, BaseEstimator):
    """Transform luminance images into multiscale discriminant saliency maps.

    Parameters
    ----------
    mode : {"UHMT", "THMT"}, default="UHMT"
        UHMT labels every image with fixed parameters; THMT refits EM on each
        image inside :meth:`transform`.
    levels : int, default=5
    hmt_params : HmtParams or None, default=None
        UHMT parameters (shipped universal set when ``None``); EM seed in THMT.
    max_iter, tol, sigma_floor
        EM settings for THMT.
    max_rounds : int, default=10
        Cap on context-prior estimation rounds per scale.
    output : str, default="HMT0"
        Map returned by :meth:`transform`; ``"HMT0"`` is the fused map.

    Examples
    --------
    >>> import numpy as np
    >>> est = MultiscaleDiscriminantSaliency(levels=3)
    >>> maps = est.fit_transform([np.random.default_rng(0).random((64, 64))])
    >>> maps.shape
    (1, 64, 64)
    """

    def __init__(
        self,
        mode="UHMT",
        levels=5,
        hmt_params=None,
        max_iter=50,
        tol=1e-6,
        sigma_floor=1e-6,
        max_rounds=10,
        output=FUSED,
    ):
        self.mode = mode
        self.levels = levels
        self.hmt_params = hmt_params
        self.max_iter = max_iter
        self.tol = tol
        self.sigma_floor = sigma_floor
        self.max_rounds = max_rounds
        self.output = output

    def fit(self, X=None, y=None):
        """Resolve the parameter set; the images themselves are not needed."""
        mode = str(self.mode).upper()
        if mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        levels = check_levels(self.levels)
        if self.hmt_params is not None:
            if not isinstance(self.hmt_params, HmtParams):
                raise InvalidInputError("hmt_params must be an HmtParams instance")
            if self.hmt_params.levels != levels:
                raise InvalidInputError(
                    f"hmt_params have {self.hmt_params.levels} scales but levels={levels}"
                )
            params = self.hmt_params
        else:
            params = default_universal_params(levels) if mode == "UHMT" else None
        if not (self.output == FUSED or self.output in {f"HMT{j}" for j in range(1, levels + 1)}):
            raise InvalidInputError(f"unknown output map {self.output!r}")
        self.mode_ = mode
        self.levels_ = levels
        self.params_ = params
        return self

    def compute(self, X) -> list:
        """Full :class:`~mdis.saliency.SaliencyResult` per image."""
        check_is_fitted(self, "mode_")
        config = EmConfig(self.max_iter, self.tol, self.sigma_floor)
        return [
            compute_saliency(
                im,
                self.params_,
                self.mode_,
                self.levels_,
                em_config=config,
                max_rounds=self.max_rounds,
            )
            for im in check_images(X)
        ]

    def transform(self, X):
        """Normalized ``output`` maps, stacked when all images share a size."""
        maps = [r.maps[self.output].data for r in self.compute(X)]
        if len({m.shape for m in maps}) == 1:
            return np.stack(maps)
        return maps

