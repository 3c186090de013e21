"""EM estimation of tied HMT parameters, per image and averaged over a corpus."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidInputError, MdisError
from .haar import ORIENTATIONS, WaveletPyramid, forward_haar
from .hmt import LARGE, SMALL, HmtParams, TreeParams, _log, upward_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule and safeguards for :func:`em_fit`.

    ``seed_params=None`` selects the data-driven initialization.
    """

    max_iterations: int = 50
    rel_tolerance: float = 1e-6
    sigma_floor: float = 1e-6
    seed_params: HmtParams | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if not self.rel_tolerance > 0:
            raise InvalidInputError("rel_tolerance must be > 0")
        if not self.sigma_floor > 0:
            raise InvalidInputError("sigma_floor must be > 0")


@dataclass
class EmTrace:
    """Total log-likelihood after each E-step, plus termination flags."""

    log_likelihoods: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "logLikelihoods": [float(v) for v in self.log_likelihoods],
            "converged": self.converged,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
        }


class EmFitError(MdisError):
    """Raised by :func:`fit_universal` when one corpus image fails."""

    def __init__(self, index, cause):
        self.index = index
        super().__init__(f"EM fit failed on corpus image {index}: {cause}")


def _e_step(coeffs, tree: TreeParams):
    """Posterior state and parent-child marginals for one orientation forest.

    Returns ``(loglik, gamma, xi)`` where ``gamma[j - 1]`` has shape
    ``(s, s, 2)`` and ``xi[j - 1]`` (``None`` at scale 1) has shape
    ``(s, s, 2, 2)`` indexed ``[.., parent state, child state]``.
    """
    levels = tree.levels
    log_beta, log_msg = upward_tree(coeffs, tree)

    # downward: log alpha_i(m) = log f(S_i = m, data outside the subtree of i)
    log_alpha = [None] * levels
    log_alpha[0] = np.broadcast_to(_log(tree.root_prior), log_beta[0].shape)
    q = [None] * levels
    for j in range(2, levels + 1):
        parent = log_alpha[j - 2] + log_beta[j - 2]
        parent = np.repeat(np.repeat(parent, 2, axis=0), 2, axis=1)
        # q(n) = log alpha_p(n) + log beta_{p \ i}(n)
        q[j - 1] = parent - log_msg[j - 1]
        log_eps = _log(tree.transition(j))
        log_alpha[j - 1] = logsumexp(q[j - 1][..., :, None] + log_eps[None, None], axis=-2)

    root_ll = logsumexp(log_alpha[0] + log_beta[0], axis=-1)
    loglik = float(root_ll.sum())

    gamma = [None] * levels
    xi = [None] * levels
    for j in range(1, levels + 1):
        k = 1 << (j - 1)
        ll = np.repeat(np.repeat(root_ll, k, axis=0), k, axis=1)[..., None]
        gamma[j - 1] = np.exp(log_alpha[j - 1] + log_beta[j - 1] - ll)
        if j > 1:
            log_eps = _log(tree.transition(j))
            lx = q[j - 1][..., :, None] + log_eps[None, None] + log_beta[j - 1][..., None, :]
            xi[j - 1] = np.exp(lx - ll[..., None])
    return loglik, gamma, xi


def _m_step(coeffs, gamma, xi, old: TreeParams, sigma_floor: float) -> TreeParams:
    levels = old.levels
    root = gamma[0].reshape(-1, 2).mean(axis=0)
    root = root / root.sum()

    sigmas = old.sigmas.copy()
    for j in range(levels):
        g = gamma[j].reshape(-1, 2)
        w2 = np.asarray(coeffs[j], dtype=np.float64).reshape(-1) ** 2
        mass = g.sum(axis=0)
        for m in (SMALL, LARGE):
            # an unused state keeps its previous sigma
            if mass[m] > 0:
                sigmas[j, m] = np.sqrt((g[:, m] @ w2) / mass[m])
    sigmas = np.maximum(sigmas, sigma_floor)

    trans = old.transitions.copy()
    for j in range(2, levels + 1):
        counts = xi[j - 1].reshape(-1, 2, 2).sum(axis=0)
        rows = counts.sum(axis=1)
        for p in (SMALL, LARGE):
            if rows[p] > 0:
                trans[j - 2, p] = counts[p] / rows[p]
    return TreeParams(root, trans, sigmas)


def relabel_states(tree: TreeParams) -> TreeParams:
    """Swap state labels scale by scale so that ``sigma_L >= sigma_S`` everywhere.

    Swapping the labels at scale ``j`` permutes the columns of the incoming
    transition (or the root prior) and the rows of the outgoing transition, so
    the modeled distribution is unchanged.
    """
    t = tree.copy()
    for j in range(1, t.levels + 1):
        if t.sigmas[j - 1, LARGE] >= t.sigmas[j - 1, SMALL]:
            continue
        t.sigmas[j - 1] = t.sigmas[j - 1, ::-1]
        if j == 1:
            t.root_prior = t.root_prior[::-1].copy()
        else:
            t.transitions[j - 2] = t.transitions[j - 2][:, ::-1]
        if j < t.levels:
            t.transitions[j - 1] = t.transitions[j - 1][::-1, :]
    return t


def data_driven_seed(pyramid: WaveletPyramid, sigma_floor: float = 1e-6) -> HmtParams:
    """Spread initialization: sigma_S = std / 2, sigma_L = 2 std, sticky transitions."""
    levels = pyramid.levels
    trans = np.tile(np.array([[0.8, 0.2], [0.2, 0.8]]), (levels - 1, 1, 1))
    trees = {}
    for b in ORIENTATIONS:
        std = np.array([np.std(pyramid.subband(j, b)) for j in range(1, levels + 1)])
        sigmas = np.maximum(np.stack([0.5 * std, 2.0 * std], axis=1), sigma_floor)
        trees[b] = TreeParams([0.5, 0.5], trans.copy(), sigmas)
    return HmtParams(trees)


def em_fit(pyramid: WaveletPyramid, config: EmConfig | None = None):
    """Fit tied HMT parameters to one pyramid by expectation-maximization.

    Parameters
    ----------
    pyramid : WaveletPyramid
        At least two scales, at least four coefficients per scale.
    config : EmConfig, optional

    Returns
    -------
    params : HmtParams
        Relabeled so that the large-variance state has the larger sigma at
        every scale.
    trace : EmTrace
    """
    config = config or EmConfig()
    if pyramid.levels < 2:
        raise InvalidInputError("EM needs at least two scales")
    if pyramid.scale_side(1) < 2:
        raise InvalidInputError("EM needs at least four coefficients per scale")
    coeffs = {b: [pyramid.subband(j, b) for j in range(1, pyramid.levels + 1)] for b in ORIENTATIONS}
    for b in ORIENTATIONS:
        for w in coeffs[b]:
            if not np.all(np.isfinite(w)):
                raise InvalidInputError("non-finite wavelet coefficient")

    if config.seed_params is not None:
        if config.seed_params.levels != pyramid.levels:
            raise InvalidInputError("seed parameters do not match the pyramid depth")
        trees = {b: config.seed_params[b].copy() for b in ORIENTATIONS}
    else:
        trees = data_driven_seed(pyramid, config.sigma_floor).trees
    for b in ORIENTATIONS:
        trees[b].sigmas = np.maximum(trees[b].sigmas, config.sigma_floor)

    trace = EmTrace()
    prev = None
    for it in range(config.max_iterations + 1):
        total = 0.0
        stats = {}
        for b in ORIENTATIONS:
            ll, gamma, xi = _e_step(coeffs[b], trees[b])
            total += ll
            stats[b] = (gamma, xi)
        trace.log_likelihoods.append(total)
        if prev is not None and abs(total - prev) <= config.rel_tolerance * abs(prev):
            trace.converged = True
            break
        if it == config.max_iterations:
            break
        prev = total
        trees = {
            b: _m_step(coeffs[b], *stats[b], trees[b], config.sigma_floor) for b in ORIENTATIONS
        }
        trace.iterations = it + 1
    logger.debug("EM stopped after %d iterations, LL=%.6g", trace.iterations, trace.log_likelihoods[-1])

    params = HmtParams({b: relabel_states(trees[b]) for b in ORIENTATIONS})
    trace.degenerate = bool(
        all(np.all(params[b].sigmas <= config.sigma_floor) for b in ORIENTATIONS)
    )
    return params, trace


def average_params(fits: list) -> HmtParams:
    """Geometric mean of sigmas, arithmetic mean of priors and transitions."""
    if not fits:
        raise InvalidInputError("nothing to average")
    trees = {}
    for b in ORIENTATIONS:
        sig = np.exp(np.mean([np.log(p[b].sigmas) for p in fits], axis=0))
        root = np.mean([p[b].root_prior for p in fits], axis=0)
        trans = np.mean([p[b].transitions for p in fits], axis=0)
        trees[b] = TreeParams(root / root.sum(), trans / trans.sum(axis=-1, keepdims=True), sig)
    return HmtParams(trees)


def fit_universal(corpus, config: EmConfig | None = None, levels: int = 5, return_fits: bool = False):
    """Fit every image of ``corpus`` independently and average the parameters.

    Parameters
    ----------
    corpus : iterable of GrayImage or WaveletPyramid
    config : EmConfig, optional
    levels : int
        Decomposition depth for images that are not yet pyramids.
    return_fits : bool
        Also return the per-image ``(params, trace)`` list.
    """
    fits = []
    for i, item in enumerate(corpus):
        try:
            pyr = item if isinstance(item, WaveletPyramid) else forward_haar(item, levels)
            fits.append(em_fit(pyr, config))
        except (MdisError, ValueError) as exc:
            raise EmFitError(i, exc) from exc
    if not fits:
        raise InvalidInputError("corpus is empty")
    params = average_params([p for p, _ in fits])
    return (params, fits) if return_fits else params
