"""Center/surround labeling of dyadic squares with coarse-to-fine context fusion.

At scale ``j >= 2`` every square's class prior is conditioned on a context
value made of its quad-tree parent's label and the majority label among the
parent's (up to eight) neighbours at scale ``j - 1``.  The four context values
are encoded as ``v = 2 * parent_label + majority``.

Ties always go to class 0 (surround); majority ties go to the parent label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import correlate
from scipy.special import logsumexp

from .haar import ORIENTATIONS
from .hmt import _log, square_class_log_likelihoods

logger = logging.getLogger(__name__)

N_CONTEXTS = 4
_NEIGHBOURS = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])


@dataclass
class LabelGrid:
    scale: int
    labels: np.ndarray

    @property
    def side(self) -> int:
        return self.labels.shape[0]


@dataclass
class PosteriorGrid:
    """Posterior class pair and MAP label per node of one scale.

    ``context_table`` is the ``(4, 2)`` prior table used at this scale
    (``None`` at scale 1) and ``rounds`` the number of prior-estimation rounds.
    """

    scale: int
    posterior: np.ndarray
    labels: np.ndarray
    context_table: np.ndarray | None = None
    rounds: int = 0

    @property
    def side(self) -> int:
        return self.labels.shape[0]

    def label_grid(self) -> LabelGrid:
        return LabelGrid(self.scale, self.labels)


class ContextValue(NamedTuple):
    parent_label: int
    neighborhood_majority: int

    @property
    def index(self) -> int:
        return 2 * self.parent_label + self.neighborhood_majority


def uniform_context_table() -> np.ndarray:
    return np.full((N_CONTEXTS, 2), 0.5)


def argmax_label(pair: np.ndarray) -> np.ndarray:
    """Class 1 only when it strictly wins."""
    return (pair[..., 1] > pair[..., 0]).astype(np.int8)


def raw_ml_labels(beta: dict, scale: int) -> LabelGrid:
    """Per-square maximum-likelihood class, without any prior."""
    return LabelGrid(scale, argmax_label(square_class_log_likelihoods(beta, scale)))


def _majority(parent: np.ndarray) -> np.ndarray:
    p = parent.astype(np.int64)
    ones = correlate(p, _NEIGHBOURS, mode="constant", cval=0)
    count = correlate(np.ones_like(p), _NEIGHBOURS, mode="constant", cval=0)
    zeros = count - ones
    return np.where(ones > zeros, 1, np.where(zeros > ones, 0, p))


def context_grid(parent_labels: LabelGrid) -> np.ndarray:
    """Context index ``2 * parent + majority`` for every node of the next finer scale."""
    p = parent_labels.labels.astype(np.int64)
    v = 2 * p + _majority(p)
    return np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)


def context_of(parent_labels: LabelGrid, node) -> ContextValue:
    """Context of the scale-``j`` node ``(row, col)`` given the scale ``j - 1`` labels."""
    r, c = node
    pr, pc = r // 2, c // 2
    grid = parent_labels.labels
    if not (0 <= pr < grid.shape[0] and 0 <= pc < grid.shape[1]) or r < 0 or c < 0:
        raise IndexError(f"node {node} has no parent in a {grid.shape[0]}x{grid.shape[1]} grid")
    parent = int(grid[pr, pc])
    window = grid[max(pr - 1, 0): pr + 2, max(pc - 1, 0): pc + 2]
    ones = int(window.sum()) - parent
    zeros = window.size - 1 - ones
    majority = 1 if ones > zeros else 0 if zeros > ones else parent
    return ContextValue(parent, majority)


def _posterior(loglik: np.ndarray, log_prior: np.ndarray, scale: int, **extra) -> PosteriorGrid:
    lp = loglik + log_prior
    post = np.exp(lp - logsumexp(lp, axis=-1, keepdims=True))
    return PosteriorGrid(scale, post, argmax_label(post), **extra)


def fuse_scale(beta: dict, priors: np.ndarray, parent_labels: LabelGrid, scale: int) -> PosteriorGrid:
    """Context-conditioned posterior ``P(c | d, v) ~ f(d | c) p(c | v)`` at ``scale``.

    Parameters
    ----------
    beta : dict
        Output of :func:`mdis.hmt.upward_sweep`.
    priors : ndarray of shape (4, 2)
        ``priors[v, c] = p(c | v)``.
    parent_labels : LabelGrid
        Final labels at ``scale - 1``.
    scale : int
        At least 2.
    """
    if scale < 2:
        raise ValueError("context fusion needs a coarser scale")
    loglik = square_class_log_likelihoods(beta, scale)
    v = context_grid(parent_labels)
    if v.shape != loglik.shape[:2]:
        raise ValueError(f"parent grid {parent_labels.labels.shape} does not match scale {scale}")
    table = np.asarray(priors, dtype=np.float64)
    return _posterior(loglik, _log(table)[v], scale, context_table=table)


def estimate_context_table(labels: np.ndarray, contexts: np.ndarray) -> np.ndarray:
    """Laplace-smoothed relative frequency ``(n_vc + 1) / (n_v + 2)``."""
    counts = np.zeros((N_CONTEXTS, 2))
    np.add.at(counts, (contexts.ravel(), labels.ravel().astype(np.int64)), 1.0)
    return (counts + 1.0) / (counts.sum(axis=1, keepdims=True) + 2.0)


def fit_context_priors(beta: dict, scale: int, parent_labels: LabelGrid, max_rounds: int = 10):
    """Alternate prior estimation and fusion until the labels stop changing.

    Starts from the raw ML labels.  Returns ``(table, grid)``; ``grid.rounds``
    counts the fusion passes performed.
    """
    if scale < 2:
        raise ValueError("context priors need a coarser scale")
    contexts = context_grid(parent_labels)
    labels = raw_ml_labels(beta, scale).labels
    grid = None
    for rnd in range(1, max_rounds + 1):
        table = estimate_context_table(labels, contexts)
        grid = fuse_scale(beta, table, parent_labels, scale)
        grid.rounds = rnd
        if np.array_equal(grid.labels, labels):
            break
        labels = grid.labels
    else:
        logger.debug("context priors at scale %d did not settle in %d rounds", scale, max_rounds)
    return grid.context_table, grid


def fuse_all_scales(beta: dict, priors: dict, max_rounds: int = 10, context_priors=None) -> list:
    """Coarse-to-fine MAP labeling of every scale.

    Parameters
    ----------
    beta : dict
        Output of :func:`mdis.hmt.upward_sweep`.
    priors : dict
        Output of :func:`mdis.hmt.node_priors`; scale 1 uses the product of
        the three orientation priors for class ``c``.
    max_rounds : int
        Cap for :func:`fit_context_priors`.
    context_priors : mapping of int to ndarray, optional
        Fixed ``(4, 2)`` tables by scale; fitted per image when omitted.

    Returns
    -------
    list of PosteriorGrid, coarsest first.
    """
    levels = len(beta["LH"])
    log_root = sum(_log(priors[b][0]) for b in ORIENTATIONS)
    grids = [_posterior(square_class_log_likelihoods(beta, 1), log_root, 1)]
    for j in range(2, levels + 1):
        parent = grids[-1].label_grid()
        if context_priors is not None:
            grid = fuse_scale(beta, context_priors[j], parent, j)
        else:
            _, grid = fit_context_priors(beta, j, parent, max_rounds)
        grids.append(grid)
    return grids
