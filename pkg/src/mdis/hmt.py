"""Wavelet hidden Markov tree: parameters, upward sweep and subtree likelihoods.

Every detail orientation carries its own tree model with two hidden states,
``S`` (index 0, small variance) and ``L`` (index 1, large variance).  Each
coefficient is a zero-mean Gaussian given its state, and states follow a
first-order Markov chain from parent to child.  Parameters are tied across all
nodes of a scale.

Class labels reuse the state indices: surround is 0 (``S``) and center is 1
(``L``).

All likelihoods are natural logs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConfigurationError, InvalidInputError
from .haar import ORIENTATIONS, WaveletPyramid

SMALL, LARGE = 0, 1
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
PARAMS_FORMAT = "mdis-hmt-params"
PARAMS_VERSION = 1
UNIVERSAL_RESOURCE = "universal_params.json"


@dataclass
class TreeParams:
    """Tied parameters of one orientation tree.

    Attributes
    ----------
    root_prior : ndarray of shape (2,)
        State probabilities at scale 1.
    transitions : ndarray of shape (levels - 1, 2, 2)
        ``transitions[j - 2][p, m] = P(child state m | parent state p)`` for
        the parent-child link into scale ``j``.
    sigmas : ndarray of shape (levels, 2)
        ``sigmas[j - 1] = (sigma_S, sigma_L)`` at scale ``j``.
    """

    root_prior: np.ndarray
    transitions: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.root_prior = np.asarray(self.root_prior, dtype=np.float64).reshape(2)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64).reshape(-1, 2)
        self.transitions = np.asarray(self.transitions, dtype=np.float64).reshape(-1, 2, 2)
        if len(self.transitions) != len(self.sigmas) - 1:
            raise InvalidInputError(
                f"{len(self.sigmas)} sigma pairs need {len(self.sigmas) - 1} transition matrices, "
                f"got {len(self.transitions)}"
            )

    @property
    def levels(self) -> int:
        return len(self.sigmas)

    def transition(self, scale: int) -> np.ndarray:
        """Matrix governing the link from scale ``scale - 1`` into ``scale``."""
        return self.transitions[scale - 2]

    def copy(self) -> "TreeParams":
        return TreeParams(self.root_prior.copy(), self.transitions.copy(), self.sigmas.copy())

    def check(self, atol: float = 1e-12) -> None:
        """Raise :class:`InvalidInputError` if an invariant is violated."""
        if np.any(self.root_prior < 0) or abs(self.root_prior.sum() - 1) > atol:
            raise InvalidInputError(f"root prior {self.root_prior} is not a distribution")
        if np.any(self.transitions < 0) or np.any(np.abs(self.transitions.sum(-1) - 1) > atol):
            raise InvalidInputError("transition rows must be distributions")
        if not np.all(np.isfinite(self.sigmas)) or np.any(self.sigmas <= 0):
            raise InvalidInputError("sigmas must be positive and finite")
        if np.any(self.sigmas[:, LARGE] < self.sigmas[:, SMALL]):
            raise InvalidInputError("sigma_L must be >= sigma_S at every scale")


@dataclass
class HmtParams:
    """One :class:`TreeParams` per detail orientation."""

    trees: dict

    def __post_init__(self):
        missing = set(ORIENTATIONS) - set(self.trees)
        if missing:
            raise InvalidInputError(f"missing orientations {sorted(missing)}")
        levels = {t.levels for t in self.trees.values()}
        if len(levels) != 1:
            raise InvalidInputError(f"orientations disagree on depth: {levels}")

    @property
    def levels(self) -> int:
        return self.trees["LH"].levels

    def __getitem__(self, orientation: str) -> TreeParams:
        return self.trees[orientation]

    def check(self, atol: float = 1e-12) -> None:
        for b in ORIENTATIONS:
            self.trees[b].check(atol)

    def copy(self) -> "HmtParams":
        return HmtParams({b: t.copy() for b, t in self.trees.items()})

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": PARAMS_FORMAT,
            "version": PARAMS_VERSION,
            "levels": self.levels,
            "orientations": {
                b: {
                    "rootPrior": self.trees[b].root_prior.tolist(),
                    "transitions": self.trees[b].transitions.tolist(),
                    "sigmas": self.trees[b].sigmas.tolist(),
                }
                for b in ORIENTATIONS
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HmtParams":
        try:
            if doc.get("format") != PARAMS_FORMAT:
                raise ConfigurationError(f"not an HMT parameter document: format={doc.get('format')!r}")
            if doc.get("version") != PARAMS_VERSION:
                raise ConfigurationError(f"unsupported parameter version {doc.get('version')!r}")
            trees = {}
            for b in ORIENTATIONS:
                o = doc["orientations"][b]
                trees[b] = TreeParams(o["rootPrior"], o["transitions"], o["sigmas"])
            params = cls(trees)
            if params.levels != doc["levels"]:
                raise ConfigurationError(f"levels={doc['levels']} disagrees with {params.levels} sigma pairs")
            params.check(atol=1e-9)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed HMT parameters: {exc}") from exc
        return params

    def to_json(self) -> str:
        # repr-based float formatting round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical compact JSON encoding."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_params(params: HmtParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(params.to_json())
        fh.write("\n")


def load_params(path) -> HmtParams:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"parameter file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    return HmtParams.from_dict(doc)


def default_universal_params(levels: int = 5) -> HmtParams:
    """Shipped universal parameters, truncated to the finest ``levels`` scales.

    The shipped file is fitted at full depth; a shallower request keeps the
    finest scales (sigma depends on absolute resolution) and replaces the root
    prior by the marginal state distribution at the new coarsest scale.
    """
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    try:
        text = resources.files("mdis.data").joinpath(UNIVERSAL_RESOURCE).read_text("utf-8")
        full = HmtParams.from_dict(json.loads(text))
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"shipped universal parameters unavailable: {exc}") from exc
    if levels > full.levels:
        raise ConfigurationError(f"universal parameters cover {full.levels} scales, {levels} requested")
    if levels == full.levels:
        return full
    drop = full.levels - levels
    trees = {}
    for b, t in full.trees.items():
        prior = scale_priors(t)[drop]
        trees[b] = TreeParams(prior, t.transitions[drop:], t.sigmas[drop:])
    return HmtParams(trees)


# -- node priors ------------------------------------------------------------


def scale_priors(tree: TreeParams) -> np.ndarray:
    """Marginal state distribution per scale, shape ``(levels, 2)``.

    With tied parameters all nodes of a scale share the same prior.
    """
    out = np.empty((tree.levels, 2))
    out[0] = tree.root_prior
    for j in range(2, tree.levels + 1):
        out[j - 1] = out[j - 2] @ tree.transition(j)
    return out


def node_priors(params: HmtParams) -> dict:
    """Per-orientation marginal state priors, ``priors[b][j - 1] = p(S = m)`` at scale ``j``."""
    return {b: scale_priors(params[b]) for b in ORIENTATIONS}


# -- upward sweep -----------------------------------------------------------


def log_gauss(w: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Log density of zero-mean Gaussians; broadcasts ``w[..., None]`` against ``sigma``."""
    w = np.asarray(w, dtype=np.float64)[..., None]
    return -LOG_SQRT_2PI - np.log(sigma) - 0.5 * (w / sigma) ** 2


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def child_message(log_beta_child: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """``log sum_m' trans[m, m'] * beta_child(m')`` for every child, shape ``(..., 2)``."""
    return logsumexp(_log(trans)[None, None, :, :] + log_beta_child[:, :, None, :], axis=-1)


def sum_children(values: np.ndarray) -> np.ndarray:
    """Sum a ``(2s, 2s, k)`` child grid over each 2x2 sibling block -> ``(s, s, k)``."""
    n = values.shape[0] // 2
    return values.reshape(n, 2, n, 2, -1).sum(axis=(1, 3))


def upward_tree(coeffs: list, tree: TreeParams):
    """Upward sweep over one orientation forest.

    Parameters
    ----------
    coeffs : list of ndarray
        ``coeffs[j - 1]`` is the scale-``j`` grid, coarse to fine.
    tree : TreeParams

    Returns
    -------
    log_beta : list of ndarray
        ``log_beta[j - 1][r, c, m] = log f(subtree at (r, c) | state m)``.
    log_msg : list of ndarray
        ``log_msg[j - 1]`` holds each scale-``j`` node's message to its
        parent (``None`` at scale 1).
    """
    levels = len(coeffs)
    if levels != tree.levels:
        raise InvalidInputError(f"pyramid has {levels} scales, parameters have {tree.levels}")
    log_beta = [None] * levels
    log_msg = [None] * levels
    for j in range(levels, 0, -1):
        w = np.asarray(coeffs[j - 1], dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise InvalidInputError(f"non-finite coefficient at scale {j}")
        lb = log_gauss(w, tree.sigmas[j - 1])
        if j < levels:
            lb = lb + sum_children(log_msg[j])
        log_beta[j - 1] = lb
        if j > 1:
            log_msg[j - 1] = child_message(lb, tree.transition(j))
    return log_beta, log_msg


def upward_sweep(pyramid: WaveletPyramid, params: HmtParams) -> dict:
    """Conditional subtree log-likelihoods for every node of every orientation.

    Returns ``beta[b][j - 1]`` of shape ``(side_j, side_j, 2)``.
    """
    if pyramid.levels != params.levels:
        raise InvalidInputError(f"pyramid depth {pyramid.levels} != parameter depth {params.levels}")
    return {
        b: upward_tree([pyramid.subband(j, b) for j in range(1, pyramid.levels + 1)], params[b])[0]
        for b in ORIENTATIONS
    }


def _node(grid: np.ndarray, node) -> np.ndarray:
    r, c = node
    side = grid.shape[0]
    if not (0 <= r < side and 0 <= c < side):
        raise IndexError(f"node {node} outside a {side}x{side} scale")
    return grid[r, c]


def subtree_likelihood(beta: dict, priors: dict, orientation: str, scale: int, node) -> float:
    """``log sum_m beta_i(m) p(S_i = m)`` for the subtree rooted at ``node = (row, col)``."""
    if not 1 <= scale <= len(beta[orientation]):
        raise IndexError(f"scale {scale} out of range")
    lb = _node(beta[orientation][scale - 1], node)
    return float(logsumexp(lb + _log(priors[orientation][scale - 1])))


def square_class_log_likelihoods(beta: dict, scale: int) -> np.ndarray:
    """Vectorized :func:`square_class_likelihood` over a whole scale, shape ``(side, side, 2)``."""
    if not 1 <= scale <= len(beta["LH"]):
        raise IndexError(f"scale {scale} out of range")
    return sum(beta[b][scale - 1] for b in ORIENTATIONS)


def square_class_likelihood(beta: dict, scale: int, node, c: int) -> float:
    """Log-likelihood of the dyadic square at ``node`` given class ``c``.

    The three orientation subtrees are independent, each with its root state
    fixed to ``c``.
    """
    if c not in (0, 1):
        raise IndexError(f"class must be 0 or 1, got {c}")
    return float(_node(square_class_log_likelihoods(beta, scale), node)[c])


# -- simulation -------------------------------------------------------------


def sample_tree(tree: TreeParams, root_side: int, rng: np.random.Generator):
    """Draw hidden states and coefficients for one orientation forest.

    Returns ``(states, coeffs)``, both lists of grids ordered coarse to fine.
    """
    states = [(rng.random((root_side, root_side)) < tree.root_prior[LARGE]).astype(np.int64)]
    for j in range(2, tree.levels + 1):
        parent = np.repeat(np.repeat(states[-1], 2, axis=0), 2, axis=1)
        p_large = tree.transition(j)[parent, LARGE]
        states.append((rng.random(parent.shape) < p_large).astype(np.int64))
    coeffs = [rng.standard_normal(s.shape) * tree.sigmas[j][s] for j, s in enumerate(states)]
    return states, coeffs


def sample_pyramid(params: HmtParams, root_side: int, rng) -> WaveletPyramid:
    """Synthetic pyramid drawn from ``params`` with a zero approximation band."""
    rng = np.random.default_rng(rng)
    details = [dict() for _ in range(params.levels)]
    for b in ORIENTATIONS:
        _, coeffs = sample_tree(params[b], root_side, rng)
        for j, w in enumerate(coeffs):
            details[j][b] = w
    side = root_side << params.levels
    return WaveletPyramid(details, np.zeros((root_side, root_side)), (side, side))


def log_likelihood(pyramid: WaveletPyramid, params: HmtParams) -> float:
    """Total log-likelihood of all detail coefficients under ``params``."""
    beta = upward_sweep(pyramid, params)
    return float(
        sum(logsumexp(beta[b][0] + _log(params[b].root_prior), axis=-1).sum() for b in ORIENTATIONS)
    )
