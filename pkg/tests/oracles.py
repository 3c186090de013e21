"""Independent reference computations used to freeze expected values.

Nothing here calls into the package's likelihood code; densities are
written out by hand and summed over explicit state enumerations.
"""

import itertools
import math

import numpy as np

CHILDREN = [(0, 0), (0, 1), (1, 0), (1, 1)]


def _log_gauss(w, sigma):
    return -0.5 * (w / sigma) ** 2 - math.log(sigma) - 0.5 * math.log(2 * math.pi)


def _logsumexp(xs):
    xs = [x for x in xs if x != -math.inf]
    if not xs:
        return -math.inf
    top = max(xs)
    return top + math.log(sum(math.exp(x - top) for x in xs))


def _log(p):
    return math.log(p) if p > 0 else -math.inf


def depth2_joint_log_terms(root_prior, trans, sigmas, w_root, w_children):
    """Yield ``(states, log joint density)`` for all 32 state assignments of a 5-node tree.

    ``trans[p][m] = P(child m | parent p)``; ``sigmas[scale][state]``.
    """
    for states in itertools.product((0, 1), repeat=5):
        s0, kids = states[0], states[1:]
        lp = _log(root_prior[s0]) + _log_gauss(w_root, sigmas[0][s0])
        for k, (r, c) in enumerate(CHILDREN):
            lp += _log(trans[s0][kids[k]]) + _log_gauss(w_children[r][c], sigmas[1][kids[k]])
        yield states, lp


def depth2_loglik(root_prior, trans, sigmas, w_root, w_children):
    return _logsumexp(lp for _, lp in depth2_joint_log_terms(root_prior, trans, sigmas, w_root, w_children))


def depth2_root_conditional(root_state, trans, sigmas, w_root, w_children):
    """log f(tree | root state) by enumerating the four children's states."""
    prior = [0.0, 0.0]
    prior[root_state] = 1.0
    terms = depth2_joint_log_terms(prior, trans, sigmas, w_root, w_children)
    return _logsumexp(lp for states, lp in terms if states[0] == root_state)


def binary_entropy(p):
    return -sum(q * np.log(q) for q in (p, 1 - p) if q > 0)


def mann_whitney_auc(scores, positive):
    """Probability a random positive outranks a random negative, ties count half."""
    pos = scores[positive]
    neg = scores[~positive]
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (greater + 0.5 * ties) / (pos.size * neg.size)


def gaussian_sum_bruteforce(points, frame, sigma):
    w, h = frame
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = sum(np.exp(-((x - px) ** 2 + (y - py) ** 2) / (2 * sigma**2)) for px, py in points)
    return out / out.max()
