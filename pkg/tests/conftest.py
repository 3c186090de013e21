import numpy as np
import pytest

from mdis.haar import ORIENTATIONS
from mdis.hmt import HmtParams, TreeParams

_ACCEPTANCE = []


def record_acceptance(name, passed, detail=""):
    _ACCEPTANCE.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_params(levels=3, sigmas=None, root=(0.5, 0.5), stay=(0.9, 0.8)):
    if sigmas is None:
        sigmas = [[0.5 * 2.0 ** (levels - j), 4.0 * 2.0 ** (levels - j)] for j in range(1, levels + 1)]
    trans = [[[stay[0], 1 - stay[0]], [1 - stay[1], stay[1]]]] * (levels - 1)
    return HmtParams({b: TreeParams(root, trans, sigmas) for b in ORIENTATIONS})


@pytest.fixture
def known_params():
    return make_params(3, sigmas=[[1.0, 8.0], [0.7, 5.0], [0.5, 3.0]], stay=(0.9, 0.8))


def write_pgm_ascii(path, rows, maxval=255):
    h, w = len(rows), len(rows[0])
    body = "\n".join(" ".join(str(v) for v in r) for r in rows)
    path.write_text(f"P2\n{w} {h}\n{maxval}\n{body}\n")
    return path
