import doctest
from importlib import resources
from pathlib import Path

import pytest

import mdis.estimator
from mdis.cli import main
from mdis.hmt import load_params

ROOT = Path(__file__).resolve().parents[1]


def test_estimator_doctest():
    result = doctest.testmod(mdis.estimator)
    assert result.attempted > 0 and result.failed == 0


@pytest.mark.slow
@pytest.mark.skipif(not (ROOT / "calibration").is_dir(), reason="calibration corpus not checked out")
def test_universal_params_regenerate(tmp_path):
    out = tmp_path / "universal_params.json"
    assert main(["fit-universal", str(ROOT / "calibration"), "-o", str(out)]) == 0
    committed = resources.files("mdis.data").joinpath("universal_params.sha256").read_text().strip()
    assert load_params(out).fingerprint() == committed
