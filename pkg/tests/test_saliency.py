import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import binary_entropy
from mdis.exceptions import InvalidInputError
from mdis.fusion import PosteriorGrid
from mdis.io import pad_to_dyadic
from mdis.saliency import (
    FUSED,
    SaliencyMap,
    compute_saliency,
    fuse_max,
    mi_map,
    normalize_map,
    scale_entropy,
    upsample_to_pixels,
)
from mdis.train import EmConfig


def grid_of(p1):
    p1 = np.asarray(p1, dtype=float)
    post = np.stack([1 - p1, p1], axis=-1)
    return PosteriorGrid(1, post, (p1 > 0.5).astype(np.int8))


class TestEntropyAndMI:
    def test_scale_entropy_examples(self):
        assert scale_entropy(grid_of([[0.5, 0.5], [0.5, 0.5]])) == pytest.approx(np.log(2), rel=1e-12)
        assert scale_entropy(grid_of([[0.0, 0.0], [0.0, 0.0]])) == 0.0
        assert scale_entropy(grid_of([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(np.log(2), rel=1e-12)

    def test_mi_examples(self):
        H = np.log(2)
        m = mi_map(grid_of([[0.0, 0.5, 0.9]]), H)
        np.testing.assert_allclose(m, [[np.log(2), 0.0, 0.368064]], atol=1e-6)
        assert m[0, 2] == pytest.approx(np.log(2) - binary_entropy(0.9), rel=1e-12)

    def test_certain_nodes_of_either_class_score_h(self):
        # the class marginal is scale-wide, so a confident surround node and a
        # confident center node carry the same information
        g = grid_of([[0.0, 1.0], [0.0, 0.0]])
        H = scale_entropy(g)
        np.testing.assert_allclose(mi_map(g, H), H, rtol=1e-15)

    def test_clamp(self):
        g = grid_of([[0.5, 0.99]])
        assert np.all(mi_map(g, 0.1) >= 0)
        assert mi_map(g, 0.1, clamp=False)[0, 0] < 0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31))
    def test_mi_bounded(self, n, seed):
        g = grid_of(np.random.default_rng(seed).random((n, n)))
        m = mi_map(g, scale_entropy(g))
        assert np.all(m >= 0) and np.all(m <= np.log(2) + 1e-12)

    def test_empty_grid(self):
        with pytest.raises(InvalidInputError):
            scale_entropy(PosteriorGrid(1, np.zeros((0, 0, 2)), np.zeros((0, 0), np.int8)))


class TestMaps:
    def test_upsample_block(self):
        out = upsample_to_pixels(np.array([[1.0, 2.0], [3.0, 4.0]]), 4, tag="HMT1")
        np.testing.assert_array_equal(out.data, [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])
        assert out.tag == "HMT1"

    def test_upsample_crop(self):
        out = upsample_to_pixels(np.array([[1.0, 2.0], [3.0, 4.0]]), 4, crop=(3, 2))
        np.testing.assert_array_equal(out.data, [[1, 1, 2], [1, 1, 2]])

    def test_upsample_rejects_bad_side(self):
        with pytest.raises(InvalidInputError):
            upsample_to_pixels(np.ones((3, 3)), 8)

    def test_fuse_max_dominates(self, rng):
        maps = [SaliencyMap(rng.random((6, 5)), f"HMT{j}") for j in range(1, 4)]
        fused = fuse_max(maps)
        assert fused.tag == FUSED
        for m in maps:
            assert np.all(fused.data >= m.data)
        np.testing.assert_array_equal(fused.data, np.maximum.reduce([m.data for m in maps]))

    def test_fuse_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            fuse_max([SaliencyMap(np.ones((2, 2)), "a"), SaliencyMap(np.ones((2, 3)), "b")])
        with pytest.raises(InvalidInputError):
            fuse_max([])

    def test_normalize(self):
        out = normalize_map(SaliencyMap(np.array([[2.0, 4.0], [3.0, 6.0]]), "x"))
        np.testing.assert_allclose(out.data, [[0, 0.5], [0.25, 1]])
        np.testing.assert_array_equal(normalize_map(SaliencyMap(np.full((3, 3), 7.0), "x")).data, 0.0)


class TestPipeline:
    @pytest.mark.parametrize("mode", ["UHMT", "THMT"])
    def test_flat_image_gives_zero_maps(self, mode):
        res = compute_saliency(pad_to_dyadic(np.full((64, 64), 0.5)), mode=mode, levels=4)
        for tag, m in res.maps.items():
            np.testing.assert_array_equal(m.data, 0.0, err_msg=tag)

    def test_modes_share_layout(self, rng):
        img = pad_to_dyadic(rng.random((50, 70)))
        u = compute_saliency(img, mode="UHMT", levels=4)
        t = compute_saliency(img, mode="THMT", levels=4, em_config=EmConfig(max_iterations=5))
        assert list(u.maps) == list(t.maps) == ["HMT0", "HMT1", "HMT2", "HMT3", "HMT4"]
        for tag in u.maps:
            assert u.maps[tag].shape == t.maps[tag].shape == (50, 70)
        assert t.trace is not None and u.trace is None

    def test_outputs_normalized_and_fused(self, rng):
        res = compute_saliency(pad_to_dyadic(rng.random((64, 64))), levels=4)
        for m in res.maps.values():
            assert m.data.min() >= 0 and m.data.max() <= 1
        for tag, m in res.raw.items():
            assert np.all(m.data <= np.log(2) + 1e-12)
            assert np.all(res.raw[FUSED].data >= m.data)

    def test_rounding_residue_is_constant(self):
        x = np.full((4, 4), 0.0805)
        x[1, 2] = np.nextafter(0.0805, 1.0)
        np.testing.assert_array_equal(normalize_map(SaliencyMap(x, "x")).data, 0.0)

    def test_bad_mode(self, rng):
        with pytest.raises(InvalidInputError):
            compute_saliency(pad_to_dyadic(rng.random((8, 8))), mode="BOTH", levels=2)
