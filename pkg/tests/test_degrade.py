import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenrec.degrade import (Observation, add_gaussian, add_salt_pepper, observe, quantize, quantize_dithered,
                            sample_mask, smooth_lowrank)


class TestMask:
    def test_extremes(self):
        assert sample_mask((4, 5), 1.0, 0).all()
        assert not sample_mask((4, 5), 0.0, 0).any()

    def test_exact_count(self):
        assert sample_mask((10, 10, 10), 0.3, 1).sum() == 300

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=4), st.floats(0, 1), st.integers(0, 99))
    def test_count_property(self, shape, sr, seed):
        m = sample_mask(tuple(shape), sr, seed)
        assert m.sum() == int(round(sr * np.prod(shape)))

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            sample_mask((3,), 1.5)


class TestSaltPepper:
    def test_zero_ratio(self):
        x = np.random.default_rng(0).uniform(size=(5, 5))
        assert np.array_equal(add_salt_pepper(x, 0.0, 1), x)

    def test_full_ratio(self):
        out = add_salt_pepper(np.full((6, 6), 0.5), 1.0, 2)
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_changed_count(self):
        x = np.random.default_rng(3).uniform(0.2, 0.8, size=(20, 20, 20))
        out = add_salt_pepper(x, 0.1, 4)
        changed = out != x
        assert changed.sum() == 800
        assert set(np.unique(out[changed])) == {0.0, 1.0}
        assert (out[changed] == 0).sum() == 400


class TestGaussian:
    def test_zero_sigma(self):
        x = np.arange(6.0)
        assert np.array_equal(add_gaussian(x, 0.0, 1), x)

    def test_moments(self):
        x = np.zeros(10**5)
        d = add_gaussian(x, 0.3, 5) - x
        assert abs(d.std() - 0.3) <= 0.05 * 0.3
        assert abs(d.mean()) <= 3 * 0.3 / np.sqrt(d.size)


class TestQuantize:
    def test_examples(self):
        assert quantize_dithered(0.3, 1.0, 0.1) == 0.5
        assert quantize(0.0, 0.5) == 0.25

    def test_dithered_mean_unbiased(self):
        rng = np.random.default_rng(6)
        n, x, delta = 10**5, 0.37, 0.3
        q = quantize_dithered(np.full(n, x), delta, rng.uniform(-delta / 2, delta / 2, n))
        assert abs(q.mean() - x) <= 3 * (delta / 2) / np.sqrt(n)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.01, 2))
    def test_codomain_and_error(self, u, delta):
        q = float(quantize(u, delta))
        k = q / delta - 0.5
        assert abs(k - round(k)) < 1e-6
        assert abs(q - u) <= delta / 2 + 1e-12


class TestObserve:
    def test_clean_full(self):
        x = np.random.default_rng(7).uniform(size=(3, 4, 5))
        obs = observe(x, seed=1)
        assert np.array_equal(obs.filled(), x)
        assert obs.mask.all()

    def test_quantized_codomain(self):
        x = np.random.default_rng(8).uniform(size=(6, 6, 6))
        delta = 0.2
        obs = observe(x, sr=0.5, sigma=0.1, delta=delta, seed=2)
        k = obs.values / delta - 0.5
        assert np.allclose(k, np.round(k), atol=1e-9)
        assert obs.indices.size == 108

    def test_reproducible(self):
        x = np.random.default_rng(9).uniform(size=(6, 5, 4))
        a = observe(x, sr=0.4, nr=0.1, sigma=0.05, delta=0.1, seed=3)
        b = observe(x, sr=0.4, nr=0.1, sigma=0.05, delta=0.1, seed=3)
        assert np.array_equal(a.indices, b.indices) and np.array_equal(a.values, b.values)

    def test_one_bit(self):
        x = np.random.default_rng(10).uniform(-1, 1, size=(5, 5, 5))
        obs = observe(x, sr=0.6, one_bit=True, dither_width=0.5, seed=4)
        assert set(np.unique(obs.values)) <= {-1.0, 1.0}
        with pytest.raises(ValueError):
            observe(x, one_bit=True, delta=0.1)

    def test_intermediates(self):
        x = np.full((8, 8, 8), 0.5)
        obs, aux = observe(x, sr=1.0, nr=0.2, seed=5, full_output=True)
        assert (aux["corrupted"] != x).sum() == round(0.2 * 512)
        assert np.array_equal(obs.filled(), aux["noisy"])

    def test_observation_validation(self):
        with pytest.raises(ValueError):
            Observation((2, 2), [0, 5], [1.0, 2.0])
        with pytest.raises(ValueError):
            Observation((2, 2), [0], [1.0, 2.0])

    def test_from_mask_column_major(self):
        m = np.arange(6.0).reshape(2, 3)
        mask = np.zeros((2, 3), dtype=bool)
        mask[1, 0] = mask[0, 2] = True
        obs = Observation.from_mask(m, mask)
        assert obs.indices.tolist() == [1, 4]
        assert obs.values.tolist() == [3.0, 2.0]


def test_smooth_lowrank_range_and_rank():
    x = smooth_lowrank((20, 18, 16), (2, 3, 2), seed=1)
    assert x.min() == pytest.approx(0.0) and x.max() == pytest.approx(1.0)
    for k, r in enumerate((2, 3, 2)):
        s = np.linalg.svd(np.moveaxis(x, k, 0).reshape(x.shape[k], -1), compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) <= r + 1
