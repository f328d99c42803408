import numpy as np
import pytest

from tenrec.sketch import SketchSpec, default_factor_shapes, khatri_rao, make_sketch, real_dft_columns, srft_block


def test_gaussian_moments():
    g = make_sketch(SketchSpec("gaussian", seed=1), 1000, 100)
    assert abs(g.mean()) < 0.02
    assert abs(g.var() - 1) < 0.05


def test_uniform_moments_and_support():
    g = make_sketch(SketchSpec("uniform", seed=2), 1000, 100)
    assert np.all(np.abs(g) <= np.sqrt(3))
    assert abs(g.mean()) < 0.02
    assert abs(g.var() - 1) < 0.05


def test_seed_reproducible():
    s = SketchSpec("kr-gaussian", seed=9)
    assert np.array_equal(make_sketch(s, 12, 4), make_sketch(s, 12, 4))
    assert not np.array_equal(make_sketch(s, 12, 4), make_sketch(SketchSpec("kr-gaussian", seed=10), 12, 4))


def test_khatri_rao_columns():
    s = SketchSpec("kr-gaussian", factor_shapes=((2, 3), (4, 3)), seed=3)
    g = make_sketch(s, 8, 3)
    assert g.shape == (8, 3)
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, 3)), rng.standard_normal((4, 3))
    for j in range(3):
        assert np.allclose(g[:, j], np.kron(a[:, j], b[:, j]))
    assert np.allclose(khatri_rao([a, b]), g)


def test_khatri_rao_shape_mismatch():
    with pytest.raises(ValueError):
        make_sketch(SketchSpec("kr-uniform", factor_shapes=((2, 3), (4, 2))), 8, 3)
    with pytest.raises(ValueError):
        make_sketch(SketchSpec("kr-uniform", factor_shapes=((2, 3), (3, 3))), 8, 3)


def test_real_dft_basis_orthonormal():
    for n in (1, 2, 5, 8):
        f = real_dft_columns(n, np.arange(n))
        assert np.allclose(f.T @ f, np.eye(n), atol=1e-12)


def test_srft_block_columns_orthonormal():
    b = srft_block(np.random.default_rng(0), 16, 5)
    assert np.allclose(b.T @ b, np.eye(5), atol=1e-12)
    with pytest.raises(ValueError):
        srft_block(np.random.default_rng(0), 3, 4)


def test_kronecker_srft_gram_expectation():
    s = SketchSpec("kronecker-srft", factor_shapes=((6, 2), (5, 3)))
    rng = np.random.default_rng(4)
    acc = np.zeros((6, 6))
    for _ in range(200):
        g = make_sketch(s, 30, 6, rng=rng)
        acc += g.T @ g
    assert np.linalg.norm(acc / 200 - np.eye(6)) <= 0.1


def test_default_factor_shapes():
    assert default_factor_shapes("kr-gaussian", 12, 4, [3, 4]) == [(3, 4), (4, 4)]
    shapes = default_factor_shapes("kronecker-srft", 12, 4, [3, 4])
    assert np.prod([r for r, _ in shapes]) == 12 and np.prod([c for _, c in shapes]) == 4
    assert all(c <= r for r, c in shapes)
    # a prime column count falls back to one block
    assert default_factor_shapes("kronecker-srft", 12, 7, [3, 4]) == [(12, 7)]


def test_unknown_family():
    with pytest.raises(ValueError):
        SketchSpec("sparse")
