import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import direct_dft2
from prilo.core_math import Shape2D, derive_seed, dft2, gaussian_matrix, idft2
from prilo.errors import ShapeError


def test_dft_of_delta_is_all_ones():
    out = dft2(np.array([1.0, 0, 0, 0]), Shape2D(2, 2))
    assert np.max(np.abs(out - 1.0)) <= 1e-12


def test_dft_of_constant():
    out = dft2(np.ones(4), Shape2D(1, 4))
    assert np.max(np.abs(out - np.array([4, 0, 0, 0]))) <= 1e-12


def test_dft_matches_direct_summation(rng):
    img = rng.random((4, 4))
    expected = direct_dft2(img).ravel()
    assert np.max(np.abs(dft2(img.ravel(), Shape2D(4, 4)) - expected)) <= 1e-10


def test_dft_matches_direct_summation_non_square(rng):
    img = rng.random((3, 5))
    expected = direct_dft2(img).ravel()
    assert np.max(np.abs(dft2(img.ravel(), Shape2D(3, 5)) - expected)) <= 1e-10


def test_idft_of_constant_spectrum():
    out = idft2(np.array([4, 0, 0, 0], dtype=complex), Shape2D(1, 4))
    np.testing.assert_allclose(out, np.ones(4), atol=1e-12)


def test_idft_zeros():
    assert np.all(idft2(np.zeros(9, dtype=complex), Shape2D(3, 3)) == 0)


def test_round_trip(rng):
    shape = Shape2D(8, 8)
    x = rng.random(64)
    back = idft2(dft2(x, shape), shape)
    assert np.max(np.abs(back.real - x)) <= 1e-10
    assert np.max(np.abs(back.imag)) <= 1e-10


@pytest.mark.parametrize("fn", [dft2, idft2])
def test_length_mismatch(fn):
    with pytest.raises(ShapeError):
        fn(np.zeros(5), Shape2D(2, 2))


def test_shape_parse_and_validation():
    assert Shape2D.parse("28x28") == Shape2D(28, 28)
    assert Shape2D.parse((3, 4)).size == 12
    with pytest.raises(ShapeError):
        Shape2D(0, 4)


images = st.integers(1, 6).flatmap(
    lambda h: st.integers(1, 6).flatmap(
        lambda w: arrays(np.float64, (h, w), elements=st.floats(-1, 1))
    )
)


@settings(max_examples=60, deadline=None)
@given(images)
def test_hermitian_symmetry(img):
    h, w = img.shape
    c = dft2(img.ravel(), Shape2D(h, w)).reshape(h, w)
    u, v = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    mirrored = c[(-u) % h, (-v) % w]
    assert np.max(np.abs(c - np.conj(mirrored))) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(images)
def test_parseval(img):
    h, w = img.shape
    c = dft2(img.ravel(), Shape2D(h, w))
    lhs = np.sum(np.abs(c) ** 2)
    rhs = img.size * np.sum(img ** 2)
    assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1e-300) + 1e-300


@settings(max_examples=40, deadline=None)
@given(images, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(img, a, b):
    h, w = img.shape
    shape = Shape2D(h, w)
    other = np.cos(np.arange(img.size)).reshape(h, w)
    lhs = dft2((a * img + b * other).ravel(), shape)
    rhs = a * dft2(img.ravel(), shape) + b * dft2(other.ravel(), shape)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_gaussian_real_variance():
    a = gaussian_matrix(300, 784, "real", seed=3)
    assert a.shape == (300, 784) and not np.iscomplexobj(a)
    assert abs(a.var() - 1 / 300) <= 0.1 / 300
    assert abs(a.mean()) < 1e-3


def test_gaussian_complex_second_moment():
    a = gaussian_matrix(300, 784, "complex", seed=3)
    assert np.iscomplexobj(a)
    assert abs(np.mean(np.abs(a) ** 2) - 1 / 300) <= 0.1 / 300
    # real and imaginary parts each carry half the variance
    assert abs(a.real.var() - 1 / 600) <= 0.1 / 600


def test_gaussian_matrix_is_deterministic():
    a = gaussian_matrix(20, 30, "complex", seed=99)
    b = gaussian_matrix(20, 30, "complex", seed=99)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, gaussian_matrix(20, 30, "complex", seed=100))


@pytest.mark.parametrize("m,n", [(0, 4), (4, 0)])
def test_gaussian_matrix_rejects_empty(m, n):
    with pytest.raises(ShapeError):
        gaussian_matrix(m, n, "real", 0)


def test_derive_seed_is_stable_and_key_dependent():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
    assert 0 <= derive_seed(5) < 2 ** 64
