import numpy as np
import pytest

from tvrecover.errors import InvalidInputError
from tvrecover.image_core import best_s_term_gradient_error, discrete_gradient, tv_norm
from tvrecover.phantoms import checkerboard, load_ellipses, phantom, random_images, synthetic_gradient_sparse


def test_ellipse_table():
    table = load_ellipses()
    assert len(table) == 10
    assert all(len(row) == 6 for row in table)
    assert table[0][0] == 1.0


def test_phantom_values():
    img = phantom(64)
    assert img.shape == (64, 64)
    assert img.min() == 0.0
    assert img.max() == 1.0
    assert img[0, 0] == 0.0
    assert img[32, 32] == pytest.approx(0.2)


def test_phantom_is_deterministic():
    assert np.array_equal(phantom(32), phantom(32))


def test_phantom_minimum_size():
    with pytest.raises(InvalidInputError):
        phantom(8)


def test_synthetic_image_support_count():
    img, support = synthetic_gradient_sparse(16, 3, seed=2)
    assert support == np.count_nonzero(discrete_gradient(img).as_array())
    again, _ = synthetic_gradient_sparse(16, 3, seed=2)
    assert np.array_equal(img, again)


def test_synthetic_image_empty_and_bounds():
    img, support = synthetic_gradient_sparse(8, 0, seed=0)
    assert support == 0
    assert not img.any()
    with pytest.raises(InvalidInputError):
        synthetic_gradient_sparse(8, 9, seed=0)
    with pytest.raises(InvalidInputError):
        synthetic_gradient_sparse(1, 0, seed=0)


def test_checkerboard_blocks():
    board = checkerboard(4, block=2)
    assert np.array_equal(board[:2, :2], np.zeros((2, 2)))
    assert np.array_equal(board[:2, 2:], np.ones((2, 2)))


def test_random_images_are_seeded():
    first = random_images(4, 3, seed=1)
    assert len(first) == 3
    assert all(np.array_equal(a, b) for a, b in zip(first, random_images(4, 3, seed=1)))


def test_phantom_gradient_is_nearly_sparse():
    n = 256
    img = phantom(n)
    s = int(0.05 * 2 * n * n)
    assert best_s_term_gradient_error(img, s) < 0.01 * tv_norm(img)


def test_phantom_background_columns_match():
    img = phantom(128)
    assert np.array_equal(img[:, 0], img[:, -1])
    assert not img[:, 0].any()
