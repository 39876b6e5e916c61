import gzip
import struct

import numpy as np
import pytest

from prilo.core_math import Shape2D
from prilo.data import (
    load_image_dir,
    load_mnist_idx,
    quantize,
    read_pgm,
    write_idx_images,
    write_pgm,
)
from prilo.errors import DataError, FormatError


def test_hand_built_idx(tmp_path):
    path = tmp_path / "img.idx"
    path.write_bytes(struct.pack(">IIII", 0x803, 1, 2, 2) + bytes([0, 255, 128, 64]))
    images, shape = load_mnist_idx(path)
    assert shape == Shape2D(2, 2)
    np.testing.assert_array_equal(images, [[0, 1, 128 / 255, 64 / 255]])


def test_idx_with_labels_and_gzip(tmp_path):
    imgs = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    write_idx_images(tmp_path / "i.idx", imgs)
    (tmp_path / "l.idx.gz").write_bytes(gzip.compress(struct.pack(">II", 0x801, 2) + bytes([7, 3])))
    images, shape, labels = load_mnist_idx(tmp_path / "i.idx", tmp_path / "l.idx.gz")
    assert shape == Shape2D(3, 4) and images.shape == (2, 12)
    np.testing.assert_array_equal(labels, [7, 3])


def test_truncated_idx_names_byte_counts(tmp_path):
    path = tmp_path / "short.idx"
    path.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes(5))
    with pytest.raises(FormatError, match="expected 24 bytes but got 21") as info:
        load_mnist_idx(path)
    assert info.value.offset == 21


def test_bad_idx_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(struct.pack(">IIII", 0x801, 1, 1, 1) + bytes(1))
    with pytest.raises(FormatError, match="magic"):
        load_mnist_idx(path)


def test_bundled_mnist_headers():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "data" / "mnist"
    images, shape, labels = load_mnist_idx(root / "t10k-images-idx3-ubyte.gz",
                                           root / "t10k-labels-idx1-ubyte.gz")
    assert shape == Shape2D(28, 28)
    assert images.shape == (1000, 784) and labels.shape == (1000,)
    assert images.min() == 0.0 and images.max() == 1.0


def test_pgm_round_trip_is_exact_at_8_bits(tmp_path, rng):
    shape = Shape2D(5, 7)
    x = rng.random(shape.size)
    write_pgm(tmp_path / "a.pgm", x, shape)
    back, s = read_pgm(tmp_path / "a.pgm")
    assert s == shape
    np.testing.assert_array_equal(back, quantize(x) / 255.0)
    # a second pass is the identity
    write_pgm(tmp_path / "b.pgm", back, shape)
    assert (tmp_path / "b.pgm").read_bytes() == (tmp_path / "a.pgm").read_bytes()


def test_pgm_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    x, s = read_pgm(tmp_path / "c.pgm")
    assert s == Shape2D(1, 2)
    np.testing.assert_array_equal(x, [0.0, 1.0])


def test_image_dir(tmp_path, rng):
    shape = Shape2D(4, 4)
    for name in ("b.pgm", "a.pgm", "c.pgm"):
        write_pgm(tmp_path / name, rng.random(shape.size), shape)
    (tmp_path / "notes.txt").write_text("ignored")
    data = load_image_dir(tmp_path, shape)
    assert data.shape == (3, 16)
    np.testing.assert_array_equal(data[0], read_pgm(tmp_path / "a.pgm")[0])


def test_image_dir_mixed_sizes(tmp_path, rng):
    write_pgm(tmp_path / "a.pgm", rng.random(16), Shape2D(4, 4))
    write_pgm(tmp_path / "b.pgm", rng.random(15), Shape2D(3, 5))
    with pytest.raises(DataError, match="b.pgm"):
        load_image_dir(tmp_path, Shape2D(4, 4))


def test_empty_image_dir(tmp_path):
    with pytest.raises(DataError):
        load_image_dir(tmp_path, "4x4")
