"""Dataset readers and writers: MNIST IDX files and 8-bit binary PGM images."""
import gzip
import struct
from pathlib import Path

import numpy as np

from .core_math import Shape2D
from .errors import DataError, FormatError

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def _read_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path):
    """Raw ``uint8`` array of shape ``(count, rows, cols)`` from an IDX image file."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise FormatError(f"{path}: IDX image header needs 16 bytes, file has {len(raw)}", 0)
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES:
        raise FormatError(f"{path}: bad IDX image magic 0x{magic:08x}", 0)
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise FormatError(
            f"{path}: truncated payload, expected {expected} bytes but got {len(raw)}",
            len(raw),
        )
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(
        count, rows, cols
    )


def read_idx_labels(path):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise FormatError(f"{path}: IDX label header needs 8 bytes, file has {len(raw)}", 0)
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS:
        raise FormatError(f"{path}: bad IDX label magic 0x{magic:08x}", 0)
    if len(raw) < 8 + count:
        raise FormatError(
            f"{path}: truncated payload, expected {8 + count} bytes but got {len(raw)}",
            len(raw),
        )
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).copy()


def load_mnist_idx(images_path, labels_path=None):
    """Load IDX images as flat float64 rows scaled to [0, 1].

    Returns ``(images, shape)`` or ``(images, shape, labels)`` when a label
    file is given.  Gzipped files are accepted.
    """
    raw = read_idx_images(images_path)
    images = raw.reshape(raw.shape[0], -1).astype(np.float64) / 255.0
    shape = Shape2D(raw.shape[1], raw.shape[2])
    if labels_path is None:
        return images, shape
    labels = read_idx_labels(labels_path)
    if len(labels) != len(images):
        raise DataError(f"{len(images)} images but {len(labels)} labels")
    return images, shape, labels


def write_idx_images(path, images_uint8):
    images_uint8 = np.asarray(images_uint8, dtype=np.uint8)
    header = struct.pack(">IIII", IDX_IMAGES, *images_uint8.shape)
    Path(path).write_bytes(header + images_uint8.tobytes())


def quantize(x):
    """[0, 1] floats to 8-bit levels (values outside are clipped)."""
    return np.rint(np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, x, shape):
    """Write a flat image in [0, 1] as a binary (P5) PGM with maxval 255."""
    shape = Shape2D.parse(shape)
    pixels = quantize(x).reshape(shape.dims)
    header = f"P5\n{shape.width} {shape.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def _pgm_tokens(raw, count):
    """First ``count`` whitespace-separated header tokens and the payload offset."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("unexpected end of PGM header", pos)
        tokens.append(raw[start:pos].decode("ascii"))
    return tokens, pos + 1  # single whitespace byte after maxval


def read_pgm(path):
    """Read a P5 PGM; returns ``(flat float image in [0, 1], Shape2D)``."""
    raw = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(raw, 4)
    if tokens[0] != "P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})", 0)
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: only 8-bit PGM supported, maxval {maxval}", offset)
    need = width * height
    if len(raw) - offset < need:
        raise FormatError(
            f"{path}: truncated payload, expected {need} bytes but got {len(raw) - offset}",
            len(raw),
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=need, offset=offset)
    return pixels.astype(np.float64) / maxval, Shape2D(height, width)


def load_image_dir(path, shape):
    """All ``*.pgm`` files in ``path`` (lexicographic order) as rows in [0, 1]."""
    shape = Shape2D.parse(shape)
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise DataError(f"no .pgm files in {path}")
    rows = []
    for f in files:
        x, s = read_pgm(f)
        if s != shape:
            raise DataError(f"{f.name}: image is {s}, expected {shape}")
        rows.append(x)
    return np.stack(rows)
