"""Fourier transforms and seeded random draws used by the measurement operators.

Vectors are plain 1-D ``numpy`` arrays (``float64`` or ``complex128``); images
are flattened in row-major order.  The forward DFT is unnormalised and the
inverse carries the ``1/n`` factor, matching ``numpy.fft``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class Shape2D:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise ShapeError(f"invalid image shape {self.height}x{self.width}")

    @property
    def size(self):
        return self.height * self.width

    @property
    def dims(self):
        return (self.height, self.width)

    @classmethod
    def parse(cls, text):
        """Parse ``"28x28"`` (or a 2-tuple) into a shape."""
        if isinstance(text, Shape2D):
            return text
        if isinstance(text, str):
            parts = text.lower().replace("×", "x").split("x")
        else:
            parts = list(text)
        if len(parts) != 2:
            raise ShapeError(f"cannot parse image shape {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self):
        return f"{self.height}x{self.width}"


def _check_length(v, shape):
    if v.ndim != 1 or v.shape[0] != shape.size:
        raise ShapeError(
            f"vector of length {v.shape} does not match image shape {shape} "
            f"({shape.size} pixels)"
        )


def dft2(x, shape):
    """Unnormalised 2-D DFT of a flattened image.

    Entry ``(u, v)`` of the result is
    ``sum_{j,k} x[j,k] * exp(-2*pi*i*(u*j/H + v*k/W))``, flattened row-major.
    """
    x = np.asarray(x)
    shape = Shape2D.parse(shape)
    _check_length(x, shape)
    return np.fft.fft2(x.reshape(shape.dims)).ravel()


def idft2(c, shape):
    """Inverse of :func:`dft2` (carries the ``1/n`` factor); returns complex."""
    c = np.asarray(c)
    shape = Shape2D.parse(shape)
    _check_length(c, shape)
    return np.fft.ifft2(c.reshape(shape.dims)).ravel()


def dft2_batch(xs, shape):
    """Row-wise :func:`dft2` for a ``(batch, n)`` array."""
    xs = np.asarray(xs)
    shape = Shape2D.parse(shape)
    if xs.ndim != 2 or xs.shape[1] != shape.size:
        raise ShapeError(f"batch of shape {xs.shape} does not match {shape}")
    return np.fft.fft2(xs.reshape(-1, *shape.dims)).reshape(xs.shape[0], -1)


def make_rng(seed):
    """PCG64 generator for a seed (an int or a sequence of ints)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(seed, *keys):
    """Deterministically derive a 64-bit child seed from ``seed`` and ``keys``."""
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def gaussian_matrix(m, n, kind, seed):
    """Random measurement matrix with i.i.d. Gaussian entries.

    ``kind="real"`` draws ``N(0, 1/m)`` entries; ``kind="complex"`` draws real
    and imaginary parts independently from ``N(0, 1/(2m))`` so that
    ``E|a|^2 = 1/m``.  Uses a PCG64 stream seeded by ``seed``.
    """
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise ShapeError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = make_rng(seed)
    if kind == "real":
        return rng.normal(0.0, np.sqrt(1.0 / m), size=(m, n))
    if kind == "complex":
        scale = np.sqrt(1.0 / (2.0 * m))
        re = rng.normal(0.0, scale, size=(m, n))
        im = rng.normal(0.0, scale, size=(m, n))
        return re + 1j * im
    raise ValueError(f"unknown matrix kind {kind!r}")
