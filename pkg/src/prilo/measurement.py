"""Magnitude-only measurement operators ``x -> |Ax|`` and the least-squares loss."""
import numpy as np

from .core_math import Shape2D, dft2, dft2_batch, gaussian_matrix, idft2
from .errors import ShapeError


class MeasurementOperator:
    """Linear map ``A`` applied to real images; subclasses define the variant.

    ``gain`` is ``E||Ax||^2 / ||x||^2`` and is used by the solvers to put the
    loss of every operator on a comparable scale.
    """

    kind = "abstract"
    input_len = 0
    output_len = 0
    gain = 1.0

    def forward(self, x):
        raise NotImplementedError

    def forward_batch(self, xs):
        return np.stack([self.forward(x) for x in xs])

    def adjoint_real(self, v):
        """``Re(A^H v)``; images are real so the imaginary part is dropped."""
        raise NotImplementedError

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_len:
            raise ShapeError(
                f"{self.kind} operator expects input length {self.input_len}, "
                f"got {x.shape}"
            )
        return x


class Fourier2D(MeasurementOperator):
    kind = "fourier"

    def __init__(self, shape):
        self.shape = Shape2D.parse(shape)
        self.input_len = self.output_len = self.shape.size
        self.gain = float(self.shape.size)

    def forward(self, x):
        return dft2(self._check_input(x), self.shape)

    def forward_batch(self, xs):
        return dft2_batch(xs, self.shape)

    def adjoint_real(self, v):
        # F^H v = n * ifft(v)
        return (self.shape.size * idft2(v, self.shape)).real

    def __repr__(self):
        return f"Fourier2D({self.shape})"


class GaussianOperator(MeasurementOperator):
    """Dense measurement matrix, real or complex."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ShapeError(f"measurement matrix must be 2-D, got {matrix.shape}")
        self.matrix = matrix
        self.kind = "gaussian-complex" if np.iscomplexobj(matrix) else "gaussian-real"
        self.output_len, self.input_len = matrix.shape
        self.gain = 1.0

    @classmethod
    def random(cls, m, n, kind, seed):
        """``kind`` is ``"real"`` or ``"complex"``."""
        return cls(gaussian_matrix(m, n, kind, seed))

    def forward(self, x):
        return self.matrix @ self._check_input(x)

    def forward_batch(self, xs):
        return np.asarray(xs) @ self.matrix.T

    def adjoint_real(self, v):
        return (self.matrix.conj().T @ v).real

    def __repr__(self):
        return f"GaussianOperator({self.kind}, {self.output_len}x{self.input_len})"


def make_operator(kind, shape, m=None, seed=0):
    """Build an operator from its config name: fourier, gaussian-real, gaussian-complex."""
    shape = Shape2D.parse(shape)
    if kind == "fourier":
        return Fourier2D(shape)
    if kind in ("gaussian-real", "gaussian-complex"):
        if m is None:
            raise ShapeError(f"measurement count m is required for {kind}")
        return GaussianOperator.random(m, shape.size, kind.split("-")[1], seed)
    raise ValueError(f"unknown measurement kind {kind!r}")


def _check_y(op, y):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != op.output_len:
        raise ShapeError(f"expected {op.output_len} magnitudes, got {y.shape}")
    return y


def apply_magnitude(op, x):
    """Entrywise modulus ``|Ax|``."""
    return np.abs(op.forward(x))


def magnitude_loss(op, x, y):
    """``sum_j (|Ax|_j - y_j)^2``."""
    y = _check_y(op, y)
    r = np.abs(op.forward(x)) - y
    return float(r @ r)


def magnitude_loss_batch(op, xs, y):
    """Loss for every row of ``xs``; used to score many candidates at once."""
    y = _check_y(op, y)
    r = np.abs(op.forward_batch(xs)) - y
    return np.einsum("ij,ij->i", r, r)


def magnitude_loss_and_grad(op, x, y, eps=1e-12):
    """Loss and its gradient with respect to ``x``.

    The gradient is ``2 Re(A^H ((|c| - y) * c/|c|))`` with ``c = Ax``; the phase
    factor ``c/|c|`` is taken as 0 wherever ``|c| < eps``.
    """
    y = _check_y(op, y)
    c = op.forward(x)
    mag = np.abs(c)
    r = mag - y
    phase = np.zeros_like(c)
    nz = mag >= eps
    phase[nz] = c[nz] / mag[nz]
    grad = 2.0 * op.adjoint_real(r * phase)
    return float(r @ r), grad


def magnitude_loss_grad(op, x, y, eps=1e-12):
    """Gradient part of :func:`magnitude_loss_and_grad`."""
    return magnitude_loss_and_grad(op, x, y, eps)[1]
