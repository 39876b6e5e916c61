"""Fully connected generator networks with sub-network evaluation and VJPs.

Layers are numbered from 1 as in ``G = G_k o ... o G_1``; ``z_0`` is the latent
input and ``z_i`` the post-activation output of layer ``i``.
"""
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_math import make_rng
from .errors import FormatError, RangeError, ShapeError, TraceError, ValidationError

ACTIVATION_CODES = {"identity": 0, "relu": 1, "leaky_relu": 2, "sigmoid": 3, "tanh": 4}
_CODE_NAMES = {v: k for k, v in ACTIVATION_CODES.items()}


@dataclass(frozen=True)
class Activation:
    kind: str = "identity"
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in ACTIVATION_CODES:
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"leaky_relu alpha must lie in (0, 1), got {self.alpha}")

    def __call__(self, a):
        if self.kind == "identity":
            return a
        if self.kind == "relu":
            return np.maximum(a, 0.0)
        if self.kind == "leaky_relu":
            return np.where(a > 0, a, self.alpha * a)
        if self.kind == "sigmoid":
            return sigmoid(a)
        return np.tanh(a)

    def derivative(self, a, out):
        """Derivative at pre-activation ``a`` (``out`` is the activation value).

        At the kink ``a == 0`` relu uses 0 and leaky_relu uses ``alpha``.
        """
        if self.kind == "identity":
            return np.ones_like(a)
        if self.kind == "relu":
            return (a > 0).astype(a.dtype)
        if self.kind == "leaky_relu":
            return np.where(a > 0, 1.0, self.alpha)
        if self.kind == "sigmoid":
            return out * (1.0 - out)
        return 1.0 - out * out


def sigmoid(a):
    # split by sign so exp never overflows
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias of shape {self.bias.shape} does not match weight {self.weight.shape}"
            )
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValidationError("layer parameters must be finite")

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


@dataclass
class ActivationTrace:
    """Cached inputs, pre-activations and outputs of layers ``start..stop``."""

    start: int
    stop: int
    inputs: list
    pre: list
    outputs: list
    net_id: int

    @property
    def output(self):
        return self.outputs[-1]


class GeneratorNet:
    """``G: R^l -> R^n`` as a chain of :class:`DenseLayer`."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ValidationError("a generator needs at least one layer")
        for idx in range(1, len(layers)):
            if layers[idx].in_dim != layers[idx - 1].out_dim:
                raise ValidationError(
                    f"layer {idx + 1} expects input dim {layers[idx].in_dim} "
                    f"but layer {idx} outputs {layers[idx - 1].out_dim}"
                )
        self.layers = layers

    @property
    def depth(self):
        return len(self.layers)

    @property
    def latent_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def layer_dims(self):
        return [self.latent_dim] + [layer.out_dim for layer in self.layers]

    def _check_range(self, i, j):
        if not (1 <= i <= j <= self.depth):
            raise RangeError(f"invalid layer range {i}..{j} for a {self.depth}-layer net")

    def forward_sub(self, i, j, z):
        """Apply layers ``i..j`` (1-based, inclusive) to ``z``."""
        self._check_range(i, j)
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.layers[i - 1].in_dim:
            raise ShapeError(
                f"layer {i} expects input dim {self.layers[i - 1].in_dim}, got {z.shape}"
            )
        inputs, pre, outputs = [], [], []
        h = z
        for layer in self.layers[i - 1:j]:
            inputs.append(h)
            a = h @ layer.weight.T + layer.bias
            h = layer.activation(a)
            pre.append(a)
            outputs.append(h)
        return h, ActivationTrace(i, j, inputs, pre, outputs, id(self))

    def forward(self, z0):
        return self.forward_sub(1, self.depth, z0)

    def __call__(self, z0):
        return self.forward(z0)[0]

    def intermediates(self, z0):
        """``[z_0, z_1, ..., z_k]`` for a latent ``z0``."""
        out, trace = self.forward(z0)
        return [trace.inputs[0]] + trace.outputs

    def vjp_sub(self, i, j, trace, cotangent):
        """``J^T cotangent`` for the Jacobian of layers ``i..j`` at the traced input."""
        self._check_range(i, j)
        if trace.net_id != id(self) or (trace.start, trace.stop) != (i, j):
            raise TraceError(
                f"trace covers layers {trace.start}..{trace.stop}, requested {i}..{j}"
            )
        g = np.asarray(cotangent, dtype=np.float64)
        if g.shape != trace.output.shape:
            raise ShapeError(
                f"cotangent of shape {g.shape} does not match layer {j} output "
                f"{trace.output.shape}"
            )
        for pos in range(j - i, -1, -1):
            layer = self.layers[i - 1 + pos]
            g = g * layer.activation.derivative(trace.pre[pos], trace.outputs[pos])
            g = g @ layer.weight
        return g

    def __repr__(self):
        acts = ",".join(layer.activation.kind for layer in self.layers)
        return f"GeneratorNet(dims={self.layer_dims()}, activations={acts})"


def random_net(dims, activations, seed, scale=None):
    """Random net for tests and synthetic experiments.

    ``dims`` lists ``[latent, hidden..., output]``; ``activations`` gives one
    kind per layer.  Weights are Gaussian with ``1/sqrt(fan_in)`` scale.
    """
    rng = make_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        s = scale if scale is not None else 1.0 / np.sqrt(fan_in)
        if not isinstance(act, Activation):
            act = Activation(act)
        layers.append(
            DenseLayer(rng.normal(0, s, (fan_out, fan_in)), rng.normal(0, 0.1, fan_out), act)
        )
    return GeneratorNet(layers)


def sample_latent(latent_dim, count, seed):
    """``count`` i.i.d. standard normal latents as rows of a ``(count, l)`` array."""
    if latent_dim < 1 or count < 1:
        raise ShapeError(f"need positive latent dim and count, got {latent_dim}, {count}")
    return make_rng(seed).standard_normal((count, latent_dim))


# --- PRGW weight files ------------------------------------------------------

MAGIC = b"PRGW"
VERSION = 1


def save_weights(net, path):
    """Write ``net`` as a little-endian PRGW file."""
    chunks = [MAGIC, struct.pack("<II", VERSION, net.depth)]
    for layer in net.layers:
        rows, cols = layer.weight.shape
        code = ACTIVATION_CODES[layer.activation.kind]
        chunks.append(struct.pack("<IIB", rows, cols, code))
        if code == ACTIVATION_CODES["leaky_relu"]:
            chunks.append(struct.pack("<d", layer.activation.alpha))
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path):
    """Read a PRGW file written by :func:`save_weights`.

    Raises :class:`FormatError` (with byte offset) for bad magic, version or
    truncation, and :class:`ValidationError` if layer dimensions do not chain.
    """
    data = Path(path).read_bytes()
    pos = 0

    def take(nbytes, what):
        nonlocal pos
        if pos + nbytes > len(data):
            raise FormatError(
                f"truncated PRGW file while reading {what}: need {nbytes} bytes, "
                f"{len(data) - pos} left",
                offset=pos,
            )
        chunk = data[pos:pos + nbytes]
        pos += nbytes
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a PRGW file", offset=0)
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported PRGW version {version}", offset=4)
    layers = []
    for idx in range(count):
        code_offset = pos + 8
        rows, cols, code = struct.unpack("<IIB", take(9, f"layer {idx + 1} header"))
        if code not in _CODE_NAMES:
            raise FormatError(f"unknown activation code {code}", offset=code_offset)
        alpha = 0.01
        if code == ACTIVATION_CODES["leaky_relu"]:
            (alpha,) = struct.unpack("<d", take(8, "alpha"))
        w = np.frombuffer(take(8 * rows * cols, f"layer {idx + 1} weights"), dtype="<f8")
        b = np.frombuffer(take(8 * rows, f"layer {idx + 1} biases"), dtype="<f8")
        layers.append(
            DenseLayer(
                w.reshape(rows, cols).astype(np.float64),
                b.astype(np.float64),
                Activation(_CODE_NAMES[code], alpha),
            )
        )
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last layer", offset=pos)
    return GeneratorNet(layers)
