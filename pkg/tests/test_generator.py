import struct

import numpy as np
import pytest

from prilo.errors import (
    DataError,
    FormatError,
    RangeError,
    ShapeError,
    TraceError,
    ValidationError,
)
from prilo.generator import (
    Activation,
    DenseLayer,
    GeneratorNet,
    load_weights,
    random_net,
    sample_latent,
    save_weights,
)
from prilo.vae import VaeSpec, fit_vae, train_vae


def directional_fd(f, z, d, h=1e-6):
    return (f(z + h * d) - f(z - h * d)) / (2 * h)


def away_from_kinks(net, z, margin=1e-4):
    _, tr = net.forward(z)
    for layer, a in zip(net.layers, tr.pre):
        if layer.activation.kind in ("relu", "leaky_relu") and np.min(np.abs(a)) < margin:
            return False
    return True


def test_identity_layer():
    net = GeneratorNet([DenseLayer(np.eye(3), np.zeros(3))])
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(net(z), z)


def test_relu_layer():
    net = GeneratorNet([DenseLayer(np.eye(2), np.zeros(2), Activation("relu"))])
    np.testing.assert_array_equal(net(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_forward_equals_composed_sublayers(rng):
    net = random_net([4, 7, 5], ["relu", "sigmoid"], seed=1)
    z = rng.standard_normal(4)
    h1, _ = net.forward_sub(1, 1, z)
    h2, _ = net.forward_sub(2, 2, h1)
    assert np.max(np.abs(net(z) - h2)) <= 1e-14


def test_split_consistency(small_net, rng):
    z = rng.standard_normal(3)
    full = small_net(z)
    for i in range(1, small_net.depth):
        head, _ = small_net.forward_sub(1, i, z)
        tail, _ = small_net.forward_sub(i + 1, small_net.depth, head)
        assert np.max(np.abs(tail - full)) <= 1e-14


def test_single_layer_sub_equals_layer(small_net, rng):
    h = rng.standard_normal(6)
    layer = small_net.layers[1]
    expected = layer.activation(layer.weight @ h + layer.bias)
    np.testing.assert_array_equal(small_net.forward_sub(2, 2, h)[0], expected)


@pytest.mark.parametrize("i,j", [(2, 1), (0, 1), (1, 4)])
def test_invalid_ranges(small_net, i, j):
    with pytest.raises(RangeError):
        small_net.forward_sub(i, j, np.zeros(3))


def test_input_dim_mismatch(small_net):
    with pytest.raises(ShapeError):
        small_net.forward(np.zeros(4))


def test_intermediates(small_net, rng):
    z = rng.standard_normal(3)
    zs = small_net.intermediates(z)
    assert [v.shape[0] for v in zs] == small_net.layer_dims()
    np.testing.assert_array_equal(zs[-1], small_net(z))


def test_linear_layer_vjp(rng):
    w = rng.standard_normal((4, 3))
    net = GeneratorNet([DenseLayer(w, rng.standard_normal(4))])
    _, tr = net.forward(rng.standard_normal(3))
    cot = rng.standard_normal(4)
    np.testing.assert_allclose(net.vjp_sub(1, 1, tr, cot), w.T @ cot, rtol=1e-14)


def test_zero_cotangent(small_net, rng):
    _, tr = small_net.forward(rng.standard_normal(3))
    assert np.all(small_net.vjp_sub(1, 3, tr, np.zeros(8)) == 0)


ACTS = ["relu", "leaky_relu", "sigmoid", "tanh", "identity"]


def test_vjp_matches_finite_differences(rng):
    checked = 0
    while checked < 100:
        acts = [ACTS[int(k)] for k in rng.integers(0, len(ACTS), 3)]
        dims = [int(d) for d in rng.integers(2, 7, 4)]
        net = random_net(dims, acts, seed=int(rng.integers(1 << 30)))
        z = rng.standard_normal(dims[0])
        if not away_from_kinks(net, z):
            continue
        d = rng.standard_normal(dims[0])
        cot = rng.standard_normal(dims[-1])
        _, tr = net.forward(z)
        analytic = net.vjp_sub(1, 3, tr, cot) @ d
        numeric = directional_fd(lambda v: net(v) @ cot, z, d)
        assert abs(analytic - numeric) <= 1e-5 * max(abs(numeric), 1e-6)
        checked += 1


def test_vjp_linearity(small_net, rng):
    _, tr = small_net.forward(rng.standard_normal(3))
    u, v = rng.standard_normal(8), rng.standard_normal(8)
    a, b = 1.7, -0.3
    lhs = small_net.vjp_sub(1, 3, tr, a * u + b * v)
    rhs = a * small_net.vjp_sub(1, 3, tr, u) + b * small_net.vjp_sub(1, 3, tr, v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_vjp_chain_rule(small_net, rng):
    z = rng.standard_normal(3)
    cot = rng.standard_normal(8)
    _, full = small_net.forward(z)
    for i in range(1, small_net.depth):
        head_out, head = small_net.forward_sub(1, i, z)
        _, tail = small_net.forward_sub(i + 1, 3, head_out)
        chained = small_net.vjp_sub(1, i, head, small_net.vjp_sub(i + 1, 3, tail, cot))
        assert np.max(np.abs(chained - small_net.vjp_sub(1, 3, full, cot))) <= 1e-12


def test_vjp_rejects_mismatched_trace(small_net, rng):
    _, tr = small_net.forward_sub(1, 2, rng.standard_normal(3))
    with pytest.raises(TraceError):
        small_net.vjp_sub(1, 3, tr, np.zeros(8))
    other = random_net([3, 6, 5, 8], ["relu", "tanh", "sigmoid"], seed=8)
    _, tr = other.forward(rng.standard_normal(3))
    with pytest.raises(TraceError):
        small_net.vjp_sub(1, 3, tr, np.zeros(8))


def test_kink_derivatives():
    a = np.array([-1.0, 0.0, 2.0])
    assert list(Activation("relu").derivative(a, np.maximum(a, 0))) == [0, 0, 1]
    lrelu = Activation("leaky_relu", 0.2)
    assert list(lrelu.derivative(a, lrelu(a))) == [0.2, 0.2, 1]


def test_leaky_alpha_validated():
    with pytest.raises(ValueError):
        Activation("leaky_relu", 1.5)


def test_broken_chain_rejected(rng):
    with pytest.raises(ValidationError):
        GeneratorNet([DenseLayer(np.eye(3), np.zeros(3)), DenseLayer(np.eye(4), np.zeros(4))])


# --- PRGW files -----------------------------------------------------------------


def test_weights_round_trip(tmp_path):
    net = random_net([3, 5, 4, 6], ["leaky_relu", "tanh", "sigmoid"], seed=3)
    net.layers[0].activation = Activation("leaky_relu", 0.125)
    path = tmp_path / "net.prgw"
    save_weights(net, path)
    back = load_weights(path)
    assert back.depth == net.depth
    for a, b in zip(net.layers, back.layers):
        assert a.weight.tobytes() == b.weight.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()
        assert a.activation == b.activation


def test_file_layout(tmp_path):
    net = GeneratorNet([DenseLayer([[1.0, 2.0]], [3.0], Activation("relu"))])
    path = tmp_path / "tiny.prgw"
    save_weights(net, path)
    raw = path.read_bytes()
    assert raw[:4] == b"PRGW"
    assert struct.unpack("<IIIIB", raw[4:21]) == (1, 1, 1, 2, 1)
    assert struct.unpack("<3d", raw[21:]) == (1.0, 2.0, 3.0)


def test_bad_magic(tmp_path, small_net):
    path = tmp_path / "bad.prgw"
    save_weights(small_net, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError) as info:
        load_weights(path)
    assert info.value.offset == 0


def test_truncated_file(tmp_path, small_net):
    path = tmp_path / "short.prgw"
    save_weights(small_net, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(FormatError, match="truncated"):
        load_weights(path)


def test_bad_version(tmp_path, small_net):
    path = tmp_path / "v2.prgw"
    save_weights(small_net, path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        load_weights(path)


def test_broken_dimension_chain_in_file(tmp_path):
    net = GeneratorNet(
        [DenseLayer(np.ones((2, 3)), np.zeros(2)), DenseLayer(np.ones((4, 2)), np.zeros(4))]
    )
    path = tmp_path / "chain.prgw"
    save_weights(net, path)
    raw = bytearray(path.read_bytes())
    # layer 2 header starts after: 12 header + 9 + 6*8 weights + 2*8 biases
    offset = 12 + 9 + 48 + 16
    rows, cols = struct.unpack("<II", raw[offset:offset + 8])
    assert (rows, cols) == (4, 2)
    # re-declare layer 2 as 3x3 (same payload size) so its input no longer chains
    raw[offset:offset + 8] = struct.pack("<II", 3, 3)
    path.write_bytes(bytes(raw))
    with pytest.raises(ValidationError):
        load_weights(path)


# --- latents and VAE ------------------------------------------------------------


def test_sample_latent_shapes_and_determinism():
    one = sample_latent(7, 1, seed=4)
    assert one.shape == (1, 7)
    np.testing.assert_array_equal(sample_latent(7, 3, 4), sample_latent(7, 3, 4))
    with pytest.raises(ShapeError):
        sample_latent(0, 3, 4)


def test_sample_latent_mean():
    z = sample_latent(5, 10_000, seed=11)
    assert np.all(np.abs(z.mean(axis=0)) <= 0.05)


def _toy_images(rng, count=64, n=16):
    protos = (rng.random((4, n)) > 0.5).astype(float)
    return np.clip(protos[rng.integers(0, 4, count)] + 0.05 * rng.random((count, n)), 0, 1)


def test_vae_is_deterministic(rng):
    data = _toy_images(rng)
    spec = VaeSpec(latent_dim=2, hidden_dims=(8,), epochs=3, batch_size=16, seed=5)
    a, b = train_vae(data, spec), train_vae(data, spec)
    for la, lb in zip(a.layers, b.layers):
        assert la.weight.tobytes() == lb.weight.tobytes()


def test_vae_decoder_range_and_training_progress(rng):
    data = _toy_images(rng, count=256)
    vae = fit_vae(data, VaeSpec(latent_dim=2, hidden_dims=(16,), epochs=30, batch_size=32))
    assert vae.history[-1] < vae.history[0]
    out = vae.decoder(np.zeros(2))
    assert np.all((out >= 0) & (out <= 1))
    assert vae.decoder.layers[-1].activation.kind == "sigmoid"
    assert vae.decoder.latent_dim == 2 and vae.decoder.output_dim == 16


def test_vae_rejects_empty():
    with pytest.raises(DataError):
        train_vae(np.zeros((0, 4)), VaeSpec())
