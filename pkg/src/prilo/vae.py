"""Small fully connected VAE trained with hand-written backprop and Adam.

The decoder (sigmoid output, Bernoulli likelihood) becomes a
:class:`~prilo.generator.GeneratorNet` whose latent prior is ``N(0, I)``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .core_math import make_rng
from .errors import DataError, DivergenceError
from .generator import Activation, DenseLayer, GeneratorNet, sigmoid

log = logging.getLogger(__name__)


@dataclass
class VaeSpec:
    latent_dim: int = 32
    hidden_dims: tuple = (256,)
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        values = [self.latent_dim, self.epochs, self.learning_rate, self.batch_size]
        if min(values) <= 0 or any(h <= 0 for h in self.hidden_dims):
            raise ValueError(f"all VAE settings must be positive: {self}")


@dataclass
class TrainedVae:
    decoder: GeneratorNet
    encoder_layers: list
    mean_head: DenseLayer
    logvar_head: DenseLayer
    history: list = field(default_factory=list)

    def encode(self, xs):
        """Posterior means and log-variances for a batch of images."""
        h = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        for layer in self.encoder_layers:
            h = layer.activation(h @ layer.weight.T + layer.bias)
        mu = h @ self.mean_head.weight.T + self.mean_head.bias
        logvar = h @ self.logvar_head.weight.T + self.logvar_head.bias
        return mu, logvar

    def reconstruct(self, xs):
        mu, _ = self.encode(xs)
        return self.decoder(mu)


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _init_layer(rng, fan_in, fan_out):
    # Glorot uniform
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return [rng.uniform(-limit, limit, (fan_out, fan_in)), np.zeros(fan_out)]


def _softplus(a):
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))


def fit_vae(images, spec):
    """Train encoder and decoder; returns a :class:`TrainedVae`."""
    data = np.asarray(images, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError("training needs a non-empty (count, n) array of images")
    count, n = data.shape
    rng = make_rng(spec.seed)

    enc_dims = [n, *spec.hidden_dims]
    dec_dims = [spec.latent_dim, *reversed(spec.hidden_dims), n]
    enc = [_init_layer(rng, a, b) for a, b in zip(enc_dims[:-1], enc_dims[1:])]
    mu_head = _init_layer(rng, enc_dims[-1], spec.latent_dim)
    lv_head = _init_layer(rng, enc_dims[-1], spec.latent_dim)
    dec = [_init_layer(rng, a, b) for a, b in zip(dec_dims[:-1], dec_dims[1:])]
    groups = enc + [mu_head, lv_head] + dec
    params = [p for pair in groups for p in pair]
    opt = _Adam(params, spec.learning_rate)

    history = []
    for epoch in range(spec.epochs):
        order = rng.permutation(count)
        total = 0.0
        for start in range(0, count, spec.batch_size):
            x = data[order[start:start + spec.batch_size]]
            bsz = x.shape[0]
            eps = rng.standard_normal((bsz, spec.latent_dim))

            # encoder
            hs, pres = [x], []
            for w, b in enc:
                a = hs[-1] @ w.T + b
                pres.append(a)
                hs.append(np.maximum(a, 0.0))
            h = hs[-1]
            mu = h @ mu_head[0].T + mu_head[1]
            logvar = h @ lv_head[0].T + lv_head[1]
            std = np.exp(0.5 * logvar)
            z = mu + std * eps

            # decoder
            ds, dpres = [z], []
            for w, b in dec:
                a = ds[-1] @ w.T + b
                dpres.append(a)
                ds.append(np.maximum(a, 0.0))
            logits = dpres[-1]

            bce = np.sum(_softplus(logits) - x * logits)
            kl = -0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar))
            loss = (bce + kl) / bsz
            if not np.isfinite(loss):
                raise DivergenceError(f"VAE loss became {loss} in epoch {epoch + 1}", epoch + 1)
            total += loss * bsz

            # backward through the decoder
            grads_dec = [None] * len(dec)
            g = (sigmoid(logits) - x) / bsz
            for idx in range(len(dec) - 1, -1, -1):
                if idx < len(dec) - 1:
                    g = g * (dpres[idx] > 0)
                w, _ = dec[idx]
                grads_dec[idx] = [g.T @ ds[idx], g.sum(axis=0)]
                g = g @ w
            gz = g
            gmu = gz + mu / bsz
            glv = gz * eps * 0.5 * std + 0.5 * (np.exp(logvar) - 1.0) / bsz
            grads_mu = [gmu.T @ h, gmu.sum(axis=0)]
            grads_lv = [glv.T @ h, glv.sum(axis=0)]
            g = gmu @ mu_head[0] + glv @ lv_head[0]
            grads_enc = [None] * len(enc)
            for idx in range(len(enc) - 1, -1, -1):
                g = g * (pres[idx] > 0)
                w, _ = enc[idx]
                grads_enc[idx] = [g.T @ hs[idx], g.sum(axis=0)]
                g = g @ w

            grads = grads_enc + [grads_mu, grads_lv] + grads_dec
            opt.step([g for pair in grads for g in pair])

        history.append(total / count)
        log.info("epoch %d/%d  loss %.4f", epoch + 1, spec.epochs, history[-1])

    relu = Activation("relu")
    dec_layers = [DenseLayer(w.copy(), b.copy(), relu) for w, b in dec[:-1]]
    dec_layers.append(DenseLayer(dec[-1][0].copy(), dec[-1][1].copy(), Activation("sigmoid")))
    return TrainedVae(
        decoder=GeneratorNet(dec_layers),
        encoder_layers=[DenseLayer(w.copy(), b.copy(), relu) for w, b in enc],
        mean_head=DenseLayer(mu_head[0].copy(), mu_head[1].copy()),
        logvar_head=DenseLayer(lv_head[0].copy(), lv_head[1].copy()),
        history=history,
    )


def train_vae(images, spec):
    """Train a VAE on ``images`` (rows in [0, 1]) and return its decoder."""
    return fit_vae(images, spec).decoder
