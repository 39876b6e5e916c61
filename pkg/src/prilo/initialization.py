"""Starting latents for generator-based solvers: random draws and MII."""
from dataclasses import dataclass

import numpy as np

from .core_math import make_rng
from .generator import sample_latent
from .measurement import magnitude_loss_batch


@dataclass
class MiiSettings:
    candidates: int = 5000
    seed: int = 0
    chunk: int = 1000

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError(f"need at least one candidate, got {self.candidates}")


def candidate_losses(op, y, net, latents, chunk=1000):
    """Magnitude loss ``|| |A G(z)| - y ||^2`` for every row of ``latents``."""
    out = np.empty(len(latents))
    for start in range(0, len(latents), chunk):
        block = latents[start:start + chunk]
        out[start:start + chunk] = magnitude_loss_batch(op, net(block), y)
    return out


def mii_init(op, y, net, settings):
    """Magnitude-informed initialisation.

    Draws ``settings.candidates`` standard-normal latents and returns the one
    whose image best matches the measured magnitudes (lowest index on ties).
    """
    latents = sample_latent(net.latent_dim, settings.candidates, settings.seed)
    losses = candidate_losses(op, y, net, latents, settings.chunk)
    return latents[int(np.argmin(losses))].copy()


def random_init(latent_dim, seed):
    return sample_latent(latent_dim, 1, seed)[0]


def perturb(z, sigma, seed):
    """Add ``N(0, sigma^2)`` noise to a latent; off when ``sigma`` is 0."""
    if sigma <= 0:
        return np.array(z, dtype=np.float64)
    return z + make_rng(seed).normal(0.0, sigma, size=np.shape(z))
