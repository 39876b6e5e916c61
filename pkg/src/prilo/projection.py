"""Euclidean projection onto l1-balls and projected gradient descent."""
import math
from dataclasses import dataclass, field

import numpy as np

from .core_math import make_rng
from .errors import DivergenceError, ShapeError


@dataclass
class L1Ball:
    """``{x : ||x - center||_1 <= radius}``; ``radius`` may be ``math.inf``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def bounded(self):
        return math.isfinite(self.radius)

    def distance(self, x):
        """l1 distance from the center."""
        return float(np.abs(np.asarray(x) - self.center).sum())

    def contains(self, x, rel_slack=1e-12):
        return not self.bounded or self.distance(x) <= self.radius * (1.0 + rel_slack)


def l1_threshold(u, radius):
    """Soft-threshold level ``theta`` with ``sum(max(|u| - theta, 0)) == radius``.

    Assumes ``||u||_1 > radius``.  Sort-and-scan from Duchi et al. (2008).
    """
    mu = np.sort(np.abs(u))[::-1]
    cumsum = np.cumsum(mu)
    ks = np.arange(1, mu.size + 1)
    rho = np.nonzero(mu - (cumsum - radius) / ks > 0)[0][-1]
    return (cumsum[rho] - radius) / (rho + 1.0)


def project_l1(v, ball):
    """Closest point to ``v`` (in l2) inside ``ball``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != ball.center.shape:
        raise ShapeError(f"vector {v.shape} and ball center {ball.center.shape} differ")
    if not ball.bounded:
        return v.copy()
    u = v - ball.center
    if np.abs(u).sum() <= ball.radius:
        return v.copy()
    theta = l1_threshold(u, ball.radius)
    out = ball.center + np.sign(u) * np.maximum(np.abs(u) - theta, 0.0)
    # adding the center back can round the l1 distance past the radius
    scale = max(float(np.abs(ball.center).max(initial=0.0)), float(np.abs(u).max()))
    ulp = 4.0 * np.finfo(np.float64).eps * scale
    for _ in range(8):
        excess = np.abs(out - ball.center).sum() - ball.radius
        if excess <= 0:
            break
        active = max(int(np.count_nonzero(np.abs(u) > theta)), 1)
        theta += excess / active + ulp
        out = ball.center + np.sign(u) * np.maximum(np.abs(u) - theta, 0.0)
    return out


@dataclass
class NoiseSchedule:
    """Gradient noise with variance ``eta / (1 + k)**gamma`` at iteration ``k``."""

    eta: float = 0.02
    gamma: float = 0.55
    enabled: bool = True

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"noise eta must be non-negative, got {self.eta}")

    def variance(self, k):
        return self.eta / (1.0 + k) ** self.gamma


@dataclass
class PgdSettings:
    steps: int = 100
    step_size: float = 0.1
    noise: NoiseSchedule = field(default_factory=lambda: NoiseSchedule(enabled=False))
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")


@dataclass
class PgdResult:
    x: np.ndarray
    loss: float
    trace: list
    best_iteration: int


def pgd(grad_fn, x0, ball, settings, on_iterate=None):
    """Projected gradient descent with optional decaying gradient noise.

    Iterates ``x <- P(x - step_size * (grad f(x) + u_k))`` where ``P`` projects
    onto ``ball`` and ``u_k ~ N(0, sigma_k^2 I)`` when noise is enabled.

    Parameters
    ----------
    grad_fn : callable
        ``x -> (loss, grad)``; must be deterministic.
    x0 : ndarray
        Start point, assumed to lie in ``ball``.
    ball : L1Ball
    settings : PgdSettings
    on_iterate : callable, optional
        Called as ``on_iterate(k, x, loss)`` after every update (``k`` from 1).

    Returns
    -------
    PgdResult
        The lowest-loss point seen (``x0`` included), its loss, the per-update
        loss trace (length ``settings.steps``) and the iteration it came from.
    """
    x = np.array(x0, dtype=np.float64)
    loss, grad = grad_fn(x)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss} at the start point", 0)
    best_x, best_loss, best_k = x.copy(), loss, 0
    noise = settings.noise
    rng = make_rng(settings.seed) if noise.enabled else None
    trace = []
    for k in range(settings.steps):
        step = grad
        if rng is not None:
            step = grad + rng.normal(0.0, math.sqrt(noise.variance(k)), size=x.shape)
        x = project_l1(x - settings.step_size * step, ball)
        loss, grad = grad_fn(x)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite loss {loss} at iteration {k + 1}", k + 1)
        trace.append(loss)
        if on_iterate is not None:
            on_iterate(k + 1, x, loss)
        if loss < best_loss:
            best_x, best_loss, best_k = x.copy(), loss, k + 1
    return PgdResult(best_x, best_loss, trace, best_k)
