"""Reference implementations used to check the package by an independent route."""
import numpy as np


def bisection_projection(v, center, radius, iters=200):
    """l1-ball projection by bisection on the soft-threshold level."""
    u = v - center
    if np.abs(u).sum() <= radius:
        return v.copy()
    lo, hi = 0.0, float(np.abs(u).max())
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(np.abs(u) - mid, 0).sum() > radius:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    return center + np.sign(u) * np.maximum(np.abs(u) - theta, 0)


def central_difference(f, x, h=1e-6):
    """Gradient of a scalar function by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
