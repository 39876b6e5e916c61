"""Image quality metrics and alignment under the Fourier trivial ambiguities."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core_math import Shape2D
from .errors import ShapeError

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(x, ref):
    x = np.asarray(x, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if x.shape != ref.shape:
        raise ShapeError(f"images of length {x.size} and {ref.size} cannot be compared")
    return x, ref


def mse(x, ref):
    x, ref = _pair(x, ref)
    d = x - ref
    return float(d @ d) / d.size


def psnr(x, ref, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``math.inf`` for an exact match."""
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    err = mse(x, ref)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(x, ref, shape, data_range=1.0):
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) and symmetric borders.

    Images smaller than the window fall back to a single global window.
    """
    shape = Shape2D.parse(shape)
    x, ref = _pair(x, ref)
    if x.size != shape.size:
        raise ShapeError(f"image length {x.size} does not match {shape}")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    a = x.reshape(shape.dims)
    b = ref.reshape(shape.dims)
    if min(shape.dims) < SSIM_WINDOW:
        mu_a, mu_b = a.mean(), b.mean()
        var_a = (a * a).mean() - mu_a * mu_a
        var_b = (b * b).mean() - mu_b * mu_b
        cov = (a * b).mean() - mu_a * mu_b
    else:
        radius = SSIM_WINDOW // 2

        def smooth(img):
            return gaussian_filter(img, SSIM_SIGMA, mode="reflect", truncate=radius / SSIM_SIGMA)

        mu_a, mu_b = smooth(a), smooth(b)
        var_a = smooth(a * a) - mu_a * mu_a
        var_b = smooth(b * b) - mu_b * mu_b
        cov = smooth(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def point_reflect(img2d):
    """``x[j, k] -> x[(H - j) % H, (W - k) % W]``."""
    return np.roll(img2d[::-1, ::-1], (1, 1), axis=(0, 1))


def register_trivial(x, ref, shape):
    """Align ``x`` to ``ref`` over all circular shifts and the point reflection.

    Returns ``(aligned, (dy, dx), flipped)`` where ``aligned`` is
    ``np.roll(candidate, (dy, dx))`` of ``x`` or its reflection, chosen to
    maximise the inner product with ``ref`` (equivalently minimise the MSE).
    """
    shape = Shape2D.parse(shape)
    x, ref = _pair(x, ref)
    a = x.reshape(shape.dims)
    r = ref.reshape(shape.dims)
    fr = np.fft.fft2(r)
    best = (float(x @ ref), a, (0, 0), False)
    for flipped, cand in ((False, a), (True, point_reflect(a))):
        corr = np.fft.ifft2(fr * np.conj(np.fft.fft2(cand))).real
        dy, dx = np.unravel_index(np.argmax(corr), corr.shape)
        aligned = np.roll(cand, (dy, dx), axis=(0, 1))
        # exact re-score so FFT rounding can never pick a worse candidate
        score = float(aligned.ravel() @ ref)
        if score > best[0]:
            best = (score, aligned, (int(dy), int(dx)), flipped)
    return best[1].ravel().copy(), best[2], best[3]


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    magnitude_mse: float
    psnr_db_registered: float = math.nan
    ssim_registered: float = math.nan
    registered: bool = False
    shift: tuple = (0, 0)
    flipped: bool = False

    def line(self):
        text = (
            f"psnr_db={self.psnr_db:.4f} ssim={self.ssim:.4f} "
            f"magnitude_mse={self.magnitude_mse:.6g}"
        )
        if self.registered:
            text += (
                f" psnr_db_registered={self.psnr_db_registered:.4f}"
                f" ssim_registered={self.ssim_registered:.4f}"
                f" shift={self.shift[0]},{self.shift[1]} flipped={int(self.flipped)}"
            )
        return text


def evaluate(x, ref, shape, magnitude_mse=math.nan, register=True):
    """Raw metrics, plus registered ones when ``register`` is true."""
    report = MetricReport(psnr(x, ref), ssim(x, ref, shape), magnitude_mse)
    if register:
        aligned, shift, flipped = register_trivial(x, ref, shape)
        report.psnr_db_registered = psnr(aligned, ref)
        report.ssim_registered = ssim(aligned, ref, shape)
        report.registered, report.shift, report.flipped = True, shift, flipped
    return report
