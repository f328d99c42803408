"""Recovery quality metrics averaged over 2-D slices.

A slice fixes every index except those of the first two modes, so an
``H x W x C x T`` tensor contributes ``C * T`` slices.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP = 100.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    mpsnr: float
    mssim: float
    mrse: float
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _check_pair(x, ref):
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def slices(x: np.ndarray) -> np.ndarray:
    """View as ``(I1, I2, n_slices)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x.reshape(-1, 1, 1)
    return x.reshape(x.shape[0], x.shape[1], -1, order="F")


def rse(x: np.ndarray, ref: np.ndarray) -> float:
    """Relative error ``‖x − ref‖_F / ‖ref‖_F``."""
    x, ref = _check_pair(x, ref)
    nref = np.linalg.norm(ref)
    if nref == 0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(x - ref) / nref)


def psnr_slices(x, ref, peak: float = 1.0) -> np.ndarray:
    x, ref = _check_pair(x, ref)
    mse = np.mean((slices(x) - slices(ref)) ** 2, axis=(0, 1))
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(peak**2 / mse)
    return np.where(mse > 0, np.minimum(out, PSNR_CAP), PSNR_CAP)


def mpsnr(x, ref, peak: float = 1.0) -> float:
    return float(np.mean(psnr_slices(x, ref, peak)))


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """SSIM of two 2-D images, averaged over the valid window positions.

    Images smaller than the window use global means and variances instead.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    if min(a.shape) < SSIM_WIN:
        mu_a, mu_b = a.mean(), b.mean()
        va, vb = a.var(), b.var()
        cov = np.mean((a - mu_a) * (b - mu_b))
        return float(((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2)))
    w = gaussian_window()

    def filt(img):
        return fftconvolve(img, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a**2
    sbb = filt(b * b) - mu_b**2
    sab = filt(a * b) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * sab + c2)) / ((mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2))
    return float(smap.mean())


def mssim(x, ref) -> float:
    x, ref = _check_pair(x, ref)
    xs, rs = slices(x), slices(ref)
    return float(np.mean([ssim(xs[:, :, k], rs[:, :, k]) for k in range(xs.shape[2])]))


def evaluate(x, ref, seconds: float = 0.0) -> MetricReport:
    return MetricReport(mpsnr(x, ref), mssim(x, ref), rse(x, ref), seconds)
