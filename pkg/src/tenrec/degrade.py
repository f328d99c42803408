"""Synthetic observation models: sampling, impulsive and Gaussian noise, and
dithered uniform quantization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Observation:
    """Sampled measurements of a tensor.

    ``indices`` are column-major linear indices of the sampled entries and
    ``values`` the measurements at those entries. ``delta`` is the quantizer
    resolution (``None`` when unquantized). ``meta`` records how the data was
    generated; the dithers themselves are never stored.
    """

    shape: tuple
    indices: np.ndarray
    values: np.ndarray
    delta: float | None = None
    one_bit: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.indices.shape != self.values.shape or self.indices.ndim != 1:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("quantizer resolution must be positive")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= int(np.prod(self.shape))):
            raise ValueError("sample index out of range")

    @property
    def quantized(self) -> bool:
        return self.delta is not None or self.one_bit

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(int(np.prod(self.shape)), dtype=bool)
        m[self.indices] = True
        return m.reshape(self.shape, order="F")

    def filled(self) -> np.ndarray:
        """Observed values placed into a zero tensor."""
        out = np.zeros(int(np.prod(self.shape)))
        out[self.indices] = self.values
        return out.reshape(self.shape, order="F")

    @classmethod
    def from_mask(cls, m: np.ndarray, mask: np.ndarray, **kw) -> "Observation":
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask.ravel(order="F"))
        return cls(m.shape, idx, np.asarray(m, dtype=float).ravel(order="F")[idx], **kw)


def sample_mask(shape, sr: float, seed=None) -> np.ndarray:
    """Uniformly random mask with exactly ``round(sr * size)`` true entries."""
    if not 0 <= sr <= 1:
        raise ValueError("sampling ratio must lie in [0, 1]")
    size = int(np.prod(shape))
    count = int(round(sr * size))
    rng = np.random.default_rng(seed)
    mask = np.zeros(size, dtype=bool)
    mask[rng.choice(size, size=count, replace=False)] = True
    return mask.reshape(shape, order="F")


def add_salt_pepper(x: np.ndarray, nr: float, seed=None) -> np.ndarray:
    """Replace ``round(nr * size)`` random entries, half by 0 and half by 1.

    The first ``round(count / 2)`` chosen entries become 0 (pepper).
    """
    if not 0 <= nr <= 1:
        raise ValueError("noise ratio must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    out = x.copy().ravel(order="F")
    count = int(round(nr * out.size))
    rng = np.random.default_rng(seed)
    idx = rng.choice(out.size, size=count, replace=False)
    n_pepper = int(round(count / 2))
    out[idx[:n_pepper]] = 0.0
    out[idx[n_pepper:]] = 1.0
    return out.reshape(x.shape, order="F")


def add_gaussian(x: np.ndarray, sigma: float, seed=None) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    x = np.asarray(x, dtype=float)
    if sigma == 0:
        return x.copy()
    rng = np.random.default_rng(seed)
    return x + sigma * rng.standard_normal(x.shape)


def quantize(u, delta: float):
    """Uniform scalar quantizer ``delta * (floor(u / delta) + 1/2)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return delta * (np.floor(np.asarray(u, dtype=float) / delta) + 0.5)


def quantize_dithered(u, delta: float, xi):
    """Quantize ``u + xi`` with a dither ``xi`` in ``[-delta/2, delta/2]``."""
    return quantize(np.asarray(u, dtype=float) + xi, delta)


def draw_dither(n: int, delta: float, rng) -> np.ndarray:
    return rng.uniform(-delta / 2, delta / 2, size=n)


def _stage_rngs(seed, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def observe(truth: np.ndarray, sr: float = 1.0, nr: float = 0.0, sigma: float = 0.0,
            delta: float | None = None, one_bit: bool = False, dither_width: float = 0.0,
            seed=None, full_output: bool = False):
    """Degrade ``truth``: impulsive noise, then Gaussian noise, then sampling,
    then optionally dithered quantization.

    ``one_bit`` replaces the uniform quantizer by ``sign`` (values in
    ``{-1, +1}``) applied after a ``Unif[-w/2, w/2]`` dither of width
    ``dither_width``; it cannot be combined with ``delta``.

    With ``full_output`` the intermediate tensors (after impulsive noise and
    after Gaussian noise) are returned too, for evaluation only.
    """
    if one_bit and delta is not None:
        raise ValueError("one-bit quantization and a resolution delta are mutually exclusive")
    truth = np.asarray(truth, dtype=float)
    r_sp, r_gauss, r_mask, r_dither = _stage_rngs(seed, 4)
    corrupted = add_salt_pepper(truth, nr, r_sp) if nr > 0 else truth.copy()
    noisy = add_gaussian(corrupted, sigma, r_gauss)
    mask = sample_mask(truth.shape, sr, r_mask)
    idx = np.flatnonzero(mask.ravel(order="F"))
    u = noisy.ravel(order="F")[idx]
    meta = {"sr": sr, "nr": nr, "sigma": sigma}
    if delta is not None:
        values = quantize_dithered(u, delta, draw_dither(u.size, delta, r_dither))
    elif one_bit:
        xi = draw_dither(u.size, dither_width, r_dither) if dither_width > 0 else 0.0
        values = np.where(u + xi >= 0, 1.0, -1.0)
        meta["dither_width"] = dither_width
    else:
        values = u
    obs = Observation(truth.shape, idx, values, delta=delta, one_bit=bool(one_bit), meta=meta)
    if full_output:
        return obs, {"corrupted": corrupted, "noisy": noisy}
    return obs


def smooth_lowrank(shape, ranks, seed=None, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Synthetic ground truth: a random core times smooth factor matrices.

    Column ``j`` of each factor is a low-frequency cosine with a random phase,
    so every mode is both low rank and slowly varying. Values are rescaled to
    ``[low, high]``; the added offset can raise each multilinear rank by one.
    """
    rng = np.random.default_rng(seed)
    out = rng.standard_normal(tuple(ranks))
    for k, (n, r) in enumerate(zip(shape, ranks)):
        t = np.linspace(0.0, 1.0, n)[:, None]
        freq = np.arange(r)[None, :] + rng.uniform(0.2, 0.8, size=(1, r))
        phase = rng.uniform(0, 2 * np.pi, size=(1, r))
        f = np.cos(np.pi * freq * t + phase)
        out = np.moveaxis(np.tensordot(f, out, axes=(1, k)), 0, k)
    out = (out - out.min()) / (out.max() - out.min())
    return low + (high - low) * out
