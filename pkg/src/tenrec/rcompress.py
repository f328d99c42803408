"""Randomized Tucker compression.

Two randomized schemes process the modes sequentially, like STHOSVD, but
replace each exact SVD with a sketch:

* :func:`compress_fixed_rank` takes a target multilinear rank. Each mode
  unfolding is sketched from both sides with power iterations, and the left
  factor comes from a UTV (column-pivoted QR) factorization of the small
  compressed matrix.
* :func:`compress_fixed_accuracy` takes a relative error tolerance. Each mode
  grows an incremental QB factorization block by block, refining blocks with
  shifted power iterations, and stops once the Gram-based residual estimate
  meets the per-mode budget.

:func:`sthosvd` is the deterministic baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .sketch import SketchSpec, make_sketch
from .tensor import mode_fold, mode_product, mode_unfold

GRAM_RTOL = 1e-12


@dataclass
class TuckerApprox:
    core: np.ndarray
    factors: list
    info: dict = field(default_factory=dict)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def reconstruct(self) -> np.ndarray:
        out = self.core
        for k, f in enumerate(self.factors):
            out = mode_product(out, f, k)
        return out

    def relative_error(self, x: np.ndarray) -> float:
        nx = np.linalg.norm(x)
        return float(np.linalg.norm(x - self.reconstruct()) / nx) if nx > 0 else float(np.linalg.norm(self.reconstruct()))


@dataclass
class FixedRankConfig:
    ranks: tuple
    sketch_sizes: tuple | None = None
    order: tuple | None = None
    oversampling: int = 5
    power_iters: int = 1
    sketch: SketchSpec = field(default_factory=SketchSpec)
    exact_core: bool = False


@dataclass
class FixedAccuracyConfig:
    tol: float
    block: int = 10
    power_iters: int = 1
    order: tuple | None = None
    sketch: SketchSpec = field(default_factory=SketchSpec)
    max_ranks: tuple | None = None

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tol}")
        if self.block < 1:
            raise ValueError("block size must be positive")
        if self.power_iters < 0:
            raise ValueError("power_iters must be nonnegative")


def default_order(shape) -> tuple[int, ...]:
    """Largest mode first; ties keep natural order."""
    return tuple(sorted(range(len(shape)), key=lambda k: -shape[k]))


def _resolve_order(order, ndim: int) -> tuple[int, ...]:
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(ndim)):
        raise ValueError(f"processing order {order} is not a permutation of the modes")
    return order


def _project_mode(core: np.ndarray, a: np.ndarray, f: np.ndarray, mode: int) -> np.ndarray:
    shape = list(core.shape)
    shape[mode] = f.shape[1]
    return mode_fold(f.T @ a, mode, shape)


def sthosvd(x: np.ndarray, ranks, order=None) -> TuckerApprox:
    """Sequentially truncated HOSVD with exact SVDs."""
    x = np.asarray(x, dtype=float)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != x.ndim:
        raise ValueError("one rank per mode required")
    for k, (r, n) in enumerate(zip(ranks, x.shape)):
        if not 0 <= r <= n:
            raise ValueError(f"rank {r} for mode {k} exceeds extent {n}")
    order = default_order(x.shape) if order is None else _resolve_order(order, x.ndim)
    core = x
    factors = [None] * x.ndim
    for v in order:
        a = mode_unfold(core, v)
        u = sla.svd(a, full_matrices=False, check_finite=False)[0]
        f = u[:, : ranks[v]]
        factors[v] = f
        core = _project_mode(core, a, f, v)
    return TuckerApprox(core, factors)


def eig_svd(a: np.ndarray, rtol: float = GRAM_RTOL):
    """Economic SVD through the eigendecomposition of ``AᵀA``.

    Singular values with ``s <= rtol * s[0]`` are dropped together with their
    vectors, so the result is rank revealing. Returns ``(u, s, v)`` with ``s``
    descending.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[1] == 0:
        return a[:, :0], np.zeros(0), np.zeros((0, 0))
    evals, v = np.linalg.eigh(a.T @ a)
    evals, v = evals[::-1], v[:, ::-1]
    s = np.sqrt(np.clip(evals, 0.0, None))
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros(s.shape, dtype=bool)
    s, v = s[keep], v[:, keep]
    u = (a @ v) / s
    return u, s, v


def _gram_pinv(z: np.ndarray):
    """Eigenpairs of a PSD Gram matrix with eigenvalues below
    ``GRAM_RTOL * max`` discarded (truncated pseudo-inverse)."""
    evals, v = np.linalg.eigh(z)
    if evals.size == 0 or evals[-1] <= 0:
        return np.zeros(0), v[:, :0]
    keep = evals > GRAM_RTOL * evals[-1]
    return evals[keep], v[:, keep]


def qb_error_sq(norm_a_sq: float, y: np.ndarray, w: np.ndarray) -> float:
    """``‖A‖² − tr(WᵀW (YᵀY)⁺)``, which equals ``‖A − QB‖²`` for the QB
    factorization built from ``Y = AΩ`` and ``W = AᵀY``."""
    if y.shape[1] == 0:
        return float(norm_a_sq)
    evals, v = _gram_pinv(y.T @ y)
    wv = w @ v
    return float(norm_a_sq - np.sum(np.sum(wv * wv, axis=0) / evals))


def _orthonormal_from_gram(y: np.ndarray) -> np.ndarray:
    evals, v = _gram_pinv(y.T @ y)
    evals, v = evals[::-1], v[:, ::-1]
    u = (y @ v) / np.sqrt(evals)
    # second pass restores orthogonality lost to the squared condition number
    if u.shape[1] and np.max(np.abs(u.T @ u - np.eye(u.shape[1]))) > 1e-10:
        u, _, _ = eig_svd(u)
    return u


def compress_fixed_rank(x: np.ndarray, cfg: FixedRankConfig) -> TuckerApprox:
    """Fixed-rank randomized compression with two-sided sketching and UTV."""
    x = np.asarray(x, dtype=float)
    n_modes = x.ndim
    ranks = tuple(int(r) for r in cfg.ranks)
    if len(ranks) != n_modes:
        raise ValueError("one rank per mode required")
    if cfg.oversampling < 0 or cfg.power_iters < 0:
        raise ValueError("oversampling and power_iters must be nonnegative")
    order = default_order(x.shape) if cfg.order is None else _resolve_order(cfg.order, n_modes)
    rng = np.random.default_rng(cfg.sketch.seed)

    core = x
    factors = [None] * n_modes
    used_sizes = [0] * n_modes
    for v in order:
        a = mode_unfold(core, v)
        m, n = a.shape
        r = ranks[v]
        if cfg.sketch_sizes is not None:
            l = int(cfg.sketch_sizes[v])
        else:
            l = min(r + cfg.oversampling, m, n)
        if not (1 <= r <= l <= min(m, n)):
            raise ValueError(
                f"mode {v}: need 1 <= rank ({r}) <= sketch size ({l}) <= min{(m, n)}"
            )
        used_sizes[v] = l
        others = [core.shape[k] for k in range(n_modes) if k != v]
        t2 = make_sketch(cfg.sketch, n, l, rng=rng, row_factors=others)
        for j in range(cfg.power_iters + 1):
            if j > 0:
                t2 = np.linalg.qr(t2)[0]
            t2_in = t2
            t1 = a @ t2_in
            t2 = a.T @ t1
        q1 = np.linalg.qr(t1)[0]
        q2 = np.linalg.qr(t2)[0]
        if cfg.exact_core:
            d = q1.T @ (a @ q2)
        else:
            d = (q1.T @ t1) @ np.linalg.pinv(q2.T @ t2_in, rcond=GRAM_RTOL)
        qt = sla.qr(d, pivoting=True, check_finite=False)[0]
        f = (q1 @ qt)[:, :r]
        factors[v] = f
        core = _project_mode(core, a, f, v)
    return TuckerApprox(core, factors, {"sketch_sizes": tuple(used_sizes), "order": order})


def compress_fixed_accuracy(x: np.ndarray, cfg: FixedAccuracyConfig) -> TuckerApprox:
    """Fixed-accuracy randomized compression targeting ``‖x − x̂‖ ≤ tol·‖x‖``.

    The squared budget ``tol²‖x‖²`` is split evenly over the modes; since
    sequential projections have orthogonal residuals the per-mode errors add
    up exactly.
    """
    x = np.asarray(x, dtype=float)
    n_modes = x.ndim
    order = default_order(x.shape) if cfg.order is None else _resolve_order(cfg.order, n_modes)
    rng = np.random.default_rng(cfg.sketch.seed)
    budget = cfg.tol**2 * float(np.sum(x * x)) / n_modes

    core = x
    factors = [None] * n_modes
    mode_err = [0.0] * n_modes
    converged = [True] * n_modes
    for v in order:
        a = mode_unfold(core, v)
        m, n = a.shape
        cap = min(m, n)
        if cfg.max_ranks is not None:
            cap = min(cap, int(cfg.max_ranks[v]))
        energy = float(np.sum(a * a))
        ys, ws = np.zeros((m, 0)), np.zeros((n, 0))
        err = energy
        others = [core.shape[k] for k in range(n_modes) if k != v]
        if energy > budget:
            converged[v] = False
            while ys.shape[1] < cap:
                b = min(cfg.block, cap - ys.shape[1])
                omega = make_sketch(cfg.sketch, n, b, rng=rng, row_factors=others)
                if ws.shape[1]:
                    zvals, zvecs = _gram_pinv(ys.T @ ys)
                    wz = ws @ zvecs
                alpha = 0.0
                for j in range(cfg.power_iters):
                    wi = a.T @ (a @ omega) - alpha * omega
                    if ws.shape[1]:
                        wi -= wz @ ((wz.T @ omega) / zvals[:, None])
                    omega, s_hat, _ = eig_svd(wi)
                    if omega.shape[1] == 0:
                        break
                    if j > 0 and alpha < s_hat[-1]:
                        alpha = (s_hat[-1] + alpha) / 2
                if omega.shape[1] == 0:
                    # deflated operator vanished: range already captured
                    converged[v] = True
                    break
                yi = a @ omega
                wi = a.T @ yi
                ys = np.hstack([ys, yi])
                ws = np.hstack([ws, wi])
                err = qb_error_sq(energy, ys, ws)
                if err < budget:
                    converged[v] = True
                    break
        if ys.shape[1]:
            f = _orthonormal_from_gram(ys)
        else:
            f = np.zeros((m, 0))
        factors[v] = f
        mode_err[v] = max(err, 0.0)
        core = _project_mode(core, a, f, v)
    est = float(np.sqrt(sum(mode_err)))
    return TuckerApprox(
        core,
        factors,
        {"order": order, "converged": all(converged), "mode_converged": tuple(converged),
         "estimated_error": est, "mode_error_sq": tuple(mode_err)},
    )
