"""Nonconvex penalties and their proximal maps.

Every penalty ``phi`` is symmetric, concave and nondecreasing on ``[0, inf)``
with ``phi(0) = 0``. :func:`prox_scalar` returns a global minimizer of

    mu * phi(x) + (x - v)**2 / 2,

choosing the smaller magnitude when two minimizers tie. Piecewise-quadratic
penalties are solved by enumerating the stationary points and breakpoints of
every piece; ``lq`` and ``log`` compare zero with the relevant root of the
stationarity equation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

KINDS = ("l1", "firm", "lq", "mcp", "scad", "log", "capped-lq")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kind and its shape parameters.

    ``q`` is the exponent of ``lq`` and ``capped-lq``; ``gamma`` the MCP
    concavity (> 1); ``a`` the SCAD knot (> 2); ``eps`` the log offset;
    ``theta`` the saturation point of ``firm`` and the cap of ``capped-lq``.
    """

    kind: str = "l1"
    q: float = 0.5
    gamma: float = 3.0
    a: float = 3.7
    eps: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty {self.kind!r}; choose from {KINDS}")
        if self.kind == "lq" and not 0 < self.q < 1:
            raise ValueError("lq needs 0 < q < 1")
        if self.kind == "capped-lq" and not 0 < self.q <= 1:
            raise ValueError("capped-lq needs 0 < q <= 1")
        if self.kind == "mcp" and not self.gamma > 1:
            raise ValueError("mcp needs gamma > 1")
        if self.kind == "scad" and not self.a > 2:
            raise ValueError("scad needs a > 2")
        if self.kind == "log" and not self.eps > 0:
            raise ValueError("log needs eps > 0")
        if self.kind in ("firm", "capped-lq") and not self.theta > 0:
            raise ValueError(f"{self.kind} needs theta > 0")


L1 = PenaltySpec("l1")


def _pieces(spec: PenaltySpec):
    """``(lo, hi, c0, c1, c2)`` with ``phi(t) = c0 + c1 t + c2 t²`` on ``[lo, hi]``."""
    k = spec.kind
    if k == "l1":
        return [(0.0, np.inf, 0.0, 1.0, 0.0)]
    if k in ("mcp", "firm"):
        g = spec.gamma if k == "mcp" else spec.theta
        return [(0.0, g, 0.0, 1.0, -0.5 / g), (g, np.inf, g / 2, 0.0, 0.0)]
    if k == "scad":
        a = spec.a
        return [
            (0.0, 1.0, 0.0, 1.0, 0.0),
            (1.0, a, -0.5 / (a - 1), a / (a - 1), -0.5 / (a - 1)),
            (a, np.inf, (a + 1) / 2, 0.0, 0.0),
        ]
    return None


def penalty_eval(spec: PenaltySpec, x):
    """``phi(|x|)``, elementwise."""
    t = np.abs(np.asarray(x, dtype=float))
    k = spec.kind
    if k == "lq":
        return t**spec.q
    if k == "log":
        return np.log1p(t / spec.eps)
    if k == "capped-lq":
        return np.minimum(t, spec.theta) ** spec.q
    out = np.zeros_like(t)
    for lo, hi, c0, c1, c2 in _pieces(spec):
        sel = (t >= lo) & (t <= hi)
        out = np.where(sel, c0 + c1 * t + c2 * t * t, out)
    return out


def _objective(spec, mu, v, x):
    return mu * penalty_eval(spec, x) + 0.5 * (x - v) ** 2


def _lq_root(mu, v, q, hi=np.inf):
    """Largest root of ``x + mu q x^(q-1) = v`` (the local minimizer of the
    lq objective), or NaN where there is none below ``hi``."""
    if q == 1:
        x = v - mu
        return np.where((x > 0) & (x <= hi), x, np.nan)
    beta = (mu * q * (1 - q)) ** (1 / (2 - q))
    x = np.maximum(v, beta)
    for _ in range(100):
        f = x + mu * q * x ** (q - 1) - v
        fp = 1 + mu * q * (q - 1) * x ** (q - 2)
        step = f / np.where(fp > 0, fp, 1.0)
        x_new = np.maximum(x - step, beta)
        if np.all(np.abs(x_new - x) <= 1e-15 * np.maximum(x, 1.0)):
            x = x_new
            break
        x = x_new
    f = x + mu * q * x ** (q - 1) - v
    ok = (np.abs(f) <= 1e-9 * np.maximum(v, 1.0)) & (x > 0) & (x <= hi)
    return np.where(ok, x, np.nan)


def _candidates(spec, mu, v):
    """Candidate minimizers on ``x >= 0`` for ``v >= 0``; NaN marks unused slots."""
    k = spec.kind
    zero = np.zeros_like(v)
    pieces = _pieces(spec)
    if pieces is not None:
        cands = [zero]
        for lo, hi, _c0, c1, c2 in pieces:
            curv = 1 + 2 * mu * c2
            if np.isfinite(hi):
                cands.append(np.full_like(v, hi))
            with np.errstate(divide="ignore", invalid="ignore"):
                stat = np.clip((v - mu * c1) / curv, lo, hi)
            cands.append(np.where(curv > 0, stat, np.nan))
        return cands
    if k == "lq":
        return [zero, _lq_root(mu, v, spec.q)]
    if k == "log":
        e = spec.eps
        disc = (v + e) ** 2 - 4 * mu
        with np.errstate(invalid="ignore"):
            root = ((v - e) + np.sqrt(disc)) / 2
        return [zero, np.where((disc >= 0) & (root > 0), root, np.nan)]
    # capped-lq
    th = spec.theta
    return [zero, np.full_like(v, th), _lq_root(mu, v, spec.q, hi=th), np.maximum(v, th)]


def prox_scalar(spec: PenaltySpec, mu, v):
    """Proximal map of ``mu * phi`` evaluated elementwise at ``v``."""
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr <= 0):
        raise ValueError("prox parameter mu must be positive")
    v = np.asarray(v, dtype=float)
    s = np.sign(v)
    a = np.abs(v)
    mu_b = np.broadcast_to(mu_arr, np.broadcast_shapes(mu_arr.shape, a.shape))
    a = np.broadcast_to(a, mu_b.shape).astype(float)
    if spec.kind == "l1":
        return s * np.maximum(a - mu_b, 0.0)
    cands = np.stack(_candidates(spec, mu_b, a))
    with np.errstate(invalid="ignore"):
        obj = _objective(spec, mu_b, a, cands)
    obj = np.where(np.isnan(cands), np.inf, obj)
    best = obj.min(axis=0)
    x = np.where(obj <= best, cands, np.inf).min(axis=0)
    return s * x


def soft_threshold(v, mu):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - mu, 0.0)


def prox_threshold(spec: PenaltySpec, mu: float) -> float:
    """Largest ``v >= 0`` whose prox is zero (the kill threshold)."""
    if mu <= 0:
        return 0.0
    k = spec.kind
    if k == "l1":
        return float(mu)
    if k in ("mcp", "firm"):
        g = spec.gamma if k == "mcp" else spec.theta
        return float(mu) if mu < g else float(np.sqrt(mu * g))
    if k == "lq":
        q = spec.q
        return float((2 - q) / (2 - 2 * q) * (2 * mu * (1 - q)) ** (1 / (2 - q)))
    lo, hi = 0.0, max(float(mu), 1.0)
    while prox_scalar(spec, mu, hi) == 0:
        lo, hi = hi, 2 * hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if prox_scalar(spec, mu, mid) == 0:
            lo = mid
        else:
            hi = mid
    return lo


def svt_generalized(y: np.ndarray, spec: PenaltySpec, tau: float, full_output: bool = False):
    """``argmin_X tau·Σ phi(σ_i(X)) + ‖X − Y‖²/2`` via one exact SVD.

    With ``full_output`` the shrunk singular values are returned as well.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    y = np.asarray(y, dtype=float)
    if tau == 0:
        if full_output:
            return y.copy(), sla.svd(y, compute_uv=False, check_finite=False)
        return y.copy()
    u, s, vt = sla.svd(y, full_matrices=False, check_finite=False, lapack_driver="gesdd")
    s = prox_scalar(spec, tau, s)
    keep = s > 0
    out = (u[:, keep] * s[keep]) @ vt[keep]
    return (out, s[keep]) if full_output else out


def _range_svd(y, k, p, q, rng):
    m, n = y.shape
    omega = rng.standard_normal((n, k + p))
    z = y @ omega
    for _ in range(q):
        z = np.linalg.qr(z)[0]
        z = y @ (y.T @ z)
    qm = np.linalg.qr(z)[0]
    # the tall orientation is markedly faster in LAPACK
    vb, s, ubt = sla.svd(y.T @ qm, full_matrices=False, check_finite=False)
    return qm @ ubt.T, s, vb.T


def svt_randomized(y: np.ndarray, spec: PenaltySpec, tau: float, rank_guess: int = 10,
                   oversampling: int = 5, power_iters: int = 1, rng=None,
                   max_doublings: int = 4, full_output: bool = False):
    """Generalized SVT with a randomized range finder in place of the full SVD.

    If the ``rank_guess``-th sketched singular value is still above the kill
    threshold the rank guess is doubled, at most ``max_doublings`` times, before falling
    back to :func:`svt_generalized`. With ``full_output`` the shrunk singular
    values and the final rank guess are returned as well.
    """
    if rank_guess < 1:
        raise ValueError("rank_guess must be at least 1")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(rng)
    thr = prox_threshold(spec, tau)
    k = int(rank_guess)
    for _ in range(max_doublings + 1):
        if k + oversampling >= min(y.shape):
            break
        u, s, vt = _range_svd(y, k, oversampling, power_iters, rng)
        # the oversampling directions are too inaccurate to be kept
        if s[k - 1] > thr:
            k *= 2
            continue
        if tau > 0:
            s = prox_scalar(spec, tau, s)
        keep = s > 0
        out = (u[:, keep] * s[keep]) @ vt[keep]
        return (out, s[keep], k) if full_output else out
    out, s = svt_generalized(y, spec, tau, full_output=True)
    return (out, s, k) if full_output else out


def prox_entrywise(a: np.ndarray, spec: PenaltySpec, lam: float) -> np.ndarray:
    """Prox of ``lam · Σ psi(|a_i|)``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return prox_scalar(spec, lam, a)


def tube_norms(a: np.ndarray) -> np.ndarray:
    """Frobenius norm of every tube ``a[i1, i2, :, ..., :]``."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 3:
        raise ValueError("tube structure needs an order >= 3 tensor")
    return np.sqrt(np.sum(a * a, axis=tuple(range(2, a.ndim))))


def prox_tube(a: np.ndarray, spec: PenaltySpec, lam: float) -> np.ndarray:
    """Prox of ``lam · Σ_{i1,i2} psi(‖a[i1, i2, ...]‖_F)``: each tube is shrunk
    along its own direction."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    a = np.asarray(a, dtype=float)
    norms = tube_norms(a)
    shrunk = prox_scalar(spec, lam, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0, shrunk / norms, 0.0)
    return a * scale.reshape(scale.shape + (1,) * (a.ndim - 2))
