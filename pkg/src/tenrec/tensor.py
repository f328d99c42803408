"""Dense order-N tensor algebra.

Tensors are plain ``numpy.ndarray`` objects. Every reshape in this module
uses column-major (first index fastest) linearization, so unfoldings agree
with the usual MATLAB-style ``reshape`` semantics. Permutation vectors are
0-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_perm(n, order: int) -> tuple[int, ...]:
    n = tuple(int(i) for i in n)
    if len(n) != order:
        raise ValueError(f"permutation of length {len(n)} for an order-{order} tensor")
    if sorted(n) != list(range(order)):
        raise ValueError(f"{n} is not a permutation of 0..{order - 1}")
    return n


def permute(x: np.ndarray, n) -> np.ndarray:
    """Generalized transposition: mode ``n[i]`` of ``x`` becomes mode ``i``."""
    x = np.asarray(x)
    return np.transpose(x, _check_perm(n, x.ndim))


def ipermute(x: np.ndarray, n) -> np.ndarray:
    """Inverse of :func:`permute`."""
    x = np.asarray(x)
    return np.transpose(x, np.argsort(_check_perm(n, x.ndim)))


def unfold(x: np.ndarray, n, d: int) -> np.ndarray:
    """Generalized unfolding ``X[n_{1:d}; n_{d+1:N}]``.

    Rows index the modes ``n[:d]``, columns the modes ``n[d:]``, each group
    linearized column-major.
    """
    x = np.asarray(x)
    if not 1 <= d <= x.ndim - 1:
        raise ValueError(f"split point d={d} outside 1..{x.ndim - 1}")
    xp = permute(x, n)
    rows = int(np.prod(xp.shape[:d]))
    return np.reshape(xp, (rows, -1), order="F")


def fold(m: np.ndarray, shape, n, d: int) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    n = _check_perm(n, len(shape))
    if not 1 <= d <= len(shape) - 1:
        raise ValueError(f"split point d={d} outside 1..{len(shape) - 1}")
    pshape = tuple(shape[i] for i in n)
    m = np.asarray(m)
    expected = (int(np.prod(pshape[:d])), int(np.prod(pshape[d:])))
    if m.shape != expected:
        raise ValueError(f"matrix of shape {m.shape} cannot fold into {shape} (expected {expected})")
    return ipermute(np.reshape(m, pshape, order="F"), n)


def mode_unfold(x: np.ndarray, t: int) -> np.ndarray:
    """Classical mode-t matricization (mode t first, the rest in natural order)."""
    x = np.asarray(x)
    return np.reshape(np.moveaxis(x, t, 0), (x.shape[t], -1), order="F")


def mode_fold(m: np.ndarray, t: int, shape) -> np.ndarray:
    shape = list(shape)
    rest = shape[:t] + shape[t + 1:]
    return np.moveaxis(np.reshape(m, [m.shape[0]] + rest, order="F"), 0, t)


def mode_product(x: np.ndarray, u: np.ndarray, t: int) -> np.ndarray:
    """Mode-t product ``x ×_t u``; ``u`` has ``x.shape[t]`` columns."""
    x = np.asarray(x)
    u = np.asarray(u)
    if not 0 <= t < x.ndim:
        raise ValueError(f"mode {t} out of range for order {x.ndim}")
    if u.ndim != 2 or u.shape[1] != x.shape[t]:
        raise ValueError(f"matrix {u.shape} incompatible with mode {t} of extent {x.shape[t]}")
    y = np.tensordot(u, x, axes=(1, t))
    return np.moveaxis(y, 0, t)


def diff_matrix(size: int) -> np.ndarray:
    """Row-circulant matrix of ``(-1, 1, 0, ..., 0)``."""
    return np.roll(np.eye(size), 1, axis=1) - np.eye(size)


def _check_mode(x: np.ndarray, t: int) -> None:
    if not 0 <= t < x.ndim:
        raise ValueError(f"mode {t} out of range for order {x.ndim}")


def gradient(x: np.ndarray, t: int) -> np.ndarray:
    """Circular forward difference along mode ``t``: ``y[i] = x[i+1] - x[i]``.

    Equal to ``mode_product(x, diff_matrix(I_t), t)`` without forming the matrix.
    """
    x = np.asarray(x, dtype=float)
    _check_mode(x, t)
    return np.roll(x, -1, axis=t) - x


def gradient_adjoint(g: np.ndarray, t: int) -> np.ndarray:
    """Adjoint of :func:`gradient`: ``y[i] = g[i-1] - g[i]``."""
    g = np.asarray(g, dtype=float)
    _check_mode(g, t)
    return np.roll(g, 1, axis=t) - g


def gradient_eigenvalues(size: int) -> np.ndarray:
    """Eigenvalues of ``D^T D`` for the circulant difference of the given size,
    ordered as the DFT frequencies of ``numpy.fft``."""
    return 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(size) / size)


@dataclass
class FctnFactors:
    """Factors of a fully-connected tensor network.

    Factor ``k`` is order N with extent ``shape[k]`` in mode ``k`` and extent
    ``rank[j, k]`` in every other mode ``j``.
    """

    factors: list
    rank: np.ndarray

    def __post_init__(self):
        self.rank = np.asarray(self.rank, dtype=int)
        n = len(self.factors)
        if self.rank.shape != (n, n):
            raise ValueError(f"rank matrix must be {n}x{n}, got {self.rank.shape}")
        off = ~np.eye(n, dtype=bool)
        if not np.array_equal(self.rank, self.rank.T):
            raise ValueError("rank matrix must be symmetric")
        if np.any(self.rank[off] < 1):
            raise ValueError("bond dimensions must be positive")
        for k, g in enumerate(self.factors):
            g = np.asarray(g)
            if g.ndim != n:
                raise ValueError(f"factor {k} has order {g.ndim}, expected {n}")
            for j in range(n):
                if j != k and g.shape[j] != self.rank[j, k]:
                    raise ValueError(f"factor {k} mode {j} has extent {g.shape[j]}, rank says {self.rank[j, k]}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(np.shape(g)[k] for k, g in enumerate(self.factors))

    @classmethod
    def random(cls, shape, rank, rng=None) -> "FctnFactors":
        rng = np.random.default_rng(rng)
        rank = np.asarray(rank, dtype=int)
        n = len(shape)
        factors = []
        for k in range(n):
            dims = [shape[k] if j == k else rank[j, k] for j in range(n)]
            factors.append(rng.standard_normal(dims))
        return cls(factors, rank)

    def permuted(self, n) -> "FctnFactors":
        """Factors of ``permute(fctn_contract(self), n)`` (transpositional invariance)."""
        n = _check_perm(n, len(self.factors))
        return FctnFactors([permute(self.factors[i], n) for i in n], self.rank[np.ix_(n, n)])


def fctn_contract(f: FctnFactors) -> np.ndarray:
    """Contract an FCTN into the full tensor, absorbing factors left to right.

    The running network keeps one axis per physical mode already absorbed and
    one per still-open bond ``(i, j)`` with ``i`` absorbed and ``j`` pending.
    """
    n = len(f.factors)
    # axis labels: ("p", k) physical mode k, ("b", i, j) bond between i<j
    cur = np.asarray(f.factors[0], dtype=float)
    labels = [("p", 0)] + [("b", 0, j) for j in range(1, n)]
    for k in range(1, n):
        g = np.asarray(f.factors[k], dtype=float)
        glabels = [("p", k) if j == k else ("b", min(j, k), max(j, k)) for j in range(n)]
        shared = [lab for lab in glabels if lab in labels]
        ax_cur = [labels.index(lab) for lab in shared]
        ax_g = [glabels.index(lab) for lab in shared]
        cur = np.tensordot(cur, g, axes=(ax_cur, ax_g))
        labels = [lab for lab in labels if lab not in shared] + [lab for lab in glabels if lab not in shared]
    order = [labels.index(("p", k)) for k in range(n)]
    return np.transpose(cur, order)


def fctn_rank_bound(rank, n, d: int) -> int:
    """Upper bound ``prod_{i<=d} prod_{j>d} R[n_i, n_j]`` on the rank of the
    ``(n, d)`` generalized unfolding of an FCTN tensor."""
    rank = np.asarray(rank, dtype=int)
    n = _check_perm(n, rank.shape[0])
    if rank.shape != (len(n), len(n)):
        raise ValueError("rank matrix must be square")
    bound = 1
    for i in n[:d]:
        for j in n[d:]:
            bound *= int(rank[i, j])
    return bound

