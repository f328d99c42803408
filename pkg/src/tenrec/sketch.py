"""Random sketching matrices.

All families draw from numpy's PCG64 generator (``numpy.random.default_rng``),
so a fixed seed reproduces the matrix bit for bit on a given platform.

Families
--------
gaussian         i.i.d. N(0, 1)
uniform          i.i.d. Unif(-sqrt(3), sqrt(3)), unit variance
kr-gaussian      column-wise Khatri-Rao product of Gaussian factors
kr-uniform       column-wise Khatri-Rao product of uniform factors
kronecker-srft   Kronecker product of subsampled randomized real Fourier blocks
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

FAMILIES = ("gaussian", "uniform", "kr-gaussian", "kr-uniform", "kronecker-srft")


@dataclass(frozen=True)
class SketchSpec:
    family: str = "gaussian"
    factor_shapes: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown sketch family {self.family!r}; choose from {FAMILIES}")


def _base(rng: np.random.Generator, kind: str, shape) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(shape)
    lim = np.sqrt(3.0)
    return rng.uniform(-lim, lim, size=shape)


def khatri_rao(mats) -> np.ndarray:
    """Column-wise Kronecker product; column j is ``a1[:, j] ⊗ a2[:, j] ⊗ ...``."""
    out = mats[0]
    for m in mats[1:]:
        out = np.einsum("ik,jk->ijk", out, m).reshape(-1, out.shape[1])
    return out


def real_dft_columns(n: int, cols) -> np.ndarray:
    """Selected columns of the orthonormal real Fourier basis of size n.

    The basis is the real form of the unitary DFT: a constant column,
    sqrt(2)-scaled real and imaginary parts of each non-redundant frequency,
    and the alternating column when n is even.
    """
    t = np.arange(n)[:, None]
    half = (n - 1) // 2
    cols = np.asarray(cols)
    out = np.empty((n, cols.size))
    for pos, c in enumerate(cols):
        if c == 0:
            out[:, pos] = 1.0 / np.sqrt(n)
        elif c <= half:
            out[:, pos] = np.sqrt(2.0 / n) * np.cos(2 * np.pi * c * t[:, 0] / n)
        elif c <= 2 * half:
            out[:, pos] = np.sqrt(2.0 / n) * np.sin(2 * np.pi * (c - half) * t[:, 0] / n)
        else:
            out[:, pos] = (-1.0) ** t[:, 0] / np.sqrt(n)
    return out


def srft_block(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """``diag(signs) · F · S`` with F the real orthonormal Fourier basis and S a
    uniform choice of ``cols`` distinct columns. Columns are orthonormal."""
    if cols > rows:
        raise ValueError(f"SRFT block cannot have more columns ({cols}) than rows ({rows})")
    signs = rng.choice((-1.0, 1.0), size=rows)
    picked = np.sort(rng.choice(rows, size=cols, replace=False))
    return signs[:, None] * real_dft_columns(rows, picked)


def _near_uniform_split(total: int, caps) -> list[int] | None:
    """Factor ``total`` into ``len(caps)`` integers ``s_h <= caps[h]`` whose
    product is ``total``, preferring the most balanced split."""
    divisors = [d for d in range(1, total + 1) if total % d == 0]
    best, best_score = None, None
    choices = [[d for d in divisors if d <= c] for c in caps[:-1]]
    for combo in product(*choices):
        rest, rem = total, True
        for d in combo:
            if rest % d:
                rem = False
                break
            rest //= d
        if not rem or rest > caps[-1]:
            continue
        split = list(combo) + [rest]
        score = max(split) / min(split)
        if best_score is None or score < best_score:
            best, best_score = split, score
    return best


def default_factor_shapes(family: str, rows: int, cols: int, row_factors=None) -> list[tuple[int, int]]:
    """Factor shapes used when the caller does not fix them.

    ``row_factors`` is a hint such as the extents of the tensor modes that make
    up the sketched dimension; without it the rows are split into two
    near-equal factors.
    """
    if row_factors is None:
        a = max(d for d in range(1, int(np.sqrt(rows)) + 1) if rows % d == 0)
        row_factors = [a, rows // a] if a > 1 else [rows]
    row_factors = [int(r) for r in row_factors]
    if int(np.prod(row_factors)) != rows:
        raise ValueError(f"row factors {row_factors} do not multiply to {rows}")
    if family.startswith("kr-"):
        return [(r, cols) for r in row_factors]
    split = _near_uniform_split(cols, row_factors)
    if split is None:
        return [(rows, cols)]
    return list(zip(row_factors, split))


def make_sketch(spec: SketchSpec, rows: int, cols: int, rng=None, row_factors=None) -> np.ndarray:
    """Draw a ``rows x cols`` sketching matrix.

    ``rng`` overrides ``spec.seed`` so a caller can draw several matrices from
    one stream.
    """
    if rows < 1 or cols < 1:
        raise ValueError("sketch dimensions must be positive")
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    family = spec.family
    if family in ("gaussian", "uniform"):
        return _base(rng, family, (rows, cols))

    shapes = spec.factor_shapes
    if shapes is None:
        shapes = default_factor_shapes(family, rows, cols, row_factors)
    shapes = [(int(r), int(c)) for r, c in shapes]
    prow = int(np.prod([r for r, _ in shapes]))
    if prow != rows:
        raise ValueError(f"factor rows {shapes} multiply to {prow}, not {rows}")

    if family.startswith("kr-"):
        if any(c != cols for _, c in shapes):
            raise ValueError(f"Khatri-Rao factors must all have {cols} columns, got {shapes}")
        kind = family[3:]
        return khatri_rao([_base(rng, kind, s) for s in shapes])

    pcol = int(np.prod([c for _, c in shapes]))
    if pcol != cols:
        raise ValueError(f"factor columns {shapes} multiply to {pcol}, not {cols}")
    out = np.ones((1, 1))
    for r, c in shapes:
        out = np.kron(out, srft_block(rng, r, c))
    return out
