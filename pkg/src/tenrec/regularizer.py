"""Gradient-domain FCTN regularizer.

For every mode ``t`` in the prior set, the circular gradient tensor along
``t`` is unfolded in each balanced way (first ``floor(N/2)`` modes against the
rest), and the nonconvex spectral penalty of those unfoldings is averaged with
weights ``alpha_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg as sla

from .prox import L1, PenaltySpec, penalty_eval
from .tensor import gradient, unfold


def num_balanced_unfoldings(order: int) -> int:
    c = comb(order, order // 2)
    return c if order % 2 else c // 2


def balanced_unfoldings(order: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Balanced mode splits ``(first, second)`` with ``floor(N/2)`` modes first.

    Splits are listed lexicographically by first half. For even ``N`` each
    complementary pair appears once, as the split whose first half holds mode 0.
    """
    if order < 2:
        raise ValueError("balanced unfoldings need order >= 2")
    d = order // 2
    out = []
    for first in combinations(range(order), d):
        if order % 2 == 0 and 0 not in first:
            continue
        out.append((first, tuple(m for m in range(order) if m not in first)))
    return out


@dataclass
class GntctvSpec:
    order: int
    modes: tuple | None = None
    weights: tuple | None = None
    penalty: PenaltySpec = field(default_factory=lambda: L1)

    def __post_init__(self):
        if self.modes is None:
            self.modes = tuple(range(self.order))
        self.modes = tuple(int(t) for t in self.modes)
        if not self.modes:
            raise ValueError("the prior set of gradient modes must be nonempty")
        for t in self.modes:
            if not 0 <= t < self.order:
                raise ValueError(f"gradient mode {t} out of range for order {self.order}")
        nbar = num_balanced_unfoldings(self.order)
        if self.weights is None:
            self.weights = (1.0 / nbar,) * nbar
        self.weights = tuple(float(w) for w in self.weights)
        if len(self.weights) != nbar:
            raise ValueError(f"expected {nbar} unfolding weights, got {len(self.weights)}")
        if min(self.weights) < 0 or abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError("unfolding weights must be nonnegative and sum to 1")

    @property
    def splits(self):
        return balanced_unfoldings(self.order)

    @property
    def perms(self) -> list[tuple[int, ...]]:
        return [a + b for a, b in self.splits]


def gntctv(x: np.ndarray, spec: GntctvSpec) -> float:
    """Value of the regularizer at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != spec.order:
        raise ValueError(f"spec built for order {spec.order}, tensor has order {x.ndim}")
    d = x.ndim // 2
    total = 0.0
    for t in spec.modes:
        g = gradient(x, t)
        for w, perm in zip(spec.weights, spec.perms):
            if w == 0:
                continue
            s = sla.svd(unfold(g, perm, d), compute_uv=False, check_finite=False)
            total += w * float(np.sum(penalty_eval(spec.penalty, s)))
    return total / len(spec.modes)
