"""ADMM solvers for gradient-domain FCTN tensor recovery.

All four models share one splitting. For each gradient mode ``t`` and each
balanced unfolding ``k`` an auxiliary ``Z[t,k] = ∇_t L`` carries the spectral
penalty, and a copy ``B = L`` carries the observation constraint (masked
equality for the unquantized models, the ``‖L‖_∞ ≤ α`` box for the quantized
ones). One iteration is

1. ``Z`` step: generalized SVT of every unfolded ``∇_t L + Λ/ρ``;
2. ``B``/``E`` step: projection onto the constraint, with the sparse term
   ``E`` obtained in closed form from the noise prox;
3. ``L`` step: a linear system whose circulant part is diagonalized by the
   multi-dimensional DFT (plus a short preconditioned CG for the sampling
   term of the quantized models);
4. multiplier ascent and ``ρ ← min(μρ, ρ_max)``.

The quantized objectives are multiplied by the sample count ``m``, which
leaves the minimizer unchanged and keeps the data term on the scale of ``ρ``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .degrade import Observation
from .prox import (L1, PenaltySpec, penalty_eval, prox_entrywise, prox_tube, svt_generalized, svt_randomized,
                   tube_norms)
from .regularizer import GntctvSpec
from .tensor import fold, gradient, gradient_adjoint, gradient_eigenvalues, unfold


@dataclass
class SolverConfig:
    """Model weights and ADMM settings.

    ``lam`` weights the sparse term of the robust model and defaults to
    ``1/sqrt(N * max extent)``. ``lam1`` and ``lam2`` weight the regularizer
    and the sparse term of the quantized models, whose data term is the mean
    squared misfit; ``lam2`` defaults to a kill threshold of ``alpha/4`` per
    sample. ``reg`` defaults to all gradient modes, uniform weights and l1.
    The randomized backend starts every SVT at ``rank_guess`` and then uses
    the previous retained rank plus ``rank_buffer``.
    """

    reg: GntctvSpec | None = None
    noise_penalty: PenaltySpec = field(default_factory=lambda: L1)
    noise_structure: str = "entrywise"
    lam: float | None = None
    lam1: float = 3e-4
    lam2: float | None = None
    alpha: float = 1.0
    rho0: float = 1e-2
    rho_growth: float = 1.1
    rho_max: float = 1e6
    tol: float = 1e-5
    max_iters: int = 200
    backend: str = "exact"
    rank_guess: int = 10
    rank_buffer: int = 5
    oversampling: int = 5
    power_iters: int = 1
    seed: int = 0
    cg_iters: int = 20
    cg_tol: float = 1e-8

    def __post_init__(self):
        if self.noise_structure not in ("entrywise", "tube"):
            raise ValueError("noise_structure must be 'entrywise' or 'tube'")
        if self.backend not in ("exact", "randomized"):
            raise ValueError("backend must be 'exact' or 'randomized'")
        for name in ("lam1", "rho0", "tol", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("lam", "lam2"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.rho_growth < 1:
            raise ValueError("rho_growth must be at least 1")


@dataclass
class SolverReport:
    iterations: int = 0
    converged: bool = False
    primal: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    seconds: float = 0.0
    constraint_violation: float = 0.0

    def trace_rows(self):
        for i in range(self.iterations):
            yield {
                "iteration": i + 1,
                "primal": self.primal[i],
                "dual": self.dual[i],
                "rel_change": self.rel_change[i],
                "objective": self.objective[i],
                "mean_rank": float(np.mean(self.ranks[i])) if self.ranks[i] else 0.0,
            }


def _sq(a) -> float:
    a = a.ravel()
    return float(np.dot(a, a))


def _default_lam(shape) -> float:
    return 1.0 / np.sqrt(len(shape) * max(shape))


class _CirculantSolver:
    """Solves ``(c·I + ρ·K·Σ_t ∇_tᵀ∇_t) x = b`` by the N-D DFT."""

    def __init__(self, shape, modes, copies: int):
        self.shape = tuple(shape)
        lap = np.zeros(self.shape)
        for t in modes:
            ev = gradient_eigenvalues(self.shape[t])
            lap = lap + ev.reshape([-1 if k == t else 1 for k in range(len(self.shape))])
        # the spectrum is symmetric, so the real transform's half grid suffices
        self.lap = copies * lap[..., : self.shape[-1] // 2 + 1]

    def solve(self, b, c, rho):
        denom = c + rho * self.lap
        return sfft.irfftn(sfft.rfftn(b) / denom, s=self.shape)


class _Admm:
    def __init__(self, obs: Observation, cfg: SolverConfig, model: str):
        self.obs = obs
        self.cfg = cfg
        self.model = model
        self.shape = obs.shape
        order = len(self.shape)
        self.reg = cfg.reg if cfg.reg is not None else GntctvSpec(order)
        if self.reg.order != order:
            raise ValueError(f"regularizer built for order {self.reg.order}, data has order {order}")
        self.quantized = model in ("gnqtc", "gnqrtc")
        self.robust = model in ("gnrtc", "gnqrtc")
        self.mask = obs.mask
        self.m = max(obs.indices.size, 1)
        self.data = obs.filled()
        if self.robust and cfg.noise_structure == "tube" and order < 3:
            raise ValueError("tube-structured noise needs an order >= 3 tensor")
        if self.quantized:
            self.reg_weight = self.m * cfg.lam1
            # with lam2 unset the per-entry kill threshold is a quarter of the box
            self.noise_weight = self.m * cfg.lam2 if cfg.lam2 is not None else cfg.alpha / 4
        else:
            self.reg_weight = 1.0
            self.noise_weight = cfg.lam if cfg.lam is not None else _default_lam(self.shape)
        self.d = order // 2
        self.perms = self.reg.perms
        self.weights = self.reg.weights
        self.modes = self.reg.modes
        self.gamma = len(self.modes)
        self.pairs = [(t, k) for t in self.modes for k in range(len(self.perms)) if self.weights[k] > 0]
        self.circ = _CirculantSolver(self.shape, self.modes, len(self.pairs) // self.gamma)
        self.rng = np.random.default_rng(cfg.seed)
        self.rank_guess = {pk: cfg.rank_guess for pk in self.pairs}

    # -- building blocks -------------------------------------------------
    def _svt(self, key, mat, tau):
        cfg = self.cfg
        spec = self.reg.penalty
        if cfg.backend == "exact":
            out, s = svt_generalized(mat, spec, tau, full_output=True)
        else:
            out, s, _ = svt_randomized(mat, spec, tau, rank_guess=self.rank_guess[key],
                                       oversampling=cfg.oversampling, power_iters=cfg.power_iters,
                                       rng=self.rng, full_output=True)
            self.rank_guess[key] = max(1, s.size + cfg.rank_buffer)
        return out, s

    def _noise_prox(self, a, lam):
        spec = self.cfg.noise_penalty
        if self.cfg.noise_structure == "tube":
            return prox_tube(a, spec, lam)
        return prox_entrywise(a, spec, lam)

    def _noise_value(self, e):
        spec = self.cfg.noise_penalty
        if self.cfg.noise_structure == "tube":
            return float(np.sum(penalty_eval(spec, tube_norms(e))))
        return float(np.sum(penalty_eval(spec, e)))

    def _estimate(self, l, e):
        if self.quantized:
            return np.clip(l, -self.cfg.alpha, self.cfg.alpha)
        out = l.copy()
        target = self.data - e if self.robust else self.data
        out[self.mask] = target[self.mask]
        return out

    # -- main loop -------------------------------------------------------
    def run(self):
        cfg = self.cfg
        t0 = time.perf_counter()
        mask = self.mask
        data = self.data
        l = data.copy()
        if self.quantized:
            l = np.clip(l, -cfg.alpha, cfg.alpha)
        e = np.zeros(self.shape)
        grads = {t: gradient(l, t) for t in self.modes}
        z = {(t, k): grads[t].copy() for t, k in self.pairs}
        lam_z = {pk: np.zeros(self.shape) for pk in self.pairs}
        b = l.copy()
        pi = np.zeros(self.shape)
        rho = cfg.rho0
        report = SolverReport()
        est = self._estimate(l, e)

        for _ in range(cfg.max_iters):
            # Z step
            z_old = z
            z = {}
            ranks = []
            reg_val = 0.0
            for t, k in self.pairs:
                perm = self.perms[k]
                mat = unfold(grads[t] + lam_z[(t, k)] / rho, perm, self.d)
                tau = self.weights[k] * self.reg_weight / (self.gamma * rho)
                out, s = self._svt((t, k), mat, tau)
                z[(t, k)] = fold(out, self.shape, perm, self.d)
                ranks.append(int(s.size))
                reg_val += self.weights[k] * float(np.sum(penalty_eval(self.reg.penalty, s)))
            reg_val /= self.gamma

            # B / E step
            b_old = b
            v = l + pi / rho
            if self.quantized:
                b = np.clip(v, -cfg.alpha, cfg.alpha)
                if self.robust:
                    resid = np.where(mask, data - l, 0.0)
                    e = self._noise_prox(resid, self.noise_weight) * mask
            else:
                b = v.copy()
                if self.robust:
                    resid = np.where(mask, data - v, 0.0)
                    e = self._noise_prox(resid, self.noise_weight / rho) * mask
                    b[mask] = (data - e)[mask]
                else:
                    b[mask] = data[mask]

            # L step
            rhs = rho * b - pi
            for t in self.modes:
                keys = [pk for pk in self.pairs if pk[0] == t]
                acc = rho * z[keys[0]] - lam_z[keys[0]]
                for pk in keys[1:]:
                    acc += rho * z[pk]
                    acc -= lam_z[pk]
                rhs += gradient_adjoint(acc, t)
            if self.quantized:
                target = np.where(mask, data - e, 0.0)
                rhs += target
                l = self._pcg(rhs, l, rho)
            else:
                l = self.circ.solve(rhs, rho, rho)

            # multipliers
            grads = {t: gradient(l, t) for t in self.modes}
            r = l - b
            prim_sq = _sq(r)
            pi += rho * r
            dual_sq = _sq(b - b_old)
            for pk in self.pairs:
                r = grads[pk[0]] - z[pk]
                prim_sq += _sq(r)
                r *= rho
                lam_z[pk] += r
                dual_sq += _sq(z[pk] - z_old[pk])

            scale = max(np.linalg.norm(l), 1e-12)
            new_est = self._estimate(l, e)
            change = np.linalg.norm(new_est - est) / max(np.linalg.norm(est), 1e-12)
            est = new_est

            obj = reg_val * self.reg_weight
            if self.robust:
                obj += self.noise_weight * self._noise_value(e)
            if self.quantized:
                fit = np.where(mask, est + e - data, 0.0)
                obj += 0.5 * float(np.sum(fit * fit))
                obj /= self.m
            report.primal.append(float(np.sqrt(prim_sq) / scale))
            report.dual.append(float(rho * np.sqrt(dual_sq) / scale))
            report.rel_change.append(float(change))
            report.objective.append(float(obj))
            report.ranks.append(ranks)
            report.iterations += 1
            rho = min(cfg.rho_growth * rho, cfg.rho_max)
            if change < cfg.tol:
                report.converged = True
                break

        report.seconds = time.perf_counter() - t0
        if self.quantized:
            report.constraint_violation = float(max(np.max(np.abs(est)) - cfg.alpha, 0.0))
        else:
            fit = est + e - data if self.robust else est - data
            report.constraint_violation = float(np.max(np.abs(fit[mask]), initial=0.0))
        return est, e, report

    def _pcg(self, rhs, x0, rho):
        """Preconditioned CG on ``(P_Ω + ρI + ρK Σ∇ᵀ∇) x = rhs``; the
        preconditioner replaces ``P_Ω`` by its mean."""
        cfg = self.cfg
        mask = self.mask.astype(float)
        c = mask.mean()

        def apply(x):
            return mask * x + rho * x + self._lap_apply(x, rho)

        def precond(r):
            return self.circ.solve(r, c + rho, rho)

        x = x0.copy()
        r = rhs - apply(x)
        nb = max(np.linalg.norm(rhs), 1e-300)
        if np.linalg.norm(r) <= cfg.cg_tol * nb:
            return x
        zr = precond(r)
        p = zr.copy()
        rz = float(np.sum(r * zr))
        for _ in range(cfg.cg_iters):
            ap = apply(p)
            step = rz / float(np.sum(p * ap))
            x += step * p
            r -= step * ap
            if np.linalg.norm(r) <= cfg.cg_tol * nb:
                break
            zr = precond(r)
            rz_new = float(np.sum(r * zr))
            p = zr + (rz_new / rz) * p
            rz = rz_new
        return x

    def _lap_apply(self, x, rho):
        out = np.zeros_like(x)
        copies = len(self.pairs) // self.gamma
        for t in self.modes:
            out += gradient_adjoint(gradient(x, t), t)
        return rho * copies * out


def _check(obs: Observation, quantized: bool):
    if quantized and obs.delta is None and not obs.one_bit:
        raise ValueError("this model expects quantized measurements (delta or one-bit)")
    if not quantized and obs.quantized:
        raise ValueError("this model expects unquantized measurements")


def solve_gntc(obs: Observation, cfg: SolverConfig | None = None):
    """Completion: minimize the regularizer subject to ``P_Ω(L) = P_Ω(M)``.

    Returns ``(L, report)``.
    """
    cfg = cfg or SolverConfig()
    _check(obs, False)
    l, _, report = _Admm(obs, cfg, "gntc").run()
    return l, report


def solve_gnrtc(obs: Observation, cfg: SolverConfig | None = None):
    """Robust completion: regularizer plus ``lam·psi(h(E))`` subject to
    ``P_Ω(L + E) = P_Ω(M)``. Returns ``(L, E, report)``."""
    cfg = cfg or SolverConfig()
    _check(obs, False)
    return _Admm(obs, cfg, "gnrtc").run()


def solve_gnqtc(obs: Observation, cfg: SolverConfig | None = None):
    """Completion from quantized samples with the box ``‖L‖_∞ ≤ alpha``.

    Returns ``(L, report)``.
    """
    cfg = cfg or SolverConfig()
    _check(obs, True)
    l, _, report = _Admm(obs, cfg, "gnqtc").run()
    return l, report


def solve_gnqrtc(obs: Observation, cfg: SolverConfig | None = None):
    """Robust completion from quantized samples. Returns ``(L, E, report)``."""
    cfg = cfg or SolverConfig()
    _check(obs, True)
    return _Admm(obs, cfg, "gnqrtc").run()
