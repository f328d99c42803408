import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenrec.prox import (KINDS, PenaltySpec, penalty_eval, prox_entrywise, prox_scalar, prox_threshold, prox_tube,
                         soft_threshold, svt_generalized, svt_randomized)

SPECS = [
    PenaltySpec("l1"),
    PenaltySpec("firm", theta=1.5),
    PenaltySpec("lq", q=0.5),
    PenaltySpec("lq", q=0.2),
    PenaltySpec("mcp", gamma=3.0),
    PenaltySpec("scad", a=3.7),
    PenaltySpec("log", eps=0.5),
    PenaltySpec("capped-lq", q=0.5, theta=1.0),
    PenaltySpec("capped-lq", q=1.0, theta=2.0),
]


def ref_penalty(spec, x):
    """Penalties written out from their textbook definitions."""
    t = np.abs(x)
    if spec.kind == "l1":
        return t
    if spec.kind in ("mcp", "firm"):
        g = spec.gamma if spec.kind == "mcp" else spec.theta
        return np.where(t <= g, t - t * t / (2 * g), g / 2)
    if spec.kind == "scad":
        a = spec.a
        mid = (2 * a * t - t * t - 1) / (2 * (a - 1))
        return np.where(t <= 1, t, np.where(t <= a, mid, (a + 1) / 2))
    if spec.kind == "lq":
        return t**spec.q
    if spec.kind == "log":
        return np.log(1 + t / spec.eps)
    return np.minimum(t, spec.theta) ** spec.q


def grid_min(spec, mu, v, n=10**6):
    lo, hi = min(0.0, v) - 0.5, max(0.0, v) + 0.5
    grid = np.linspace(lo, hi, n)
    return float(np.min(mu * ref_penalty(spec, grid) + 0.5 * (grid - v) ** 2))


def objective(spec, mu, v, x):
    return float(mu * ref_penalty(spec, np.asarray(x)) + 0.5 * (x - v) ** 2)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}")
def test_penalty_matches_definition(spec):
    x = np.random.default_rng(0).uniform(-6, 6, 500)
    assert np.allclose(penalty_eval(spec, x), ref_penalty(spec, x), atol=1e-14)


def test_penalty_examples():
    for kind in KINDS:
        assert penalty_eval(PenaltySpec(kind), 0.0) == 0.0
    assert penalty_eval(PenaltySpec("l1"), -2.5) == 2.5
    assert penalty_eval(PenaltySpec("lq", q=0.5), 4.0) == 2.0


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}")
def test_prox_beats_grid(spec):
    rng = np.random.default_rng(1)
    mus = rng.uniform(0.01, 4.0, 60)
    vs = rng.uniform(-8, 8, 60)
    out = prox_scalar(spec, mus, vs)
    for mu, v, x in zip(mus, vs, out):
        assert objective(spec, mu, v, x) <= grid_min(spec, mu, v, 200_001) + 1e-6


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}")
def test_prox_shrinks_toward_zero(spec):
    v = np.linspace(-6, 6, 241)
    x = prox_scalar(spec, 0.7, v)
    assert np.all(np.abs(x) <= np.abs(v) + 1e-12)
    assert np.all(x * v >= 0)
    assert np.all(np.diff(x) >= -1e-9)
    assert prox_scalar(spec, 0.7, 0.0) == 0.0


def test_prox_examples():
    assert prox_scalar(PenaltySpec("l1"), 0.5, 1.2) == pytest.approx(0.7)
    spec = PenaltySpec("mcp", gamma=3.0)
    x = float(prox_scalar(spec, 0.8, 1.5))
    grid = np.linspace(-1, 3, 10**6)
    xg = grid[np.argmin(0.8 * ref_penalty(spec, grid) + 0.5 * (grid - 1.5) ** 2)]
    assert x == pytest.approx(xg, abs=1e-4)
    # frozen from the grid oracle: (v - mu) / (1 - mu / gamma)
    assert x == pytest.approx(0.7 / (1 - 0.8 / 3), abs=1e-12)


def test_prox_rejects_nonpositive_mu():
    with pytest.raises(ValueError):
        prox_scalar(PenaltySpec("l1"), 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.floats(0.01, 5.0), st.floats(-10, 10))
def test_prox_is_global_minimizer(spec, mu, v):
    x = float(prox_scalar(spec, mu, v))
    assert objective(spec, mu, v, x) <= grid_min(spec, mu, v, 100_001) + 1e-6


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}")
def test_kill_threshold(spec):
    for mu in (0.1, 0.9, 2.5):
        thr = prox_threshold(spec, mu)
        assert prox_scalar(spec, mu, thr * (1 - 1e-6)) == 0
        assert prox_scalar(spec, mu, thr * (1 + 1e-6) + 1e-12) != 0


def test_soft_threshold():
    assert np.allclose(soft_threshold([-2.0, 0.3, 1.5], 0.5), [-1.5, 0.0, 1.0])


def classical_svt(y, tau):
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    return (u * np.maximum(s - tau, 0)) @ vt


def spectral_objective(spec, tau, x, y):
    s = np.linalg.svd(x, compute_uv=False)
    return tau * np.sum(ref_penalty(spec, s)) + 0.5 * np.linalg.norm(x - y) ** 2


class TestSvt:
    def test_tau_zero(self):
        y = np.random.default_rng(0).standard_normal((5, 4))
        assert np.array_equal(svt_generalized(y, PenaltySpec("l1"), 0.0), y)

    def test_diag(self):
        out = svt_generalized(np.diag([3.0, 1.0]), PenaltySpec("l1"), 2.0)
        assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-14)

    def test_l1_is_classical(self):
        rng = np.random.default_rng(1)
        for shape in [(6, 4), (30, 50), (20, 20)]:
            y = rng.standard_normal(shape)
            assert np.allclose(svt_generalized(y, PenaltySpec("l1"), 1.3), classical_svt(y, 1.3), rtol=0, atol=1e-10)

    @pytest.mark.parametrize("spec", SPECS[1:], ids=lambda s: f"{s.kind}")
    def test_objective_not_worse(self, spec):
        rng = np.random.default_rng(2)
        for _ in range(5):
            y = 2 * rng.standard_normal((6, 4))
            tau = rng.uniform(0.2, 2)
            x = svt_generalized(y, spec, tau)
            f = spectral_objective(spec, tau, x, y)
            assert f <= spectral_objective(spec, tau, y, y) + 1e-10
            assert f <= spectral_objective(spec, tau, classical_svt(y, tau), y) + 1e-10


class TestSvtRandomized:
    def test_exact_low_rank(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((60, 3)) @ rng.standard_normal((3, 40))
        s = np.linalg.svd(y, compute_uv=False)
        tau = 0.5 * s[2]
        spec = PenaltySpec("l1")
        ref = svt_generalized(y, spec, tau)
        out = svt_randomized(y, spec, tau, rank_guess=3, rng=0)
        assert np.linalg.norm(out - ref) <= 1e-6 * np.linalg.norm(ref)

    def test_large_tau_gives_zero(self):
        y = np.random.default_rng(4).standard_normal((40, 30))
        s1 = np.linalg.svd(y, compute_uv=False)[0]
        assert np.array_equal(svt_randomized(y, PenaltySpec("l1"), 1.1 * s1, rng=0), np.zeros_like(y))

    def test_decaying_spectrum(self):
        errs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            u = np.linalg.qr(rng.standard_normal((200, 150)))[0]
            v = np.linalg.qr(rng.standard_normal((150, 150)))[0]
            y = (u * (100 * 0.9 ** np.arange(150))) @ v.T
            ref = svt_generalized(y, PenaltySpec("l1"), 1.0)
            out = svt_randomized(y, PenaltySpec("l1"), 1.0, rng=seed)
            errs.append(np.linalg.norm(out - ref) / np.linalg.norm(ref))
        assert np.median(errs) <= 1e-4

    def test_rank_doubling_reported(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((80, 30)) @ rng.standard_normal((30, 60))
        _, s, k = svt_randomized(y, PenaltySpec("l1"), 1e-3, rank_guess=2, oversampling=2, rng=0,
                                 full_output=True)
        assert s.size == 30
        assert k >= 30


class TestEntrywiseAndTube:
    def test_zero(self):
        z = np.zeros((3, 3, 4))
        assert np.array_equal(prox_entrywise(z, PenaltySpec("scad"), 0.4), z)
        assert np.array_equal(prox_tube(z, PenaltySpec("l1"), 0.4), z)

    def test_l1_entrywise_is_soft(self):
        a = np.random.default_rng(6).standard_normal((4, 5))
        assert np.allclose(prox_entrywise(a, PenaltySpec("l1"), 0.3), soft_threshold(a, 0.3))

    def test_scad_entrywise_grid(self):
        spec = PenaltySpec("scad", a=3.7)
        a = np.random.default_rng(7).uniform(-5, 5, 40)
        out = prox_entrywise(a, spec, 0.8)
        grid = np.linspace(-6, 6, 240_001)
        for ai, oi in zip(a, out):
            best = grid[np.argmin(0.8 * ref_penalty(spec, grid) + 0.5 * (grid - ai) ** 2)]
            assert oi == pytest.approx(best, abs=1e-4)

    def test_single_tube(self):
        a = np.zeros((2, 2, 4))
        a[1, 0] = [2.0, 0.0, 0.0, 0.0]
        out = prox_tube(a, PenaltySpec("l1"), 0.5)
        assert np.allclose(out, 0.75 * a)

    @pytest.mark.parametrize("spec", [PenaltySpec("l1"), PenaltySpec("mcp"), PenaltySpec("lq")],
                             ids=lambda s: s.kind)
    def test_tubes_against_grid(self, spec):
        a = np.random.default_rng(8).standard_normal((3, 3, 4))
        lam = 0.6
        out = prox_tube(a, spec, lam)
        coef = np.linspace(0, 1.2, 120_001)
        for i in range(3):
            for j in range(3):
                t = a[i, j]
                nt = np.linalg.norm(t)
                # candidate z = c * t over a fine grid of scalings
                vals = lam * ref_penalty(spec, coef * nt) + 0.5 * ((coef - 1) * nt) ** 2
                best = coef[np.argmin(vals)] * t
                assert np.allclose(out[i, j], best, atol=1e-4)

    def test_tube_needs_order3(self):
        with pytest.raises(ValueError):
            prox_tube(np.zeros((3, 3)), PenaltySpec("l1"), 0.1)
