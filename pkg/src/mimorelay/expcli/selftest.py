"""Quick invariant checks runnable without pytest (``mimorelay selftest``)."""

from __future__ import annotations

import math

import numpy as np

from .. import bounds
from ..cmatrix import RngStream, check_thin_svd, sample_gaussian_matrix, thin_svd, zf_pseudo_inverse
from ..precoder import SystemConfig, build_perfect, build_quantized
from ..quantizer import Codebook
from ..ratesim import simulate, sinr_all, sinr_perfect_closed_form, sinr_quantized_closed_form

__all__ = ["run_selftest", "CHECKS"]


def _rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))


def check_svd():
    for i in range(200):
        A = sample_gaussian_matrix(2, 4, RngStream(1, i))
        check_thin_svd(A, thin_svd(A))


def check_zf():
    for i in range(200):
        G = sample_gaussian_matrix(4, 4, RngStream(2, i))
        P = zf_pseudo_inverse(G)
        assert np.max(np.abs(G @ P - np.eye(4))) <= 1e-8


def check_sinr_forms():
    cfg = SystemConfig.from_db(4, 2, 20, 20, B1=6, B2=4)
    for i in range(100):
        gen = RngStream(3, i).generator()
        H, G = sample_gaussian_matrix(2, 4, gen), sample_gaussian_matrix(2, 2, gen)
        ps = build_perfect(H, G, cfg)
        assert _rel(sinr_all(H, G, ps), sinr_perfect_closed_form(G, ps)) <= 1e-9
        qs = build_quantized(H, G, cfg, gen)
        assert _rel(sinr_all(H, G, qs), sinr_quantized_closed_form(G, qs)) <= 1e-9


def check_zero_error_hook():
    cfg = SystemConfig.from_db(4, 2, 25, 25, B1=3, B2=3)
    for i in range(50):
        gen = RngStream(4, i).generator()
        H, G = sample_gaussian_matrix(2, 4, gen), sample_gaussian_matrix(2, 2, gen)
        ps = build_perfect(H, G, cfg)
        gdir = np.conj(ps.G_used)
        vcb = [_planted(ps.V[:, k], 3, gen) for k in range(2)]
        gcb = [_planted(gdir[k], 3, gen) for k in range(2)]
        qs = build_quantized(H, G, cfg, gen, v_codebooks=vcb, g_codebooks=gcb)
        rp = 0.5 * np.sum(np.log2(1 + sinr_all(H, G, ps)))
        rq = 0.5 * np.sum(np.log2(1 + sinr_all(H, G, qs)))
        assert rp - rq == 0.0 or abs(rp - rq) <= 1e-12 * abs(rp)


def _planted(v, bits, gen):
    x = gen.standard_normal((2, 2**bits, v.size))
    c = x[0] + 1j * x[1]
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c[gen.integers(2**bits)] = v
    return Codebook(v.size, bits, c)


def check_determinism():
    cfg = SystemConfig.from_db(4, 2, 15, 15, B1=5, B2=3, trials=300, seed=9)
    a = simulate(cfg, workers=1, chunk=300)
    b = simulate(cfg, workers=2, chunk=64)
    assert np.array_equal(a.rp, b.rp) and np.array_equal(a.rq, b.rq)


def check_bit_plan_closure():
    rng = np.random.default_rng(5)
    for _ in range(100):
        N = int(rng.integers(2, 6))
        M = int(rng.integers(N, 8))
        P1, P2 = 10 ** rng.uniform(1, 4, size=2)
        b, theta = rng.uniform(1.2, 8), rng.uniform(0.05, 0.95)
        plan = bounds.scale_bits(M, N, P1, P2, b, theta)
        val = bounds.high_snr_bound(M, N, P1, P2, plan.B1_exact, plan.B2_exact)
        assert abs(val - 0.5 * math.log2(b)) <= 1e-9


def check_theta():
    for M in range(2, 7):
        for N in range(2, M + 1):
            grid = np.linspace(0, 1, 10001)[1:-1]
            obj = (M - 1) * np.log(grid) + (N - 1) * np.log1p(-grid)
            assert abs(grid[np.argmax(obj)] - bounds.optimal_theta(M, N)) <= 1e-4


CHECKS = {
    "thin SVD invariants": check_svd,
    "zero-forcing residual": check_zf,
    "general vs closed-form SINR": check_sinr_forms,
    "zero-error codebooks give zero loss": check_zero_error_hook,
    "bit-identical under parallelism": check_determinism,
    "bit plan closes the loss bound": check_bit_plan_closure,
    "optimal theta vs grid search": check_theta,
}


def run_selftest(out=print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        try:
            fn()
            out(f"PASS  {name}")
        except AssertionError as exc:
            ok = False
            out(f"FAIL  {name}: {exc or 'assertion failed'}")
    return ok
