"""SINR evaluation and Monte Carlo estimation of ergodic rates.

Trial ``i`` draws everything it needs (``H``, ``G`` and the quantizer
randomness) from ``RngStream(cfg.seed, i)``, in that order. A trial's result is
therefore independent of how trials are chunked or spread over processes, and
the reduction over the per-trial array is done once in index order, so
estimates are bit-identical for any ``workers``/``chunk`` setting.

Perfect and quantized rates are evaluated on the same ``(H, G)`` draw, which
makes ``R_P - R_Q`` a paired estimate.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cmatrix import RngStream, sample_gaussian_matrix
from .precoder import PrecodingSet, SystemConfig, _perfect, _quantized, power_scalars
from .quantizer import draw_noise, resolve_mode

__all__ = [
    "RateEstimate",
    "PairedSamples",
    "NumericalFailure",
    "sinr_all",
    "sinr_general",
    "sinr_perfect_closed_form",
    "sinr_quantized_closed_form",
    "sum_rate_from_sinr",
    "sum_rate_realization",
    "relay_power",
    "simulate",
    "monte_carlo_rate",
    "rate_loss",
]

log = logging.getLogger(__name__)

DISCARD_WARN_RATIO = 0.01
MAX_REDRAWS = 100
NOISE_BUDGET_BYTES = 64 * 2**20


class NumericalFailure(RuntimeError):
    """Realizations kept failing after repeated redraws."""


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo mean (b/s/Hz) with its standard error."""

    mean: float
    std_error: float
    trials: int
    discards: int = 0
    warning: Optional[str] = None

    @classmethod
    def from_samples(cls, samples, discards=0):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n < 1:
            raise ValueError("no samples")
        mean = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        warning = None
        if discards > DISCARD_WARN_RATIO * n:
            warning = f"discarded {discards} realizations for {n} trials"
        return cls(mean, se, n, int(discards), warning)


def _herm(A):
    return np.conj(np.swapaxes(A, -1, -2))


def sinr_all(H, G, ps: PrecodingSet) -> np.ndarray:
    """Per-user SINR from the general expression, for every user at once.

    ``gamma_k = |g_k^H F H w_k|^2 / (sum_{j!=k} |g_k^H F H w_j|^2
    + ||g_k^H F||^2 / rho1 + 1/(rho1 rho2))``; rows of ``G`` are ``g_k^H``.
    """
    GF = G @ ps.F
    A = np.abs(GF @ H @ ps.W) ** 2
    sig = np.diagonal(A, axis1=-2, axis2=-1)
    interf = np.sum(A, axis=-1) - sig
    noise = np.sum(np.abs(GF) ** 2, axis=-1) / ps.rho1 + 1.0 / (ps.rho1 * ps.rho2)
    return sig / (interf + noise)


def sinr_general(k: int, H, G, ps: PrecodingSet):
    return sinr_all(H, G, ps)[..., k]


def sinr_perfect_closed_form(G, ps: PrecodingSet) -> np.ndarray:
    """``sigma_k^2 |g_k^H f_k|^2 / (|g_k^H f_k|^2/rho1 + 1/(rho1 rho2))``."""
    gf = np.abs(np.diagonal(G @ ps.F1, axis1=-2, axis2=-1)) ** 2
    return ps.sigma**2 * gf / (gf / ps.rho1 + 1.0 / (ps.rho1 * ps.rho2))


def sinr_quantized_closed_form(G, ps: PrecodingSet) -> np.ndarray:
    """SINR written through ``G F_hat Sigma V^H V_hat`` (the ``U`` factors cancel)."""
    GF = G @ ps.F1
    A = np.abs((GF * ps.sigma[..., None, :]) @ _herm(ps.V) @ ps.W) ** 2
    sig = np.diagonal(A, axis1=-2, axis2=-1)
    interf = np.sum(A, axis=-1) - sig
    noise = np.sum(np.abs(GF) ** 2, axis=-1) / ps.rho1 + 1.0 / (ps.rho1 * ps.rho2)
    return sig / (interf + noise)


def sum_rate_from_sinr(gamma):
    """``(1/2) sum_k log2(1 + gamma_k)``; the half accounts for the two transmission slots."""
    return 0.5 * np.sum(np.log2(1.0 + np.asarray(gamma, dtype=float)), axis=-1)


def sum_rate_realization(H, G, ps: PrecodingSet):
    """Instantaneous sum rate of one realization (or a stack of them)."""
    return sum_rate_from_sinr(sinr_all(H, G, ps))


def relay_power(H, ps: PrecodingSet):
    """Instantaneous relay transmit power ``rho2 (rho1 ||F H W||_F^2 + ||F||_F^2)``."""
    FHW = ps.F @ H @ ps.W
    return ps.rho2 * (
        ps.rho1 * np.sum(np.abs(FHW) ** 2, axis=(-2, -1)) + np.sum(np.abs(ps.F) ** 2, axis=(-2, -1))
    )


@dataclass
class PairedSamples:
    """Per-trial sum rates; ``rq`` is None when only perfect CSI was simulated."""

    rp: np.ndarray
    rq: Optional[np.ndarray]
    discards: int
    N: int

    def perfect(self) -> RateEstimate:
        return RateEstimate.from_samples(self.rp, self.discards)

    def quantized(self) -> RateEstimate:
        return RateEstimate.from_samples(self.rq, self.discards)

    def loss_per_user(self) -> RateEstimate:
        return RateEstimate.from_samples((self.rp - self.rq) / self.N, self.discards)


def _draw_trial(gen, cfg, modes):
    # same order as build_quantized: H, G, then V-column and user codebooks
    N, M = cfg.N, cfg.M
    HG = np.concatenate([sample_gaussian_matrix(N, M, gen), sample_gaussian_matrix(N, N, gen)], axis=1)
    if modes is None:
        return HG, None, None
    nv = draw_noise(gen, N, M, cfg.B1, modes[0])
    ng = draw_noise(gen, N, N, cfg.B2, modes[1])
    return HG, nv, ng


def _evaluate(cfg, rho, modes, HG, NV, NG):
    H = HG[..., :, : cfg.M]
    G = HG[..., :, cfg.M :]
    ps, ok = _perfect(H, G, rho)
    rp = sum_rate_realization(H, G, ps)
    rq = None
    if modes is not None:
        qs, okq = _quantized(H, G, rho, (cfg.B1, cfg.B2), modes, NV, NG)
        rq = sum_rate_realization(H, G, qs)
        ok = ok & okq
    return rp, rq, ok


def _per_trial_bytes(cfg, modes):
    if modes is None:
        return 1
    size = 1
    for bits, dim, m in ((cfg.B1, cfg.M, modes[0]), (cfg.B2, cfg.N, modes[1])):
        if m == "explicit":
            size += 16 * cfg.N * (2**bits) * dim * 3
    return size


def _run_chunk(cfg: SystemConfig, lo: int, hi: int, quantized: bool):
    rho = power_scalars(cfg)
    modes = (resolve_mode(cfg.B1, cfg.codebook), resolve_mode(cfg.B2, cfg.codebook)) if quantized else None
    gens = [RngStream(cfg.seed, i).generator() for i in range(lo, hi)]
    draws = [_draw_trial(g, cfg, modes) for g in gens]
    HG = np.stack([d[0] for d in draws])
    NV = np.stack([d[1] for d in draws]) if quantized else None
    NG = np.stack([d[2] for d in draws]) if quantized else None
    rp, rq, ok = _evaluate(cfg, rho, modes, HG, NV, NG)
    discards = 0
    for _ in range(MAX_REDRAWS):
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            return rp, rq, discards
        discards += bad.size
        log.debug("redrawing %d singular realizations in trials [%d, %d)", bad.size, lo, hi)
        redo = [_draw_trial(gens[b], cfg, modes) for b in bad]
        HG[bad] = np.stack([d[0] for d in redo])
        if quantized:
            NV[bad] = np.stack([d[1] for d in redo])
            NG[bad] = np.stack([d[2] for d in redo])
        r2p, r2q, ok2 = _evaluate(
            cfg, rho, modes, HG[bad], NV[bad] if quantized else None, NG[bad] if quantized else None
        )
        rp[bad] = r2p
        if quantized:
            rq[bad] = r2q
        ok[bad] = ok2
    raise NumericalFailure(f"realizations in trials [{lo}, {hi}) stayed singular after {MAX_REDRAWS} redraws")


def _chunks(trials, size):
    return [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]


def simulate(cfg: SystemConfig, quantized: bool = True, workers: int = 1, chunk: Optional[int] = None) -> PairedSamples:
    """Run ``cfg.trials`` paired realizations and return the per-trial sum rates."""
    modes = (resolve_mode(cfg.B1, cfg.codebook), resolve_mode(cfg.B2, cfg.codebook)) if quantized else None
    if chunk is None:
        chunk = int(max(16, min(4096, NOISE_BUDGET_BYTES // _per_trial_bytes(cfg, modes))))
    spans = _chunks(cfg.trials, chunk)
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(spans), *zip(*spans), [quantized] * len(spans)))
    else:
        parts = [_run_chunk(cfg, lo, hi, quantized) for lo, hi in spans]
    rp = np.concatenate([p[0] for p in parts])
    rq = np.concatenate([p[1] for p in parts]) if quantized else None
    discards = sum(p[2] for p in parts)
    if discards > DISCARD_WARN_RATIO * cfg.trials:
        log.warning("discarded %d of %d realizations (M=%d, N=%d)", discards, cfg.trials, cfg.M, cfg.N)
    return PairedSamples(rp, rq, discards, cfg.N)


def monte_carlo_rate(cfg: SystemConfig, mode: str = "quantized", workers: int = 1) -> RateEstimate:
    """Ergodic sum rate with ``perfect`` or ``quantized`` CSI."""
    if mode == "perfect":
        return simulate(cfg, quantized=False, workers=workers).perfect()
    if mode == "quantized":
        return simulate(cfg, quantized=True, workers=workers).quantized()
    raise ValueError(f"mode must be 'perfect' or 'quantized', got {mode!r}")


def rate_loss(cfg: SystemConfig, workers: int = 1) -> RateEstimate:
    """Per-user rate loss ``(R_P - R_Q)/N`` from paired draws."""
    return simulate(cfg, quantized=True, workers=workers).loss_per_user()
