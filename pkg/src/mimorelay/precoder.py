"""Structured source/relay precoding for the two-hop relay broadcast downlink.

The source sends along the right singular vectors of the BS-to-relay channel
``H`` and the relay applies ``F = F1 U^H``: ``U^H`` undoes the left singular
vectors of ``H`` and ``F1`` zero-forces the relay-to-user channel ``G``. With
quantized feedback ``V`` and the user directions are replaced by their RVQ
quantizations before the same construction runs.

All builders accept single realizations (``H`` of shape ``(N, M)``) or stacks
``(T, N, M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import cmatrix
from .cmatrix import RngLike, SingularChannelError, as_generator, thin_svd
from .quantizer import Codebook, apply_quantizer, draw_noise, resolve_mode

__all__ = [
    "SystemConfig",
    "PrecodingSet",
    "power_scalars",
    "build_perfect",
    "build_quantized",
    "channel_directions",
]


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """One simulation scenario.

    ``P1`` and ``P2`` are linear powers (equal to SNR, noise is unit variance).
    ``B1`` is the bit budget for each column of ``V``; ``B2`` the bits each user
    spends on its channel direction. ``None`` for either means ideal feedback
    on that hop. ``codebook`` selects the RVQ back end (see ``quantizer``).
    """

    M: int
    N: int
    P1: float
    P2: float
    B1: Optional[int] = 0
    B2: Optional[int] = 0
    trials: int = 20000
    seed: int = 0
    codebook: str = "auto"

    def __post_init__(self):
        if not self.N >= 2:
            raise ValueError(f"need N >= 2, got N={self.N}")
        if not self.M >= self.N:
            raise ValueError(f"need M >= N, got M={self.M}, N={self.N}")
        if not (self.P1 > 0 and self.P2 > 0):
            raise ValueError("P1 and P2 must be positive")
        for name in ("B1", "B2"):
            b = getattr(self, name)
            if b is not None and b < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        resolve_mode(0, self.codebook)

    @classmethod
    def from_db(cls, M, N, P1_dB, P2_dB, **kw):
        return cls(M, N, _db_to_linear(P1_dB), _db_to_linear(P2_dB), **kw)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass
class PrecodingSet:
    """Precoders and scalars for one realization (or a stack of them)."""

    W: np.ndarray
    F: np.ndarray
    F1: np.ndarray
    rho1: float
    rho2: float
    mode: str
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    G_used: np.ndarray  # channel (directions) the zero-forcing step inverted
    eps: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None
    v_index: Optional[np.ndarray] = None
    g_index: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


def power_scalars(cfg: SystemConfig):
    """``(rho1, rho2) = (P1/N, P2/(P1 M + N))``; depends on the config only."""
    return cfg.P1 / cfg.N, cfg.P2 / (cfg.P1 * cfg.M + cfg.N)


def _herm(A):
    return np.conj(np.swapaxes(A, -1, -2))


def channel_directions(G):
    """Row-normalize ``G`` (rows are ``g_k^H``); ZF precoders only see directions."""
    return G / np.linalg.norm(G, axis=-1, keepdims=True)


def _zf_normalized(Gdir):
    P, ok = cmatrix.zf_pseudo_inverse_masked(Gdir)
    norms = np.linalg.norm(P, axis=-2, keepdims=True)
    F1 = np.where(ok[..., None, None], P / np.where(norms > 0, norms, 1.0), 0.0)
    return F1, ok


def _perfect(H, G, rho):
    svd = thin_svd(H)
    Gdir = channel_directions(G)
    F1, ok = _zf_normalized(Gdir)
    ps = PrecodingSet(
        W=svd.V, F=F1 @ _herm(svd.U), F1=F1, rho1=rho[0], rho2=rho[1], mode="perfect",
        U=svd.U, sigma=svd.sigma, V=svd.V, G_used=Gdir,
    )
    return ps, ok


def _quantized(H, G, rho, bits, modes, noise_v, noise_g):
    """Quantized-feedback precoders from pre-drawn quantizer randomness."""
    svd = thin_svd(H)
    # columns of V as rows
    vrows = np.swapaxes(svd.V, -1, -2)
    vhat, eps, vidx = apply_quantizer(vrows, noise_v, bits[0], modes[0])
    Vhat = np.swapaxes(vhat, -1, -2)
    Gdir = channel_directions(G)
    gtil = np.conj(Gdir)
    ghat, tau, gidx = apply_quantizer(gtil, noise_g, bits[1], modes[1])
    Ghat = np.conj(ghat)
    F1, ok = _zf_normalized(Ghat)
    ps = PrecodingSet(
        W=Vhat, F=F1 @ _herm(svd.U), F1=F1, rho1=rho[0], rho2=rho[1], mode="quantized",
        U=svd.U, sigma=svd.sigma, V=svd.V, G_used=Ghat,
        eps=eps, tau=tau, v_index=vidx, g_index=gidx,
    )
    return ps, ok


def _check_shapes(H, G, cfg):
    if H.shape[-2:] != (cfg.N, cfg.M):
        raise cmatrix.LinAlgContractError(f"H must be {cfg.N}x{cfg.M}, got {H.shape[-2:]}")
    if G.shape[-2:] != (cfg.N, cfg.N):
        raise cmatrix.LinAlgContractError(f"G must be {cfg.N}x{cfg.N}, got {G.shape[-2:]}")


def build_perfect(H, G, cfg: SystemConfig) -> PrecodingSet:
    """Precoders with perfect CSI: ``W = V`` and ``F = F1 U^H``."""
    H = np.asarray(H, dtype=complex)
    G = np.asarray(G, dtype=complex)
    _check_shapes(H, G, cfg)
    ps, ok = _perfect(H, G, power_scalars(cfg))
    if not np.all(ok):
        raise SingularChannelError("relay-to-user channel is singular", mask=~ok)
    return ps


def _codebook_noise(codebooks: Sequence[Codebook], count, dim):
    if len(codebooks) != count:
        raise cmatrix.LinAlgContractError(f"need {count} codebooks, got {len(codebooks)}")
    sizes = {len(cb) for cb in codebooks}
    if len(sizes) != 1 or any(cb.dim != dim for cb in codebooks):
        raise cmatrix.LinAlgContractError("injected codebooks must share size and dimension")
    return np.stack([cb.codewords for cb in codebooks])


def build_quantized(
    H,
    G,
    cfg: SystemConfig,
    rng: RngLike,
    v_codebooks: Optional[Sequence[Codebook]] = None,
    g_codebooks: Optional[Sequence[Codebook]] = None,
) -> PrecodingSet:
    """Precoders from RVQ feedback: ``W = V_hat`` and ``F = F_hat U^H``.

    Each of the ``N`` columns of ``V`` is quantized with ``cfg.B1`` bits and each
    user direction with ``cfg.B2`` bits, every vector against its own fresh
    codebook drawn from ``rng``. ``v_codebooks``/``g_codebooks`` inject fixed
    codebooks (one per vector) instead, which is how tests plant the true
    vectors to get zero quantization error. Only single realizations are
    accepted here; the Monte Carlo engine drives the batched path itself.
    """
    H = np.asarray(H, dtype=complex)
    G = np.asarray(G, dtype=complex)
    _check_shapes(H, G, cfg)
    if H.ndim != 2:
        raise cmatrix.LinAlgContractError("build_quantized takes one realization")
    gen = as_generator(rng)
    M, N = cfg.M, cfg.N
    if v_codebooks is not None:
        mv, nv, b1 = "explicit", _codebook_noise(v_codebooks, N, M), v_codebooks[0].bits
    else:
        b1 = cfg.B1
        mv = resolve_mode(b1, cfg.codebook)
        nv = draw_noise(gen, N, M, b1, mv)
    if g_codebooks is not None:
        mg, ng, b2 = "explicit", _codebook_noise(g_codebooks, N, N), g_codebooks[0].bits
    else:
        b2 = cfg.B2
        mg = resolve_mode(b2, cfg.codebook)
        ng = draw_noise(gen, N, N, b2, mg)
    ps, ok = _quantized(H, G, power_scalars(cfg), (b1, b2), (mv, mg), nv, ng)
    if not np.all(ok):
        raise SingularChannelError("quantized relay-to-user channel is singular", mask=~ok)
    return ps
