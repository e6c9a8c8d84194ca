"""Closed-form performance bounds and feedback-bit scaling rules.

Units follow the rate code: logarithms are base 2, rates in b/s/Hz. The
interference-limited ceilings are expressed per user as ``(2/N) R``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cmatrix import RngStream, haar_from_gaussian, min_eigenvalue_hermitian, sample_gaussian_matrix
from .precoder import SystemConfig
from .quantizer import apply_quantizer, draw_noise, resolve_mode

__all__ = [
    "EULER_GAMMA",
    "LOG2E",
    "BitPlan",
    "FirstTermEstimate",
    "ApproximationWarning",
    "harmonic_number",
    "digamma_int",
    "wishart_log_moment",
    "ceiling_constant",
    "ceiling_R_U1",
    "ceiling_R_U2",
    "high_snr_bound",
    "rate_loss_bound_high_snr",
    "first_term_samples",
    "first_term_estimate",
    "rate_loss_bound_first_term",
    "scale_bits",
    "b1_limit",
    "bits_db_approx",
    "sum_feedback",
    "optimal_theta",
]

EULER_GAMMA = 0.57721566490153286060651209008240243
LOG2E = 1.0 / math.log(2.0)

# exact rational sums below this, float accumulation up to DIRECT_LIMIT
_RATIONAL_LIMIT = 64
DIRECT_LIMIT = 2**20
HARMONIC_GUARD_BITS = 30


class ApproximationWarning(UserWarning):
    pass


@lru_cache(maxsize=256)
def harmonic_number(n: int) -> float:
    """``H_n = sum_{k=1}^n 1/k`` (``H_0 = 0``).

    Direct summation up to ``2**20`` terms (rationally for small ``n``, ``fsum``
    otherwise); above that the Euler-Maclaurin tail ``ln n + gamma + 1/(2n) -
    1/(12 n^2) + 1/(120 n^4)``, whose truncation error is below ``n**-6/252``.
    """
    n = int(n)
    if n < 0:
        raise ValueError("harmonic number needs n >= 0")
    if n <= _RATIONAL_LIMIT:
        return float(sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0)))
    if n <= DIRECT_LIMIT:
        return math.fsum(1.0 / np.arange(1, n + 1, dtype=float))
    x = float(n)
    return math.log(x) + EULER_GAMMA + 1.0 / (2 * x) - 1.0 / (12 * x * x) + 1.0 / (120 * x**4)


def _harmonic_pow2(bits) -> float:
    if bits > HARMONIC_GUARD_BITS:
        warnings.warn(
            f"harmonic sum over 2**{bits} terms uses the asymptotic expansion",
            ApproximationWarning,
            stacklevel=3,
        )
        x = 2.0**bits
        return math.log(x) + EULER_GAMMA + 1.0 / (2 * x)
    return harmonic_number(2 ** int(bits))


def digamma_int(n: int) -> float:
    """``psi(n) = -gamma + H_{n-1}`` for positive integers."""
    if int(n) != n or n < 1:
        raise ValueError(f"digamma_int needs a positive integer, got {n}")
    return harmonic_number(int(n) - 1) - EULER_GAMMA


def wishart_log_moment(M: int, N: int) -> float:
    """Mean of ``log2 sigma_j^2`` over the ``N`` eigenvalues of ``H H^H``, ``H`` N x M Gaussian."""
    return LOG2E / N * sum(digamma_int(M - k) for k in range(N))


def ceiling_constant(M: int, N: int) -> float:
    """Constant shared by both interference-limited ceilings."""
    _check_mn(M, N)
    return math.log2(M / (N * (N - 1))) + LOG2E * harmonic_number(N - 2) - wishart_log_moment(M, N)


def _check_mn(M, N):
    if N < 2 or M < N:
        raise ValueError(f"need M >= N >= 2, got M={M}, N={N}")


def ceiling_R_U1(M: int, N: int, B1) -> float:
    """Per-user rate ceiling ``(2/N) R_U1`` for finite ``B1`` and ideal user feedback."""
    _check_mn(M, N)
    if B1 < 0:
        raise ValueError("B1 must be nonnegative")
    return (
        math.log2(1.0 - (M - N) / M * 2.0 ** (-B1 / (M - 1)))
        + LOG2E / (M - 1) * _harmonic_pow2(B1)
        + LOG2E * harmonic_number(M - 2)
        + LOG2E / (N - 1)
        + ceiling_constant(M, N)
    )


def ceiling_R_U2(M: int, N: int, B2) -> float:
    """Per-user rate ceiling ``(2/N) R_U2`` for finite ``B2`` and ideal relay feedback."""
    _check_mn(M, N)
    if B2 < 0:
        raise ValueError("B2 must be nonnegative")
    return (
        math.log2(1.0 + (N - 1) * 2.0 ** (-B2 / (N - 1)))
        + LOG2E / (N - 1) * _harmonic_pow2(B2)
        + ceiling_constant(M, N)
    )


def high_snr_bound(M, N, P1, P2, B1, B2) -> float:
    """SNR-dependent part of the per-user rate-loss bound.

    ``(1/2) log2(1 + rho2 (N-1) (rho1 2^{-B1/(M-1)} + (1 + rho1 M) 2^{-B2/(N-1)}))``.
    ``None`` for a bit count means ideal feedback on that hop. Bits may be real.
    """
    rho1 = P1 / N
    rho2 = P2 / (P1 * M + N)
    e1 = 0.0 if B1 is None else 2.0 ** (-B1 / (M - 1))
    e2 = 0.0 if B2 is None else 2.0 ** (-B2 / (N - 1))
    return 0.5 * math.log2(1.0 + rho2 * (N - 1) * (rho1 * e1 + (1.0 + rho1 * M) * e2))


def rate_loss_bound_high_snr(cfg: SystemConfig) -> float:
    return high_snr_bound(cfg.M, cfg.N, cfg.P1, cfg.P2, cfg.B1, cfg.B2)


@dataclass(frozen=True)
class FirstTermEstimate:
    """Monte Carlo estimate of ``E[sqrt(eps_k) / lambda_min(V^H Vh Vh^H V)]``."""

    expectation: float
    std_error: float
    trials: int
    discards: int

    @property
    def term(self) -> float:
        return 0.5 * math.log2(1.0 + self.expectation)

    @property
    def term_std_error(self) -> float:
        # delta method through (1/2) log2(1 + x)
        return 0.5 * LOG2E * self.std_error / (1.0 + self.expectation)


def _first_term_draw(gen, M, N, B1, mode):
    # Gaussian draw only; the Haar map is applied to the whole batch
    Z = sample_gaussian_matrix(M, N, gen)
    return Z, draw_noise(gen, N, M, B1, mode)


def _first_term_eval(Z, noise, B1, mode):
    V = haar_from_gaussian(Z)
    vrows = np.swapaxes(V, -1, -2)
    vhat, eps, _ = apply_quantizer(vrows, noise, B1, mode)
    X = np.conj(vrows) @ np.swapaxes(vhat, -1, -2)  # V^H V_hat
    Q = X @ np.conj(np.swapaxes(X, -1, -2))
    Q = 0.5 * (Q + np.conj(np.swapaxes(Q, -1, -2)))
    lam = np.atleast_1d(min_eigenvalue_hermitian(Q))
    ok = lam >= 1e-12
    x = np.mean(np.sqrt(eps), axis=-1) / np.where(ok, lam, 1.0)
    return x, ok


def first_term_samples(M, N, B1, trials, seed, codebook="auto"):
    """Per-trial ``mean_k sqrt(eps_k) / lambda_min(Q)`` over Haar ``V`` and RVQ.

    Returns ``(samples, discards)``. Realizations with ``lambda_min < 1e-12`` are
    redrawn from the same trial stream.
    """
    _check_mn(M, N)
    mode = resolve_mode(B1, codebook)
    gens = [RngStream(seed, i).generator() for i in range(trials)]
    draws = [_first_term_draw(g, M, N, B1, mode) for g in gens]
    V = np.stack([d[0] for d in draws])
    noise = np.stack([d[1] for d in draws])
    x, ok = _first_term_eval(V, noise, B1, mode)
    discards = 0
    for _ in range(100):
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            return x, discards
        discards += bad.size
        redo = [_first_term_draw(gens[b], M, N, B1, mode) for b in bad]
        V[bad] = np.stack([d[0] for d in redo])
        noise[bad] = np.stack([d[1] for d in redo])
        x[bad], ok[bad] = _first_term_eval(V[bad], noise[bad], B1, mode)
    raise RuntimeError("quantized V stayed rank deficient after 100 redraws")


def first_term_estimate(M, N, B1, trials=20000, seed=0, codebook="auto") -> FirstTermEstimate:
    x, discards = first_term_samples(M, N, B1, trials, seed, codebook)
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return FirstTermEstimate(float(np.mean(x)), se, x.size, discards)


def rate_loss_bound_first_term(M, N, B1, trials=20000, seed=0, codebook="auto") -> float:
    """``(1/2) log2(1 + E[sqrt(eps_k)/lambda_min(Q)])``, the B1-only part of the loss bound."""
    return first_term_estimate(M, N, B1, trials, seed, codebook).term


@dataclass(frozen=True)
class BitPlan:
    """Feedback bits that hold the high-SNR loss bound at ``(1/2) log2 b`` per user."""

    B1_exact: float
    B2_exact: float
    B1: int
    B2: int
    theta: float
    b: float
    alpha: float
    clamped: bool = False


def _check_plan_args(b, theta):
    if not b > 1:
        raise ValueError(f"b must exceed 1, got {b}")
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")


def scale_bits(M, N, P1, P2, b=2.0, theta=0.5) -> BitPlan:
    """Bits per V column (``B1``) and per user (``B2``) for target loss ``(1/2) log2 b``.

    ``theta`` splits the loss budget between the two hops; integer fields are
    rounded up and clamped at zero.
    """
    _check_mn(M, N)
    _check_plan_args(b, theta)
    B1x = (M - 1) * (math.log2(P2) - math.log2(M + N / P1) + math.log2((N - 1) / (theta * (b - 1) * N)))
    alpha = math.log2((N - 1) / ((1 - theta) * (b - 1) * N))
    B2x = (N - 1) * (math.log2(P2) + alpha)
    B1 = max(0, math.ceil(B1x))
    B2 = max(0, math.ceil(B2x))
    return BitPlan(B1x, B2x, B1, B2, theta, b, alpha, clamped=(B1x < 0 or B2x < 0))


def b1_limit(M, N, P2, b=2.0) -> float:
    """``B1`` from ``scale_bits`` (theta = 0.5) in the limit of infinite BS power."""
    _check_plan_args(b, 0.5)
    return (M - 1) * math.log2(P2) + (M - 1) * math.log2(2 * (N - 1) / ((b - 1) * M * N))


def bits_db_approx(M, N, P1, P2_dB, b=2.0):
    """Linear-in-dB approximations of the theta = 0.5 bit plan.

    Replaces ``log2 P2`` by ``P2_dB / 3``; returns ``(B1_approx, B2_approx)``.
    """
    _check_mn(M, N)
    _check_plan_args(b, 0.5)
    alpha = math.log2(2 * (N - 1) / (N * (b - 1)))
    offset = (M - 1) * (math.log2(M + N / P1) - alpha)
    return (M - 1) / 3 * P2_dB - offset, (N - 1) / 3 * P2_dB + (N - 1) * alpha


def sum_feedback(M, N, P1, P2, b=2.0, theta=0.5) -> float:
    """Total feedback ``N (B1 + B2)`` over both hops with unrounded bits."""
    plan = scale_bits(M, N, P1, P2, b, theta)
    return N * (plan.B1_exact + plan.B2_exact)


def optimal_theta(M, N) -> float:
    """Split minimizing the total feedback: ``(M-1)/(M+N-2)``."""
    if M < 2 or N < 2:
        raise ValueError("need M, N >= 2")
    return (M - 1) / (M + N - 2)
