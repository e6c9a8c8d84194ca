"""Random vector quantization (RVQ) of unit-norm channel directions.

Two interchangeable back ends are provided:

``explicit``
    Materialize ``2**bits`` i.i.d. isotropic codewords and pick the one with the
    largest ``|v^H c|^2``. Memory grows as ``2**bits * dim`` per quantized
    vector, so it is capped at 20 bits.

``sampled``
    Draw the outcome of the explicit procedure directly from its law. For an
    isotropic codebook independent of ``v`` each codeword has chordal error
    ``1 - |v^H c|^2 ~ Beta(dim - 1, 1)``, so the selected error is the minimum
    of ``2**bits`` such draws and has survival function ``(1 - x**(dim-1))**n``.
    Conditioned on that error, the selected codeword is
    ``exp(j phi) (sqrt(1 - eps) v + sqrt(eps) s)`` with ``phi`` uniform and
    ``s`` isotropic in the orthogonal complement of ``v``, all independent.
    This is exact in distribution and costs O(dim) for any number of bits.

``auto`` uses ``explicit`` up to ``EXPLICIT_MAX_BITS`` bits and ``sampled`` above.
A ``bits`` value of ``None`` means ideal feedback: the vector is passed through
unchanged with zero error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cmatrix import LinAlgContractError, RngLike, as_generator

__all__ = [
    "Codebook",
    "QuantizationResult",
    "CodebookConfigError",
    "MAX_CODEBOOK_BITS",
    "EXPLICIT_MAX_BITS",
    "generate_codebook",
    "quantize",
    "expected_error_approx",
    "expected_error_exact",
    "resolve_mode",
    "draw_noise",
    "apply_quantizer",
    "rvq_quantize",
]

MAX_CODEBOOK_BITS = 20
EXPLICIT_MAX_BITS = 8
CODEBOOK_MODES = ("auto", "explicit", "sampled")
_LGAMMA_MAX_N = 2.0**10


class CodebookConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Codebook:
    dim: int
    bits: int
    codewords: np.ndarray  # (2**bits, dim), unit-norm rows

    def __len__(self):
        return self.codewords.shape[0]


@dataclass(frozen=True)
class QuantizationResult:
    index: int
    codeword: np.ndarray
    error: float


def generate_codebook(dim: int, bits: int, rng: RngLike) -> Codebook:
    """RVQ codebook of ``2**bits`` normalized complex Gaussian vectors."""
    if dim < 2:
        raise CodebookConfigError("codebook dimension must be >= 2")
    if bits < 0 or bits > MAX_CODEBOOK_BITS:
        raise CodebookConfigError(f"bits must lie in [0, {MAX_CODEBOOK_BITS}], got {bits}")
    gen = as_generator(rng)
    x = gen.standard_normal((2, 2**bits, dim))
    c = x[0] + 1j * x[1]
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return Codebook(dim, bits, c)


def quantize(v: np.ndarray, cb: Codebook) -> QuantizationResult:
    """Nearest codeword in chordal distance; ties go to the lowest index."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape[0] != cb.dim:
        raise LinAlgContractError(f"vector has length {v.shape[0]}, codebook dim is {cb.dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise LinAlgContractError("quantize expects a unit-norm vector")
    gains = np.abs(cb.codewords.conj() @ v) ** 2
    idx = int(np.argmax(gains))
    return QuantizationResult(idx, cb.codewords[idx].copy(), float(1.0 - gains[idx]))


def expected_error_approx(dim: int, bits: float) -> float:
    """Closed-form approximation ``(dim-1)/dim * 2**(-bits/(dim-1))`` of the mean RVQ error."""
    if dim < 2:
        raise CodebookConfigError("dim must be >= 2")
    return (dim - 1) / dim * 2.0 ** (-bits / (dim - 1))


def expected_error_exact(dim: int, bits: float) -> float:
    """Exact mean RVQ error ``n * Beta(n, dim/(dim-1))`` with ``n = 2**bits``."""
    if dim < 2:
        raise CodebookConfigError("dim must be >= 2")
    n = 2.0**bits
    a = dim / (dim - 1)
    if n <= _LGAMMA_MAX_N:
        log_ratio = math.lgamma(n + 1) - math.lgamma(n + a)
    else:
        # lgamma differences cancel for large n; expand the log-gamma ratio
        # in Bernoulli polynomials instead (error O(n^-4))
        b3 = a**3 - 1.5 * a**2 + 0.5 * a
        b4 = a**4 - 2 * a**3 + a**2 - 1.0 / 30
        log_ratio = (
            (1 - a) * math.log(n)
            + a * (1 - a) / (2 * n)
            + b3 / (6 * n**2)
            + (-1.0 / 30 - b4) / (12 * n**3)
        )
    return math.exp(log_ratio + math.lgamma(a))


def resolve_mode(bits: Optional[int], mode: str = "auto") -> str:
    if mode not in CODEBOOK_MODES:
        raise CodebookConfigError(f"unknown codebook mode {mode!r}")
    if bits is None:
        return "exact"
    if bits < 0:
        raise CodebookConfigError("bits must be nonnegative")
    if mode == "auto":
        return "explicit" if bits <= EXPLICIT_MAX_BITS else "sampled"
    if mode == "explicit" and bits > MAX_CODEBOOK_BITS:
        raise CodebookConfigError(f"explicit codebooks are limited to {MAX_CODEBOOK_BITS} bits")
    return mode


def draw_noise(gen: np.random.Generator, count: int, dim: int, bits, mode: str):
    """Randomness needed to quantize ``count`` vectors of length ``dim``.

    ``mode`` must already be resolved. The draw does not depend on the vectors
    being quantized, which lets a caller draw per trial and quantize in batch.
    """
    if mode == "exact":
        return np.empty((count, 0))
    if mode == "explicit":
        x = gen.standard_normal((2, count, 2**bits, dim))
        c = x[0] + 1j * x[1]
        return c / np.linalg.norm(c, axis=-1, keepdims=True)
    if mode == "sampled":
        u = gen.random((count, 2))
        z = gen.standard_normal((count, 2 * dim))
        return np.concatenate([u, z], axis=1)
    raise CodebookConfigError(f"unresolved mode {mode!r}")


def sampled_error(u, dim: int, bits) -> np.ndarray:
    """Inverse-CDF draw of the minimum of ``2**bits`` Beta(dim-1, 1) errors."""
    # 1 - (1-u)**(1/n) computed without forming n, so bits may be large
    return (-np.expm1(np.log1p(-u) * 2.0 ** (-float(bits)))) ** (1.0 / (dim - 1))


def apply_quantizer(vectors: np.ndarray, noise: np.ndarray, bits, mode: str):
    """Quantize unit vectors stored as rows of ``vectors`` (shape ``(..., count, dim)``).

    Returns ``(vhat, error, index)``; ``index`` is -1 where no codebook index
    exists (``exact`` and ``sampled`` modes).
    """
    vectors = np.asarray(vectors, dtype=complex)
    batch = vectors.shape[:-1]
    dim = vectors.shape[-1]
    if mode == "exact":
        return vectors.copy(), np.zeros(batch), np.full(batch, -1)
    if mode == "explicit":
        gains = np.abs((noise.conj() @ vectors[..., None])[..., 0]) ** 2
        idx = np.argmax(gains, axis=-1)
        best = np.take_along_axis(gains, idx[..., None], axis=-1)[..., 0]
        vhat = np.take_along_axis(noise, idx[..., None, None], axis=-2)[..., 0, :]
        return vhat, np.maximum(1.0 - best, 0.0), idx
    if mode == "sampled":
        u = noise[..., 0]
        phase = np.exp(2j * np.pi * noise[..., 1])
        z = noise[..., 2 : 2 + dim] + 1j * noise[..., 2 + dim : 2 + 2 * dim]
        eps = sampled_error(u, dim, bits)
        coef = np.sum(vectors.conj() * z, axis=-1, keepdims=True)
        s = z - vectors * coef
        s /= np.linalg.norm(s, axis=-1, keepdims=True)
        vhat = phase[..., None] * (np.sqrt(1.0 - eps)[..., None] * vectors + np.sqrt(eps)[..., None] * s)
        return vhat, eps, np.full(batch, -1)
    raise CodebookConfigError(f"unresolved mode {mode!r}")


def rvq_quantize(vectors: np.ndarray, bits, rng: RngLike, mode: str = "auto"):
    """Quantize each row of ``vectors`` (shape ``(count, dim)``) with its own fresh codebook."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    m = resolve_mode(bits, mode)
    noise = draw_noise(as_generator(rng), vectors.shape[0], vectors.shape[1], bits, m)
    return apply_quantizer(vectors, noise, bits, m)
