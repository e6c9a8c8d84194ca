"""Small dense complex linear algebra and seeded random matrix sampling.

Matrices are plain ``numpy`` complex arrays. Every routine accepts either a
single matrix or a stack of matrices with leading batch dimensions, so the
Monte Carlo engine can push thousands of realizations through one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "RngStream",
    "ThinSVD",
    "LinAlgContractError",
    "SingularChannelError",
    "SvdConvergenceError",
    "as_generator",
    "sample_gaussian_matrix",
    "haar_semi_unitary",
    "haar_from_gaussian",
    "thin_svd",
    "check_thin_svd",
    "zf_pseudo_inverse",
    "zf_pseudo_inverse_masked",
    "min_eigenvalue_hermitian",
]

# condition number of G G^H above which a channel is treated as singular
COND_LIMIT = 1e12
ZF_RESIDUAL_TOL = 1e-8
HERMITIAN_TOL = 1e-10


class LinAlgContractError(ValueError):
    """Input violates a documented precondition (shape, Hermitian, ...)."""


class SingularChannelError(ArithmeticError):
    """Channel matrix is numerically singular; the realization must be discarded.

    ``mask`` marks the offending entries when a batch was passed.
    """

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


class SvdConvergenceError(ArithmeticError):
    """LAPACK failed to converge on an SVD."""


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream_id)``.

    The stream is PCG64 keyed through ``SeedSequence(seed, spawn_key=(stream_id,))``,
    so two streams with the same pair produce identical sequences on any platform
    and distinct ``stream_id`` values are statistically independent.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")
        if self.seed >= 2**64 or self.stream_id >= 2**64:
            raise ValueError("seed and stream_id must fit in 64 bits")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def sample_gaussian_matrix(rows: int, cols: int, rng: RngLike) -> np.ndarray:
    """Draw a ``rows x cols`` matrix of i.i.d. CN(0, 1) entries.

    Real and imaginary parts each have variance 1/2. Passing an ``RngStream``
    starts from the beginning of that stream; pass a ``Generator`` to keep
    drawing from the same sequence.
    """
    if rows < 1 or cols < 1:
        raise LinAlgContractError("rows and cols must be >= 1")
    gen = as_generator(rng)
    x = gen.standard_normal((2, rows, cols))
    return (x[0] + 1j * x[1]) * np.sqrt(0.5)


def haar_semi_unitary(rows: int, cols: int, rng: RngLike) -> np.ndarray:
    """``rows x cols`` matrix with orthonormal columns, Haar distributed.

    QR of a complex Gaussian matrix with the phases of ``diag(R)`` folded back
    into ``Q`` (Mezzadri's correction), which makes the result exactly Haar.
    """
    if cols > rows:
        raise LinAlgContractError("need cols <= rows for orthonormal columns")
    return haar_from_gaussian(sample_gaussian_matrix(rows, cols, rng))


def haar_from_gaussian(Z: np.ndarray) -> np.ndarray:
    """Map complex Gaussian matrices (any batch shape) to Haar column-unitary ones."""
    q, r = np.linalg.qr(Z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


class ThinSVD(NamedTuple):
    """``A = U @ diag(sigma) @ V^H`` with ``U`` square and ``V`` column-unitary."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def _require_finite(A, name="A"):
    if not np.all(np.isfinite(A)):
        raise LinAlgContractError(f"{name} has non-finite entries")


def thin_svd(A: np.ndarray) -> ThinSVD:
    """Thin SVD of a wide matrix (or stack of them).

    For ``A`` of shape ``(..., N, M)`` with ``N <= M`` returns ``U`` of shape
    ``(..., N, N)``, descending ``sigma`` of shape ``(..., N)`` and ``V`` of shape
    ``(..., M, N)``. The null-space block of the right singular vectors is not
    formed. Column phases follow LAPACK and carry no meaning.
    """
    A = np.asarray(A)
    if A.ndim < 2:
        raise LinAlgContractError("thin_svd needs a matrix")
    n, m = A.shape[-2:]
    if n > m:
        raise LinAlgContractError(f"thin_svd expects rows <= cols, got {n}x{m}")
    _require_finite(A)
    try:
        u, s, vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    return ThinSVD(u, s, np.conj(np.swapaxes(vh, -1, -2)))


def check_thin_svd(A, svd: ThinSVD, unitary_tol=1e-10, recon_tol=1e-9) -> None:
    """Assert the ThinSVD invariants; raises ``AssertionError`` on violation."""
    U, s, V = svd
    n = U.shape[-1]
    eye = np.eye(n)
    uu = np.conj(np.swapaxes(U, -1, -2)) @ U
    vv = np.conj(np.swapaxes(V, -1, -2)) @ V
    assert np.max(np.abs(uu - eye)) <= unitary_tol, "U is not unitary"
    assert np.max(np.abs(vv - eye)) <= unitary_tol, "V is not column-unitary"
    assert np.all(s >= 0), "negative singular value"
    assert np.all(np.diff(s, axis=-1) <= 0), "singular values not descending"
    recon = (U * s[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    err = np.linalg.norm(recon - A, axis=(-2, -1))
    scale = np.linalg.norm(A, axis=(-2, -1))
    assert np.all(err <= recon_tol * np.maximum(scale, np.finfo(float).tiny)), "reconstruction error"


def zf_pseudo_inverse_masked(G: np.ndarray):
    """Batch zero-forcing inverse with a validity mask instead of an exception.

    Returns ``(P, ok)`` where ``P = G^H (G G^H)^{-1}`` (equal to ``G^{-1}`` for
    square ``G``) and ``ok`` is False wherever ``cond(G G^H) > 1e12`` or the
    residual ``max|G P - I|`` exceeds 1e-8. Entries of ``P`` where ``ok`` is
    False are set to zero.
    """
    G = np.asarray(G, dtype=complex)
    n = G.shape[-1]
    if G.shape[-2] != n:
        raise LinAlgContractError("zero-forcing inverse expects a square channel")
    _require_finite(G, "G")
    s = np.linalg.svd(G, compute_uv=False)
    smin = s[..., -1]
    with np.errstate(divide="ignore"):
        cond_gg = np.where(smin > 0, (s[..., 0] / np.where(smin > 0, smin, 1.0)) ** 2, np.inf)
    ok = cond_gg <= COND_LIMIT
    eye = np.eye(n, dtype=complex)
    safe = np.where(ok[..., None, None], G, eye)
    P = np.linalg.solve(safe, np.broadcast_to(eye, safe.shape))
    resid = np.max(np.abs(G @ P - eye), axis=(-2, -1))
    ok &= resid <= ZF_RESIDUAL_TOL
    P = np.where(ok[..., None, None], P, 0.0)
    return P, ok


def zf_pseudo_inverse(G: np.ndarray) -> np.ndarray:
    """Un-normalized zero-forcing precoder ``G^H (G G^H)^{-1}``.

    Raises ``SingularChannelError`` when any matrix in the batch is numerically
    singular; the caller is expected to discard that realization.
    """
    P, ok = zf_pseudo_inverse_masked(G)
    if not np.all(ok):
        raise SingularChannelError("channel G G^H is numerically singular", mask=~ok)
    return P


def min_eigenvalue_hermitian(Q: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a Hermitian matrix (or of each in a stack)."""
    Q = np.asarray(Q)
    if Q.shape[-1] != Q.shape[-2]:
        raise LinAlgContractError("matrix must be square")
    _require_finite(Q, "Q")
    skew = np.max(np.abs(Q - np.conj(np.swapaxes(Q, -1, -2))), axis=(-2, -1))
    scale = np.maximum(1.0, np.max(np.abs(Q), axis=(-2, -1)))
    if np.any(skew > HERMITIAN_TOL * scale):
        raise LinAlgContractError("matrix is not Hermitian within tolerance")
    w = np.linalg.eigvalsh(Q)
    out = w[..., 0]
    return float(out) if np.ndim(out) == 0 else out
