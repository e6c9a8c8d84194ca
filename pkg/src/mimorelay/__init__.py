"""Limited-feedback precoding for a two-hop MIMO amplify-and-forward relay broadcast channel.

Modules
-------
cmatrix
    Seeded complex Gaussian sampling and small dense linear algebra.
quantizer
    Random vector quantization (RVQ) of unit-norm channel directions.
precoder
    Source and relay precoders under perfect or quantized CSI.
ratesim
    SINR evaluation and paired Monte Carlo rate estimation.
bounds
    Closed-form rate-loss bounds, interference-limited ceilings and bit scaling.
expcli
    Scenario configs, sweep runner, figure regeneration and the ``mimorelay`` CLI.
"""

from .bounds import (
    BitPlan,
    ceiling_R_U1,
    ceiling_R_U2,
    digamma_int,
    first_term_estimate,
    optimal_theta,
    rate_loss_bound_first_term,
    rate_loss_bound_high_snr,
    scale_bits,
    sum_feedback,
)
from .cmatrix import RngStream, sample_gaussian_matrix, thin_svd, zf_pseudo_inverse
from .precoder import PrecodingSet, SystemConfig, build_perfect, build_quantized, power_scalars
from .quantizer import Codebook, generate_codebook, quantize
from .ratesim import RateEstimate, monte_carlo_rate, rate_loss, simulate, sum_rate_realization

__version__ = "0.1.0"

__all__ = [
    "BitPlan",
    "Codebook",
    "PrecodingSet",
    "RateEstimate",
    "RngStream",
    "SystemConfig",
    "build_perfect",
    "build_quantized",
    "ceiling_R_U1",
    "ceiling_R_U2",
    "digamma_int",
    "first_term_estimate",
    "generate_codebook",
    "monte_carlo_rate",
    "optimal_theta",
    "power_scalars",
    "quantize",
    "rate_loss",
    "rate_loss_bound_first_term",
    "rate_loss_bound_high_snr",
    "sample_gaussian_matrix",
    "scale_bits",
    "simulate",
    "sum_feedback",
    "sum_rate_realization",
    "thin_svd",
    "zf_pseudo_inverse",
]
