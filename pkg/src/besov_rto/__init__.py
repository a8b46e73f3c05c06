"""Posterior sampling for linear inverse problems with Besov priors."""

__version__ = "0.1.0"

from .diagnostics import ChainStats, acf, ess, summarize
from .forward import (
    DenseOperator,
    LinearForward,
    convolution_operator,
    inpainting_operator,
    make_data,
    phantom_1d,
    phantom_shepp_logan,
    radon_operator,
)
from .gengauss import GenGaussParams, g1d, g1d_deriv, gg_cdf, gg_log_pdf, gg_quantile
from .prior import BesovPrior, Posterior
from .rto import (
    ChainResult,
    RtoConfig,
    RtoState,
    compute_Q,
    residual_F,
    jacobian_JA,
    rto_propose,
    run_chain,
    solve_map,
)
from .wavelets import BesovWeights, WaveletSystem, apply_B, apply_B_inverse, besov_weights

__all__ = [
    "__version__",
    "BesovPrior",
    "BesovWeights",
    "ChainResult",
    "ChainStats",
    "DenseOperator",
    "GenGaussParams",
    "LinearForward",
    "Posterior",
    "RtoConfig",
    "RtoState",
    "WaveletSystem",
    "acf",
    "apply_B",
    "apply_B_inverse",
    "besov_weights",
    "compute_Q",
    "convolution_operator",
    "ess",
    "g1d",
    "g1d_deriv",
    "gg_cdf",
    "gg_log_pdf",
    "gg_quantile",
    "inpainting_operator",
    "jacobian_JA",
    "make_data",
    "phantom_1d",
    "phantom_shepp_logan",
    "radon_operator",
    "residual_F",
    "rto_propose",
    "run_chain",
    "solve_map",
    "summarize",
]
