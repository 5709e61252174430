"""Toolkit for exact sparsity-pattern recovery experiments.

Generates noisy Gaussian linear-regression instances, decodes supports
exhaustively (plus OMP/Lasso baselines), evaluates recovery bounds, and
runs reproducible Monte Carlo sweeps.
"""

__version__ = "0.1.0"

from .ensemble import (
    GramCache,
    SparseSignal,
    gram_precompute,
    observe,
    residual_sq,
    residual_sq_from_cache,
    rng_stream,
    sample_design,
    sample_signal,
)
from .decoders import (
    DecodeResult,
    EnumerationBudgetError,
    decode_exhaustive,
    decode_lasso,
    decode_omp,
    delta_statistic,
)

__all__ = [
    "GramCache",
    "SparseSignal",
    "gram_precompute",
    "observe",
    "residual_sq",
    "residual_sq_from_cache",
    "rng_stream",
    "sample_design",
    "sample_signal",
    "DecodeResult",
    "EnumerationBudgetError",
    "decode_exhaustive",
    "decode_lasso",
    "decode_omp",
    "delta_statistic",
    "__version__",
]
