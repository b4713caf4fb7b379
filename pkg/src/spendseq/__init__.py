"""spendseq: analytics and next-purchase models for digital purchase receipt logs."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConvergenceError,
    DataError,
    DegenerateSampleError,
    EmptySampleError,
    SpendSeqError,
)
