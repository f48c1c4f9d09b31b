"""Tail moments, tail central moments and capital allocation for normal mean-variance mixtures."""

from .allocation import (
    AllocationCoefficients,
    AllocationReport,
    CapitalAllocator,
    coefficients,
    combined_allocation,
    conditional_cross_moment,
    cte_allocation,
    euler_rooted_allocation,
    tail_cov_power,
    tcm_allocation,
    tv_allocation,
)
from .errors import (
    DataError,
    DegenerateAggregate,
    DomainError,
    EmptyTail,
    FactorisationFailure,
    InsufficientData,
    ModelValidationError,
    MomentNotFinite,
    NMVMError,
    NonPositivePrice,
    NonPositiveTCM,
    NumericalWarning,
    TailUnderflow,
)
from .mixing import GIG, Degenerate, MixingModel, Tabulated, mixing_moment, sample_mixing, tilt
from .modelfile import dump_model, load_example_model, load_model
from .nmvm import MultivariateNMVM, UnivariateNMVM, aggregate, reweight
from .oracle import SampleBatch, empirical_tail_functional, sample_nmvm, validation_report
from .series import descriptive_stats, log_losses
from .tail_moments import TMTable, shifted_tail_power, tail_central_moment, tail_moment_table

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
