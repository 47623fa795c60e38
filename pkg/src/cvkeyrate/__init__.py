"""Asymptotic secret-key rates for Gaussian-modulated coherent-state CV-QKD
with intensity-fluctuating sources: exact ideal-rate evaluation, three
security analyses for fluctuating pulses (monitored, unmonitored/secure,
unmonitored/tagged with cutoff optimization), a pulse-level Monte Carlo
validator of the analytic reductions, and homodyne decoding-flaw models."""

from .core import (
    CaseTag,
    ChannelPoint,
    HolevoBreakdown,
    KeyRateResult,
    MaxDistanceResult,
    SystemParams,
    channel_transmittance,
    g_func,
    holevo_bound,
    key_rate_r0,
    max_distance,
    mutual_info,
)
from .cases import (
    EquivalentSource,
    TaggedRateTerms,
    equivalent_source_2a,
    equivalent_source_2b,
    key_rate_case1,
    key_rate_case1_refined,
    key_rate_case2a,
    key_rate_case2b,
    optimize_dmax,
    overall_channel_2a,
    partition_sets,
    tagged_rate_terms,
)
from .errors import (
    ConfigError,
    DomainError,
    EstimationError,
    EvaluationError,
    KeyRateError,
    NonphysicalStateError,
    NoPositiveRateError,
)
from .fluctuation import FluctuationModel
from .montecarlo import SampleSet, dump_samples, estimate_params, estimate_with_errors, simulate

__version__ = "0.1.0"

__all__ = [
    "CaseTag",
    "ChannelPoint",
    "ConfigError",
    "DomainError",
    "EquivalentSource",
    "EstimationError",
    "EvaluationError",
    "FluctuationModel",
    "HolevoBreakdown",
    "KeyRateError",
    "KeyRateResult",
    "MaxDistanceResult",
    "NonphysicalStateError",
    "NoPositiveRateError",
    "SampleSet",
    "SystemParams",
    "TaggedRateTerms",
    "channel_transmittance",
    "dump_samples",
    "equivalent_source_2a",
    "equivalent_source_2b",
    "estimate_params",
    "estimate_with_errors",
    "g_func",
    "holevo_bound",
    "key_rate_case1",
    "key_rate_case1_refined",
    "key_rate_case2a",
    "key_rate_case2b",
    "key_rate_r0",
    "max_distance",
    "mutual_info",
    "optimize_dmax",
    "overall_channel_2a",
    "partition_sets",
    "simulate",
    "tagged_rate_terms",
]
