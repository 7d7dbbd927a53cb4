"""Stratified, self-normalized, rejection-assisted importance sampling."""

from .engine import (
    EngineSettings, PoolStore, Precision, StratifiedEngine, simulate_batch, standard_is_estimate,
)
from .estimators import (
    EstimateResult, StratumEstimate, ZeroSignSum, allocate_samples, self_normalized_estimate,
    stratified_estimate,
)
from .pools import SamplePool, list_pools
from .rejection import UnboundedRatio, acceptance_probabilities, predicted_acceptance, rejection_resample
from .rng import sample_stream, stream
from .schedule import LogisticFit, ScheduleResult, adaptive_k_schedule, fit_logistic, logistic
from .strata import (
    SamplingError, efraimidis_spirakis, es_inclusion_probabilities, inclusion_probabilities,
    poisson_binomial, sample_configuration, sample_fault_locations, sample_fault_types,
)
from ..circuit import FaultConfiguration, NoiseLayout, SamplePoint, run_configuration

__all__ = [
    "EngineSettings", "PoolStore", "Precision", "StratifiedEngine", "simulate_batch", "standard_is_estimate",
    "EstimateResult", "StratumEstimate", "ZeroSignSum", "allocate_samples", "self_normalized_estimate",
    "stratified_estimate", "SamplePool", "list_pools", "UnboundedRatio", "acceptance_probabilities",
    "predicted_acceptance", "rejection_resample", "sample_stream", "stream", "LogisticFit", "ScheduleResult",
    "adaptive_k_schedule", "fit_logistic", "logistic", "SamplingError", "efraimidis_spirakis",
    "es_inclusion_probabilities", "inclusion_probabilities", "poisson_binomial", "sample_configuration",
    "sample_fault_locations", "sample_fault_types", "FaultConfiguration", "NoiseLayout", "SamplePoint",
    "run_configuration",
]
