"""Stratified importance sampling of noisy Clifford circuits under general single-qubit noise."""

from .channels import (
    ChannelError, KrausChannel, StabilizerDecomposition, amplitude_damping, channel_from_spec, decompose,
    depolarizing, worst_case_infidelity, z_rotation,
)
from .circuit import CircuitSpec, FaultConfiguration, NoiseLayout, run_configuration
from .experiment import ConfigError, ExperimentConfig, ExperimentResult, run_experiment
from .oracle import exact_expectation, exact_stratum_value
from .pauli import PauliString
from .sampling import EngineSettings, Precision, StratifiedEngine
from .tableau import Tableau

__version__ = "0.1.0"

__all__ = [
    "ChannelError", "KrausChannel", "StabilizerDecomposition", "amplitude_damping", "channel_from_spec",
    "decompose", "depolarizing", "worst_case_infidelity", "z_rotation", "CircuitSpec", "FaultConfiguration",
    "NoiseLayout", "run_configuration", "ConfigError", "ExperimentConfig", "ExperimentResult", "run_experiment",
    "exact_expectation", "exact_stratum_value", "PauliString", "EngineSettings", "Precision", "StratifiedEngine",
    "Tableau", "__version__",
]
