"""Protocol builders: Steane memory, rotated surface-code memory, CliNR."""

from . import logical
from .clinr import build_clinr, check_count, conditional_fidelity, random_clifford_circuit
from .decoders import DecoderError, DetectorGraph, decode
from .steane import LABELS, build_steane_protocol
from .surface import build_surface_memory, locations_per_cycle, perfect_measurement_corrects, surface_layout

__all__ = [
    "logical", "build_clinr", "check_count", "conditional_fidelity", "random_clifford_circuit", "DecoderError",
    "DetectorGraph", "decode", "LABELS", "build_steane_protocol", "build_surface_memory", "locations_per_cycle",
    "perfect_measurement_corrects", "surface_layout",
]
