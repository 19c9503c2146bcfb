"""Noise-growth modeling and scheme parameter selection."""
from .model import (
    AVG_CASE,
    VARIANCE,
    WORST_CASE,
    NoiseAnalysis,
    NoiseBound,
    NoiseModelVariant,
    analyze_noise,
    propagate_noise,
    variant_named,
)
from .params import (
    DEFAULT_SECURITY_TABLE,
    SchemeParams,
    attach_parameters,
    lookup_ring_dimension,
    module_parameters,
    select_parameters,
    validate_parameters,
)

__all__ = [
    "AVG_CASE",
    "VARIANCE",
    "WORST_CASE",
    "NoiseAnalysis",
    "NoiseBound",
    "NoiseModelVariant",
    "analyze_noise",
    "propagate_noise",
    "variant_named",
    "DEFAULT_SECURITY_TABLE",
    "SchemeParams",
    "attach_parameters",
    "lookup_ring_dimension",
    "module_parameters",
    "select_parameters",
    "validate_parameters",
]
