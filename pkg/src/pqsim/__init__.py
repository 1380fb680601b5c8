"""Simulator for hypothetical post-quantum measurement devices.

The package models finite-dimensional quantum states together with a
catalog of information-revealing devices that standard quantum mechanics
forbids (state readouts, entropy meters, non-disturbing samplers), the
outcome-probability-function framework they live in, and executable
experiments: cloning and signalling demonstrations, two refutation
constructions, and state-estimation protocols.
"""

from .qcore import (
    DensityMatrix,
    Ensemble,
    FactorSpace,
    HermitianObservable,
    POVMSet,
    PureState,
    RandomStream,
    SchmidtDecomposition,
    born_probabilities,
    entropy,
    fidelity,
    measure_projective,
    partial_trace,
    quantize,
    renyi_entropy,
    schmidt_decompose,
    tensor_product,
    von_neumann_entropy,
)

__all__ = [
    "DensityMatrix",
    "Ensemble",
    "FactorSpace",
    "HermitianObservable",
    "POVMSet",
    "PureState",
    "RandomStream",
    "SchmidtDecomposition",
    "born_probabilities",
    "entropy",
    "fidelity",
    "measure_projective",
    "partial_trace",
    "quantize",
    "renyi_entropy",
    "schmidt_decompose",
    "tensor_product",
    "von_neumann_entropy",
]

__version__ = "0.1.0"
