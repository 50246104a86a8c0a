"""Finite-volume Gibbs states, moment generating functions and large-deviation rates for quantum lattice models."""
from .gibbs import (
    NORMALIZED,
    ORDINARY,
    DeviationMeasure,
    GibbsState,
    SpectralCache,
    SpectralDecomposition,
    SpectralError,
    deviation_measure,
    gibbs_state,
    kms_check,
    mean_entropy_energy,
    mgf,
    model_state,
    perturbed_state,
    pressure,
    spectral,
)
from .lattice import (
    BlockDecomposition,
    Interaction,
    NormReport,
    Region,
    boundary_terms,
    decompose,
    interaction_from_dict,
    norms,
    terms_in,
)
from .models import Model, build_hubbard, build_spin_chain, make_model, observable, observable_operator
from .operators import AssembledOperator, assemble, car_ops, embed, macro_observable, parity

__version__ = "0.1.0"

__all__ = [
    "assemble",
    "AssembledOperator",
    "BlockDecomposition",
    "boundary_terms",
    "build_hubbard",
    "build_spin_chain",
    "car_ops",
    "decompose",
    "deviation_measure",
    "DeviationMeasure",
    "embed",
    "gibbs_state",
    "GibbsState",
    "Interaction",
    "interaction_from_dict",
    "kms_check",
    "macro_observable",
    "make_model",
    "mean_entropy_energy",
    "mgf",
    "Model",
    "model_state",
    "NORMALIZED",
    "NormReport",
    "norms",
    "observable",
    "observable_operator",
    "ORDINARY",
    "parity",
    "perturbed_state",
    "pressure",
    "Region",
    "spectral",
    "SpectralCache",
    "SpectralDecomposition",
    "SpectralError",
    "terms_in",
]
