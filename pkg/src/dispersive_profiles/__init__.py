"""Spectral engine for homogeneous dispersive propagators and extraction of
dispersive profiles from bounded families of discretized Sobolev functions."""

from .symbols import (
    AdmissiblePair,
    DispersiveSymbol,
    admissible_exponents,
    custom_symbol,
    diagonal_exponent,
    eigendecompose,
    make_builtin,
    sobolev_exponent,
    symbol_from_id,
)
from .field import (
    Field,
    GridSpec,
    SequenceFamily,
    besov_sup_norm,
    lebesgue_norm,
    profile_operator,
    propagate,
    sobolev_norm,
    strichartz_norm,
    transform,
)
from .scales import (
    DyadicProfile,
    ScaleSequence,
    dyadic_profile,
    oscillatory_defect,
    scale_decompose,
    scales_orthogonal,
    singular_band_mass,
)
from .extraction import (
    Core,
    DecomposeParams,
    DecompositionReport,
    Profile,
    decompose,
    estimate_profile,
    extract_step,
    full_decompose,
    gamma_surrogate,
    pick_center,
    pick_time,
)
from .synthesis import PlantSpec, PlantedProfile, ProfileLaw, orthogonal_laws, plant

__version__ = "0.1.0"

__all__ = [
    "Core",
    "DecomposeParams",
    "DecompositionReport",
    "DyadicProfile",
    "PlantSpec",
    "PlantedProfile",
    "Profile",
    "ProfileLaw",
    "ScaleSequence",
    "decompose",
    "dyadic_profile",
    "estimate_profile",
    "extract_step",
    "full_decompose",
    "gamma_surrogate",
    "orthogonal_laws",
    "oscillatory_defect",
    "pick_center",
    "pick_time",
    "plant",
    "scale_decompose",
    "scales_orthogonal",
    "singular_band_mass",
    "AdmissiblePair",
    "DispersiveSymbol",
    "Field",
    "GridSpec",
    "SequenceFamily",
    "admissible_exponents",
    "besov_sup_norm",
    "custom_symbol",
    "diagonal_exponent",
    "eigendecompose",
    "lebesgue_norm",
    "make_builtin",
    "profile_operator",
    "propagate",
    "sobolev_exponent",
    "sobolev_norm",
    "strichartz_norm",
    "symbol_from_id",
    "transform",
]
