"""Decay spectra, position-dependent tapers and gate schedules for diagonal linear recurrences."""
from ._errors import (
    DomainError,
    IllConditionedError,
    InvalidModulationError,
    InvalidParameterError,
    NotStrictlyOrderedError,
    ShapeError,
    SpectaperError,
)
from .spectrum import (
    DecaySpectrum,
    PostParams,
    SpectrumStats,
    coherence,
    geometric_init,
    inverse_post_map,
    lograte_coherence_bound,
    nondegeneracy_bound,
    post_map,
    spectrum_stats,
)
from .taper import (
    EquipartitionBand,
    TaperVector,
    adaptive_taper,
    effective_spectrum,
    equipartition_band,
    linear_taper,
    sigmoid_lograte_proxy,
)
from .gates import (
    GateSchedule,
    ModulationInput,
    RwkvInit,
    generic_gates,
    mamba_gates,
    retnet_gates,
    rwkv_gates,
    rwkv_init,
    rwkv_taper,
    zigzag_bias,
)
from .estimators import TaperedDecay

__version__ = "0.1.0"
