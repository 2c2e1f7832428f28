"""Simulation and spectral analysis of a three-layer ACL cantilever beam.

Two face layers actuated by electrode voltages sandwich a compliant core
that couples stretching and bending through its shear angle.  The package
assembles three closed-loop variants of the model (fully dynamic "magnetic",
quasi-static "electrostatic", and the shear-decoupled comparison system),
integrates them with an energy-exact implicit midpoint scheme, computes
generator spectra, and quantifies stabilization: the electrostatic loop
decays exponentially under tip feedback, while odd-ratio resonant parameter
combinations of the magnetic loop carry undamped modes that no collocated
feedback can reach.
"""

__version__ = "0.1.0"

from .analysis import (
    DecayFit,
    ModeComparison,
    ResonanceScanResult,
    compare_coupled_decoupled,
    fit_decay_rate,
    resonance_scan,
)
from .dynamics import (
    EnergyBreakdown,
    State,
    Trajectory,
    energy,
    expm_oracle,
    nodal_state,
    random_smooth_state,
    simulate,
    step,
)
from .fem import (
    DofLayout,
    Mesh,
    SystemMatrices,
    assemble,
    assemble_decoupled,
    assemble_electrostatic,
    assemble_magnetic,
    coupling_matrix,
)
from .params import (
    BeamConfig,
    CoreParams,
    DerivedConstants,
    FeedbackGains,
    LayerParams,
    Model,
    derive_constants,
    normalized_config,
    resonant_config,
    solve_resonant_gamma,
    validate_config,
)
from .spectral import (
    AnalyticResonantMode,
    EigMode,
    ModeClass,
    Spectrum,
    SpectrumClasses,
    build_resonant_mode,
    classify,
    generator_spectrum,
    spectrum_report,
    strong_form_residual,
)

__all__ = [
    "AnalyticResonantMode", "BeamConfig", "CoreParams", "DecayFit", "DerivedConstants",
    "DofLayout", "EigMode", "EnergyBreakdown", "FeedbackGains", "LayerParams", "Mesh",
    "ModeClass", "ModeComparison", "Model", "ResonanceScanResult", "Spectrum",
    "SpectrumClasses", "State", "SystemMatrices", "Trajectory", "assemble",
    "assemble_decoupled", "assemble_electrostatic", "assemble_magnetic",
    "build_resonant_mode", "classify", "compare_coupled_decoupled", "coupling_matrix",
    "derive_constants", "energy", "expm_oracle", "fit_decay_rate", "generator_spectrum",
    "nodal_state", "normalized_config", "random_smooth_state", "resonance_scan",
    "resonant_config", "simulate", "solve_resonant_gamma", "spectrum_report", "step",
    "strong_form_residual", "validate_config",
]
