"""Eavesdropper-detection limits for fibers probed by stimulated Brillouin scattering.

The fiber is a cascade of single-mode Gaussian channels; a tap is a beam
splitter at one segment.  See :mod:`sbsguard.detection` for error exponents and
:mod:`sbsguard.estimation` for Fisher-information limits.
"""

from .attack import (
    AttackScenario,
    clean_output,
    displacement_gap,
    disturbed_output,
    pure_loss_output,
)
from .core_model import (
    CascadeResult,
    Convention,
    DisplacedThermalState,
    GaussianChannel,
    SegmentPhysical,
    apply_channel,
    bose_occupation,
    cascade,
    compose,
    segment_channel,
    segment_gain_params,
    susceptibility,
)
from .detection import (
    ExponentTriple,
    ScalingInputs,
    exponent_sweep,
    g_entropy,
    heterodyne_exponent,
    heterodyne_pdf,
    k_min,
    photon_threshold_exponent,
    relative_entropy,
    rho_min,
    stein_exponent,
    stolen_bits,
    weak_attack_exponent,
)
from .errors import (
    DegeneratePovmError,
    InfeasibleError,
    InvalidParameterError,
    NonPhysicalChannelError,
    TailMassError,
)
from .estimation import (
    MeasurementScheme,
    RhoDerivatives,
    SldSpec,
    classical_fisher_info,
    crb,
    displaced_thermal_pnr,
    mc_estimator_variance,
    qfi,
    qfi_gaussian_general,
    rho_derivatives,
    sld_spec,
)

__version__ = "0.1.0"
