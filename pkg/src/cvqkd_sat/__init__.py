"""Multi-mode CV-QKD with noiseless attenuation and amplification.

Covariance-matrix simulation of an entanglement-based multi-mode
protocol (heterodyne detection, reverse reconciliation) with optional
noiseless attenuation at the transmitter and noiseless amplification at
the receiver, over fixed-attenuation and turbulent satellite-to-ground
channels.
"""

from .atmosphere import (
    BeamSample,
    BeamSampleSet,
    BeamStats,
    LinkGeometry,
    TurbulenceModelError,
    TurbulenceProfile,
    beam_stats,
    cn2,
    dump_beam_samples_csv,
    mean_attenuation_db,
    rytov_variance,
    sample_beam,
    sample_beams,
    scintillation_index,
    transmissivity,
)
from .channel import ChannelParams, apply_channel
from .experiment import (
    MeanRateResult,
    MonteCarloConfig,
    NonMonotoneFeasibility,
    OptimizationConfig,
    OptResult,
    SampleRecord,
    max_excess_noise,
    max_zenith_angle,
    mean_key_rate,
    mean_key_rate_from_stats,
    optimize_rate,
)
from .gaussian import (
    PhysicalityError,
    SupermodeSpectrum,
    SymplecticSpectrum,
    TwoModeCM,
    cm_from_dense,
    epr_cm,
    exponential_spectrum,
    flat_spectrum,
    mean_photon_number,
    pdc_state,
    single_mode_spectrum,
    symplectic_eigenvalues,
)
from .keyrate import (
    KeyRateBreakdown,
    Protocol,
    SubchannelRate,
    bits_per_second,
    conditional_variance,
    entropy_g,
    holevo_bound,
    mutual_information,
    subchannel_rate,
    total_rate,
)
from .noiseless import (
    GainBoundError,
    GainUnbounded,
    NoiselessOp,
    amplification,
    apply_noiseless_op,
    attenuation,
    max_gain,
    success_probability,
)

__version__ = "0.1.0"
