"""Uplink one-bit massive MIMO detection with dithered quantization thresholds.

Subpackages cover the square-QAM alphabet machinery, the quantized system
model, linear and likelihood-based detectors (including the two-stage
Newton/nearest-codeword pipeline), exact small-system rate analysis, and a
seeded Monte Carlo harness with a CLI front end.
"""

from .constellation import Constellation, build_constellation, constellation_boundary
from .system_model import (
    ChannelRealization,
    NoisePower,
    ThresholdVector,
    draw_rayleigh_channel,
    generate_thresholds,
    perturb_csi,
    prq_threshold_snr_db,
    prq_threshold_variance,
    quantize,
    transmit,
)
from .linear_detect import (
    BussgangDecomposition,
    bmrc_detect,
    bussgang_decompose,
    bzf_detect,
    mrc_detect,
    quantization_label,
    zf_detect,
)
from .likelihood import (
    LikelihoodContext,
    exhaustive_candidates,
    log_likelihood,
    ml_detect,
    psi,
    safe_ln_phi,
    varphi,
)
from .bnd import BndConfig, BndResult, DetectorFailureError, bnd_detect, damping_factor
from .ncd import NcdConfig, NcdResult, ncd_detect
from .analysis import (
    RateSample,
    SpaceCodeStats,
    avg_min_hamming,
    conditional_mutual_information,
    min_hamming_distance,
    rate_survey,
)
from .harness import ConfigError, SweepConfig, SweepRecord, emit, run_sweep

__version__ = "0.1.0"
