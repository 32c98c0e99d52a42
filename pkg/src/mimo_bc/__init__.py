"""
Threshold-based eigenmode scheduling with zero-forcing beamforming for MIMO
broadcast channels, with DPC / TDMA / random-selection baselines and Monte
Carlo checks of the underlying random-matrix statistics.

Rates are in nats; noise power is 1 so the linear transmit power equals the
SNR.
"""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelMatrix,
    DecompositionError,
    EigenMode,
    SingularMatrixError,
    orthogonality,
    orthogonality_defect,
    rng_stream,
    sample_channel,
    sample_channels,
    svd_modes,
)
from .distributions import DistributionSpec, Family  # noqa: E402
from .precoding import (  # noqa: E402
    allocate_power,
    coordinate_matrix,
    effective_noise_gammas,
    sum_rate,
    waterfill_powers,
    zero_forcing_precode,
)
from .selection import (  # noqa: E402
    CandidateSet,
    SelectionResult,
    ThresholdMode,
    ThresholdPreset,
    exhaustive_select,
    greedy_select,
    interactive_select,
    modes_from_channels,
    preselect,
    random_select,
    threshold_preset,
)
from .baselines import dpc_sum_capacity, no_csi_rate, random_dpc_rate, tdma_rate  # noqa: E402
from .experiments import ExperimentConfig, ValidationReport  # noqa: E402

__all__ = [
    "__version__",
    "ChannelMatrix",
    "DecompositionError",
    "EigenMode",
    "SingularMatrixError",
    "orthogonality",
    "orthogonality_defect",
    "rng_stream",
    "sample_channel",
    "sample_channels",
    "svd_modes",
    "allocate_power",
    "coordinate_matrix",
    "effective_noise_gammas",
    "sum_rate",
    "waterfill_powers",
    "zero_forcing_precode",
    "CandidateSet",
    "SelectionResult",
    "ThresholdMode",
    "ThresholdPreset",
    "exhaustive_select",
    "greedy_select",
    "interactive_select",
    "modes_from_channels",
    "preselect",
    "random_select",
    "threshold_preset",
    "DistributionSpec",
    "Family",
    "dpc_sum_capacity",
    "no_csi_rate",
    "random_dpc_rate",
    "tdma_rate",
    "ExperimentConfig",
    "ValidationReport",
]
