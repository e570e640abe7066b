"""Multi-scale Lucas-Kanade speed estimation and discrimination benchmark."""

from .backend import active_backend
from .calibration import (
    ConfidenceSample,
    SpeedSweep,
    default_sweep,
    fit_model,
    measure_confidence,
    measure_confidence_levels,
)
from .coarse_to_fine import SerialParams, serial_flow, serial_object_speed
from .discrimination import (
    DiscriminationParams,
    OracleEstimator,
    ParallelEstimator,
    SerialEstimator,
    SingleLevelEstimator,
    compare,
    discrimination_curve,
    is_detectable,
    min_detectable,
    runtime_report,
)
from .fusion import (
    ConfidenceModel,
    ParallelParams,
    default_model,
    load_model,
    model_confidence,
    parallel_flow,
    parallel_object_speed,
    save_model,
)
from .imgseq import (
    SynthSpec,
    generate_sequence,
    load_pgm,
    load_sequence,
    object_mask,
    save_pgm,
    save_sequence,
)
from .lkflow import (
    FlowField,
    LKParams,
    lk_flow,
    load_flow,
    mean_object_speed,
    save_flow,
    spatial_gradient,
    warp,
)
from .pyramid import Pyramid, build_pyramid

__version__ = "0.1.0"
