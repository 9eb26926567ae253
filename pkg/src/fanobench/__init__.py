"""Sequential-decoding throughput workbench.

Measures how long Fano decoders take, models the finite input buffer they
drain, and sizes decoder farms from the result.  See the README for the
pipeline walkthrough.
"""

__version__ = "0.1.0"

from .codec import (
    ChannelCondition,
    CodeSpec,
    bsc_crossover,
    encode,
    transmit,
)
from .fano import (
    CYCLE_CAP_HIT,
    DECODED,
    FRAME_ERROR,
    DecodeOutcome,
    FanoConfig,
    decode_bfa,
    decode_ufa,
    fano_metric,
)
from .montecarlo import (
    ParetoFit,
    TsDistribution,
    fit_pareto,
    load_distribution,
    merge_distributions,
    run_campaign,
    save_distribution,
)
from .dtmc import (
    DeltaPmf,
    DtmcModel,
    OccupancyStats,
    QueueSpec,
    build_transition,
    delta_pmf,
    failure_probability,
    occupancy_stats,
    rate_vs_buffer,
    round_half_away,
    solve_speed_factor,
    steady_state,
    steady_state_from_delta,
)
from .queuesim import SimReport, simulate_queue
from .planner import (
    AreaModel,
    DesignPoint,
    area_reduction,
    decoders_for_target,
    farm_area,
    normalized_throughput_curve,
    plan,
)
from .errors import (
    DimensionError,
    InputShapeError,
    InsufficientTailError,
    NonConvergenceError,
    SchemaError,
    UnattainableError,
    WorkbenchError,
)

__all__ = [
    "__version__",
    "ChannelCondition", "CodeSpec", "bsc_crossover", "encode", "transmit",
    "CYCLE_CAP_HIT", "DECODED", "FRAME_ERROR", "DecodeOutcome", "FanoConfig",
    "decode_bfa", "decode_ufa", "fano_metric",
    "ParetoFit", "TsDistribution", "fit_pareto", "load_distribution",
    "merge_distributions", "run_campaign", "save_distribution",
    "DeltaPmf", "DtmcModel", "OccupancyStats", "QueueSpec", "build_transition",
    "delta_pmf", "failure_probability", "occupancy_stats", "rate_vs_buffer",
    "round_half_away", "solve_speed_factor", "steady_state",
    "steady_state_from_delta",
    "SimReport", "simulate_queue",
    "AreaModel", "DesignPoint", "area_reduction", "decoders_for_target",
    "farm_area", "normalized_throughput_curve", "plan",
    "DimensionError", "InputShapeError", "InsufficientTailError",
    "NonConvergenceError", "SchemaError", "UnattainableError", "WorkbenchError",
]
