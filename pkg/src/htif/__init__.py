"""Simulation and tail-statistics toolkit for integrate-and-fire networks
driven by heavy-tailed, dependent interspike intervals."""

from .dynamics import (
    ReceiverConfig,
    SpikeTrain,
    SuperpositionIndex,
    WalkStats,
    abstract_walk_first_passage,
    output_independence_diagnostic,
    paired_isis,
    run_receiver,
    run_two_receivers,
    write_spike_train_csv,
)
from .engine import (
    EngineState,
    Event,
    EventStream,
    NetworkTopology,
    build_event_stream,
    init_engine,
    initial_residuals,
    next_event,
    tau_independence_diagnostic,
    write_events_csv,
)
from .errors import (
    ConfigError,
    DomainError,
    InsufficientDataError,
    InvariantViolationError,
    ModelExclusionError,
    ToolkitError,
)
from .inputs import (
    HypothesisReport,
    InputGeneratorSpec,
    IsiMatrixChunk,
    generate_isi_chunk,
    validate_hypotheses,
    write_chunk_csv,
)
from .rv import (
    RngHandle,
    TailModel,
    pareto_quantile,
    pareto_survival,
    sample_bounded_multiplier,
    sample_pareto,
)
from .tailstats import (
    DependenceRatio,
    LagDependence,
    RadialCheck,
    SpectralEstimate,
    TailEstimate,
    TailRatioCurve,
    equivalence_ratio,
    hill_estimate,
    hill_sweep,
    lag_exceedance_ratios,
    radial_rv_check,
    spectral_estimate,
    upper_tail_independence,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InsufficientDataError",
    "InvariantViolationError",
    "ModelExclusionError",
    "ToolkitError",
    "RngHandle",
    "TailModel",
    "pareto_quantile",
    "pareto_survival",
    "sample_bounded_multiplier",
    "sample_pareto",
    "InputGeneratorSpec",
    "IsiMatrixChunk",
    "HypothesisReport",
    "generate_isi_chunk",
    "validate_hypotheses",
    "write_chunk_csv",
    "NetworkTopology",
    "Event",
    "EventStream",
    "EngineState",
    "init_engine",
    "initial_residuals",
    "next_event",
    "build_event_stream",
    "tau_independence_diagnostic",
    "write_events_csv",
    "ReceiverConfig",
    "SpikeTrain",
    "SuperpositionIndex",
    "run_receiver",
    "run_two_receivers",
    "paired_isis",
    "WalkStats",
    "abstract_walk_first_passage",
    "output_independence_diagnostic",
    "write_spike_train_csv",
    "TailEstimate",
    "TailRatioCurve",
    "LagDependence",
    "DependenceRatio",
    "SpectralEstimate",
    "RadialCheck",
    "hill_estimate",
    "hill_sweep",
    "equivalence_ratio",
    "lag_exceedance_ratios",
    "upper_tail_independence",
    "spectral_estimate",
    "radial_rv_check",
]
