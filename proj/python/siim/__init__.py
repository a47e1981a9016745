"""Python bindings for the siim C++ core."""

from ._core import (
    ChannelInstance,
    Ensemble,
    EnsemblePrediction,
    FormatError,
    QualifyDecision,
    SolverResult,
    State,
    Topology,
    UnsupportedError,
    combine,
    config_hash,
    default_config,
    grid_oracle,
    load_ensemble,
    make_topology,
    maxdist,
    qualify,
    run_experiment,
    sample_channel,
    sinr,
    sum_rate,
    training_stage,
    wmmse,
)

__all__ = [name for name in dir() if not name.startswith("_")]
