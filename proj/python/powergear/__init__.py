"""Power modeling for dataflow graphs: construction passes, value-trace
activities, an edge-centric heterogeneous GNN and Pareto design-space
exploration. Thin wrapper over the C++ core."""

from ._core import (
    IoError,
    ValidationError,
    activation_rate,
    adrs,
    construct_dfg,
    construct_sample,
    dfg_stats,
    emit_corpus,
    hamming_hex,
    normalize_dfg,
    oracle_power_text,
    pareto_front,
    predict_file,
    switching_activity,
    trace_dfg,
    train_single_dir,
    __version__,
)

__all__ = [
    "IoError",
    "ValidationError",
    "activation_rate",
    "adrs",
    "construct_dfg",
    "construct_sample",
    "dfg_stats",
    "emit_corpus",
    "hamming_hex",
    "normalize_dfg",
    "oracle_power_text",
    "pareto_front",
    "predict_file",
    "switching_activity",
    "trace_dfg",
    "train_single_dir",
    "__version__",
]
