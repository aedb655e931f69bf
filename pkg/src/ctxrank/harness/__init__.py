"""Configuration, training loop, re-ranking pipeline and command line."""

from .commands import format_gradcheck, run_gradcheck, synth_command
from .config import (
    DataConfig, OptimConfig, RerankConfig, RunConfig, apply_override, config_from_dict,
    config_to_dict, dump_config, load_config,
)
from .rerank import LinearBaseRanker, RerankResult, fold_assignment, out_of_fold_scores, rerank_pipeline
from .training import Dataset, Streams, TrainResult, evaluate, fit, load_dataset, train

__all__ = [
    "DataConfig", "OptimConfig", "RerankConfig", "RunConfig", "apply_override",
    "config_from_dict", "config_to_dict", "dump_config", "load_config",
    "Dataset", "Streams", "TrainResult", "evaluate", "fit", "load_dataset", "train",
    "LinearBaseRanker", "RerankResult", "fold_assignment", "out_of_fold_scores", "rerank_pipeline",
    "format_gradcheck", "run_gradcheck", "synth_command",
]
