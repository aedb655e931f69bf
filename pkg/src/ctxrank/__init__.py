"""Context-aware learning to rank with self-attention, on a small numpy autodiff core."""

from . import data, losses, metrics, model, nn
from .data import Slate, SyntheticSpec, generate_synthetic, parse_letor
from .losses import LossSpec, compute_loss
from .metrics import EvalReport, evaluate_split, mrr, ndcg_at_k
from .model import ContextAwareRanker, MlpBaseline, ModelConfig, build_model

__version__ = "0.1.0"

__all__ = [
    "ContextAwareRanker", "EvalReport", "LossSpec", "MlpBaseline", "ModelConfig", "Slate",
    "SyntheticSpec", "build_model", "compute_loss", "data", "evaluate_split",
    "generate_synthetic", "losses", "metrics", "model", "mrr", "ndcg_at_k", "nn", "parse_letor",
]
