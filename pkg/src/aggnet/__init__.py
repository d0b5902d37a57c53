"""Learned aggregation of descriptors into binary group codes for privacy-preserving
group membership verification."""

__version__ = "0.1.0"

from .datasets import DatasetSplit, IdentityRecord, TrainBatch, gen_synthetic, load_embeddings, sample_batch, write_embeddings
from .evaluation import EvalReport, RocCurve, accuracy_at, auc_score, ptp_at_pfp, roc, run_eval
from .losses import WmwConfig, wce_loss, wmw_loss
from .membership import GroupStore, VerifyDecision
from .model import AggNet, HashConfig, ModelConfig, load_checkpoint, save_checkpoint
from .scorer import LogisticScorer
from .trainer import TrainConfig, TrainReport, train

__all__ = [
    "AggNet", "DatasetSplit", "EvalReport", "GroupStore", "HashConfig", "IdentityRecord",
    "LogisticScorer", "ModelConfig", "RocCurve", "TrainBatch", "TrainConfig", "TrainReport",
    "VerifyDecision", "WmwConfig", "accuracy_at", "auc_score", "gen_synthetic", "load_checkpoint",
    "load_embeddings", "ptp_at_pfp", "roc", "run_eval", "sample_batch", "save_checkpoint", "train",
    "wce_loss", "wmw_loss", "write_embeddings",
]
