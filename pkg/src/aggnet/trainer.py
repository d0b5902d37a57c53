"""Momentum SGD training with weight decay and a reduce-on-plateau learning-rate schedule."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .datasets import DatasetSplit, epoch_length, sample_batch
from .errors import ConfigError, SamplingError, TrainingError
from .evaluation import auc_score
from .losses import WmwConfig, loss_and_grads
from .model import AggNet, HashConfig, ModelConfig, decays, netvlad_init_kmeans
from .numcore import spawn_rngs

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.001
    batch_size: int = 64
    group_size: int = 4
    max_epochs: int = 30
    plateau_patience: int = 3
    lr_factor: float = 0.1
    min_improvement: float = 1e-4
    loss: str = "wmw"
    pooling: str = "netvlad"
    hashing: bool = True
    seed: int = 0
    d: int = 128
    hidden: tuple[int, ...] = (128,)
    K: int = 8
    alpha: float = 10.0
    gem_p: float = 3.0
    penalty_weight: float = 0.1
    penalty_exponent: float = 3.0
    wmw_margin: float = 0.3
    wmw_exponent: float = 2.0
    val_batches: int = 4
    kmeans_samples: int = 2000

    def __post_init__(self):
        if isinstance(self.hidden, str):
            self.hidden = tuple(int(h) for h in self.hidden.split(",") if h.strip())
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 so that negatives exist")
        if self.group_size < 1 or self.max_epochs < 0:
            raise ConfigError("group_size must be >= 1 and max_epochs >= 0")
        if self.loss not in ("wmw", "wce"):
            raise ConfigError(f"loss must be 'wmw' or 'wce', got {self.loss!r}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def model_config(self, d_in: int) -> ModelConfig:
        return ModelConfig(
            d_in=d_in, d=self.d, hidden=self.hidden, pooling=self.pooling, K=self.K,
            alpha=self.alpha, gem_p=self.gem_p,
            hashing=HashConfig(self.hashing, self.penalty_weight, self.penalty_exponent),
        )

    @property
    def wmw(self) -> WmwConfig:
        return WmwConfig(self.wmw_margin, self.wmw_exponent)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_auc: float
    lr: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_auc: float | None = None

    @property
    def lr_trace(self) -> list[float]:
        return [e.lr for e in self.epochs]

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e)) + "\n" for e in self.epochs)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl())
        return path


def sgd_step(params: dict, grads: dict, velocity: dict, lr: float, momentum: float,
             weight_decay: float) -> None:
    """In place: v <- momentum*v + grad + wd*param; param <- param - lr*v.

    Biases, batch-norm shifts, the GeM exponent and the scorer bias are not decayed.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}")
    for name, g in grads.items():
        p = params[name]
        step = g + weight_decay * p if decays(name) and weight_decay else np.array(g, copy=True)
        v = velocity.get(name)
        v = step if v is None else momentum * v + step
        velocity[name] = v
        p -= lr * v
    if "gem.p" in params and params["gem.p"] < 1.0:
        params["gem.p"][...] = 1.0


def init_model(cfg: TrainConfig, data: DatasetSplit, rngs) -> AggNet:
    model = AggNet(cfg.model_config(data.dim), rngs["init"])
    if cfg.pooling == "netvlad":
        raw = np.concatenate([r.samples for r in data.train])
        if len(raw) > cfg.kmeans_samples:
            raw = raw[np.sort(rngs["kmeans"].choice(len(raw), cfg.kmeans_samples, replace=False))]
        netvlad_init_kmeans(model, model.features(raw), rngs["kmeans"])
    return model


def evaluate_batches(model: AggNet, batches, cfg: TrainConfig) -> tuple[float, float]:
    """Mean objective and pooled AUC of ``batches`` in eval mode."""
    was = model.training
    model.eval()
    losses, pos, neg = [], [], []
    try:
        for batch in batches:
            value, _, _, scores = loss_and_grads(model, batch, cfg.loss, cfg.wmw, update_stats=False)
            losses.append(value)
            pos.append(scores.S[scores.labels])
            neg.append(scores.S[~scores.labels])
    finally:
        model.train(was)
    return float(np.mean(losses)), auc_score(np.concatenate(pos), np.concatenate(neg))


def train(cfg: TrainConfig, data: DatasetSplit, model: AggNet | None = None):
    """Train on ``data.train``, validate on ``data.validation``.

    Returns (report, best_model) where best_model is the parameter snapshot with
    the highest validation AUC (the initial model when no epoch ran).
    """
    rngs = spawn_rngs(cfg.seed, ["init", "kmeans", "batches", "validation"])
    B, n = cfg.batch_size, cfg.group_size
    if len(data.train) < B * n:
        raise SamplingError(f"train split has {len(data.train)} identities, a batch needs {B * n}")
    B_val = min(B, len(data.validation) // n)
    if cfg.max_epochs > 0 and B_val < 2:
        raise SamplingError("validation split too small for two groups")
    if model is None:
        model = init_model(cfg, data, rngs)
    report = TrainReport()
    best = model.copy()
    if cfg.max_epochs == 0:
        return report, best

    val_set = [sample_batch(data.validation, B_val, n, rngs["validation"]) for _ in range(cfg.val_batches)]
    steps = max(1, epoch_length(len(data.train), B, n))
    velocity: dict[str, np.ndarray] = {}
    lr = cfg.lr
    best_val_loss, stale = np.inf, 0
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        losses = []
        for _ in range(steps):
            batch = sample_batch(data.train, B, n, rngs["batches"])
            value, _, grads, _ = loss_and_grads(model, batch, cfg.loss, cfg.wmw)
            if not np.isfinite(value):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            sgd_step(model.params, grads, velocity, lr, cfg.momentum, cfg.weight_decay)
            losses.append(value)
        val_loss, val_auc = evaluate_batches(model, val_set, cfg)
        report.epochs.append(EpochRecord(epoch, float(np.mean(losses)), val_loss, val_auc, lr))
        log.info("epoch %d train %.5f val %.5f auc %.4f lr %g", epoch, np.mean(losses), val_loss, val_auc, lr)
        if report.best_val_auc is None or val_auc > report.best_val_auc:
            report.best_val_auc, report.best_epoch = val_auc, epoch
            best = model.copy()
        if val_loss < best_val_loss * (1.0 - cfg.min_improvement):
            best_val_loss, stale = val_loss, 0
        else:
            stale += 1
            if stale >= cfg.plateau_patience:
                lr *= cfg.lr_factor
                stale = 0
    return report, best.eval()
