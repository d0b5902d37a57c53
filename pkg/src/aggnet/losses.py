"""Training objectives on an in-batch [Q, B] score matrix.

The Wilcoxon-Mann-Whitney surrogate ranks every positive (query, own group)
score above every negative one by a margin gamma:

    L = 1/(|P||N|) sum_{i in P} sum_{j in N} max(0, gamma - (s_i - s_j))^p

The weighted cross entropy up-weights the single positive per row by B-1.
Both are reconstructions with gamma, p exposed as configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LossError
from .scorer import score_matrix_backward

CLAMP = 1e-7


@dataclass(frozen=True)
class WmwConfig:
    margin: float = 0.3
    exponent: float = 2.0

    def __post_init__(self):
        if not (0 < self.margin <= 1) or self.exponent < 1:
            raise ConfigError("WMW needs margin in (0, 1] and exponent >= 1")


def wmw_loss(S: np.ndarray, labels: np.ndarray, cfg: WmwConfig = WmwConfig()):
    """Returns (loss, dL/dS).

    Scores are sorted within each side before the pairwise sum, so the loss is
    bit-identical under any reordering of positives or negatives.
    """
    S = np.asarray(S, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pos_idx = np.argsort(S[labels], kind="stable")
    neg_idx = np.argsort(S[~labels], kind="stable")
    pos = S[labels][pos_idx]
    neg = S[~labels][neg_idx]
    if pos.size == 0 or neg.size == 0:
        raise LossError("WMW loss needs at least one positive and one negative score")
    viol = cfg.margin - (pos[:, None] - neg[None, :])
    active = np.maximum(viol, 0.0)
    norm = pos.size * neg.size
    loss = float(np.sum(active ** cfg.exponent) / norm)
    if cfg.exponent == 1:
        dpair = (viol > 0).astype(np.float64) / norm
    else:
        dpair = cfg.exponent * active ** (cfg.exponent - 1) / norm
    g_pos = np.empty(pos.size)
    g_neg = np.empty(neg.size)
    g_pos[pos_idx] = -dpair.sum(1)
    g_neg[neg_idx] = dpair.sum(0)
    grad = np.zeros_like(S)
    grad[labels] = g_pos
    grad[~labels] = g_neg
    return loss, grad


def wce_loss(S: np.ndarray, labels: np.ndarray):
    """Weighted binary cross entropy with positive weight B-1. Returns (loss, dL/dS)."""
    S = np.asarray(S, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    Q, B = S.shape
    w_pos = max(B - 1, 1)
    s = np.clip(S, CLAMP, 1.0 - CLAMP)
    inside = (S >= CLAMP) & (S <= 1.0 - CLAMP)
    n = Q * B
    loss = float(np.sum(w_pos * y * -np.log(s) + (1 - y) * -np.log(1 - s)) / n)
    grad = (w_pos * y * (-1.0 / s) + (1 - y) / (1 - s)) / n
    return loss, np.where(inside, grad, 0.0)


def task_loss(name: str, S: np.ndarray, labels: np.ndarray, wmw: WmwConfig = WmwConfig()):
    if name == "wmw":
        return wmw_loss(S, labels, wmw)
    if name == "wce":
        return wce_loss(S, labels)
    raise ConfigError(f"unknown loss {name!r}")


def total_loss(task: float, hash_penalties, penalty_weight: float) -> float:
    return float(task + penalty_weight * sum(hash_penalties))


@dataclass
class ScoreMatrix:
    S: np.ndarray  # [Q, B] scores in (0, 1)
    labels: np.ndarray  # [Q, B] bool, one True per row


def batch_scores(model, batch, update_stats: bool = True):
    """Score every query of ``batch`` against every group of the same batch.

    Groups and queries go through one forward pass (B sets of n rows followed by
    Q singleton sets), so batch-norm statistics are shared in training mode.
    Returns (ScoreMatrix, cache); the cache feeds ``batch_backward``.
    """
    B, n, d_in = batch.enrolled.shape
    Q = B * n
    x = np.concatenate([batch.enrolled.reshape(Q, d_in), batch.queries.reshape(Q, d_in)])
    sizes = np.concatenate([np.full(B, n), np.ones(Q, dtype=np.int64)])
    codes, h, cache = model.forward(x, sizes, update_stats=update_stats)
    groups, queries = codes[:B], codes[B:]
    sc = model.scorer
    S = sc.score_matrix(queries, groups)
    return ScoreMatrix(S, batch.labels), (cache, sc, groups, queries, S, h)


def batch_backward(model, cache, grad_S: np.ndarray) -> dict[str, np.ndarray]:
    net_cache, sc, groups, queries, S, _ = cache
    d_w, d_beta, d_q, d_g = score_matrix_backward(sc, queries, groups, S, grad_S)
    grads = model.backward(net_cache, np.concatenate([d_g, d_q]))
    grads["scorer.w"] = np.array(d_w)
    grads["scorer.beta"] = np.array(d_beta)
    return grads


def loss_and_grads(model, batch, loss: str = "wmw", wmw: WmwConfig = WmwConfig(),
                   update_stats: bool = True):
    """Full objective (task + weighted hash penalty) and its gradient for one batch."""
    scores, cache = batch_scores(model, batch, update_stats)
    task, grad_S = task_loss(loss, scores.S, scores.labels, wmw)
    h = cache[-1]
    penalties = [model.penalty(h)] if model.hashing.enabled else []
    value = total_loss(task, penalties, model.hashing.penalty_weight)
    grads = batch_backward(model, cache, grad_S)
    return value, task, grads, scores
