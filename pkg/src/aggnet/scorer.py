"""Membership score: logistic regression on the normalized inner product of group and query codes.

    s = sigmoid(w * <g, q> / normalizer + beta)

``normalizer`` is d for binary codes, which maps <g, q> into [-1, 1]. Real-valued
(unhashed) codes are unit-norm already, so the model sets it to 1 for them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError
from .numcore import sigmoid


@dataclass(frozen=True)
class LogisticScorer:
    w: float = 5.0
    beta: float = 0.0
    normalizer: float | None = None  # None: use the code dimension d

    def _norm(self, d: int) -> float:
        return float(d) if self.normalizer is None else float(self.normalizer)

    def similarity(self, g, q) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        if g.shape[-1] != q.shape[-1]:
            raise DimensionError(f"group dim {g.shape[-1]} != query dim {q.shape[-1]}")
        return np.sum(g * q, axis=-1) / self._norm(g.shape[-1])

    def score(self, g, q) -> float | np.ndarray:
        s = sigmoid(self.w * self.similarity(g, q) + self.beta)
        return float(s) if np.ndim(s) == 0 else s

    def score_matrix(self, queries: np.ndarray, groups: np.ndarray) -> np.ndarray:
        """[Q, d] x [B, d] -> [Q, B] scores."""
        if queries.shape[1] != groups.shape[1]:
            raise DimensionError(f"query dim {queries.shape[1]} != group dim {groups.shape[1]}")
        sim = queries @ groups.T / self._norm(groups.shape[1])
        return sigmoid(self.w * sim + self.beta)


class ScoreGrads(NamedTuple):
    w: float
    beta: float
    g: np.ndarray
    q: np.ndarray


def score_backward(sc: LogisticScorer, g, q, grad_s) -> ScoreGrads:
    """Exact gradients of score(g, q) scaled by grad_s, for a single pair."""
    g = np.asarray(g, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    sim = float(sc.similarity(g, q))
    s = float(sigmoid(sc.w * sim + sc.beta))
    dz = float(grad_s) * s * (1.0 - s)
    scale = dz * sc.w / sc._norm(g.shape[-1])
    return ScoreGrads(dz * sim, dz, scale * q, scale * g)


def score_matrix_backward(sc: LogisticScorer, queries: np.ndarray, groups: np.ndarray,
                          S: np.ndarray, grad_S: np.ndarray):
    """Backward of score_matrix. Returns (d_w, d_beta, d_queries, d_groups)."""
    norm = sc._norm(groups.shape[1])
    sim = queries @ groups.T / norm
    dz = grad_S * S * (1.0 - S)
    d_sim = dz * sc.w / norm
    return float(np.sum(dz * sim)), float(np.sum(dz)), d_sim @ groups, d_sim.T @ queries
