"""ROC analysis and the held-out group-verification protocol.

Thresholds follow the deployment rule: a query is accepted iff score > threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import sample_batch
from .errors import MetricError

OPERATING_POINTS = (0.01, 0.05, 0.10)


@dataclass
class RocCurve:
    """Empirical ROC, thresholds descending; point i accepts scores > thresholds[i]."""

    thresholds: np.ndarray
    fp: np.ndarray  # false-positive counts
    tp: np.ndarray  # true-positive counts
    n_pos: int
    n_neg: int

    @property
    def pfp(self) -> np.ndarray:
        return self.fp / self.n_neg

    @property
    def ptp(self) -> np.ndarray:
        return self.tp / self.n_pos

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.pfp.tolist(), self.ptp.tolist()))

    def auc(self) -> float:
        return float(np.trapezoid(self.ptp, self.pfp))

    def write(self, path) -> Path:
        """Two columns: P_fp P_tp."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{x:.10g} {y:.10g}\n" for x, y in zip(self.pfp, self.ptp)))
        return path


def roc(pos_scores, neg_scores) -> RocCurve:
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise MetricError("ROC needs at least one positive and one negative score")
    levels = np.unique(np.concatenate([pos, neg]))[::-1]
    # counts strictly above each level
    tp = pos.size - np.searchsorted(np.sort(pos), levels, side="right")
    fp = neg.size - np.searchsorted(np.sort(neg), levels, side="right")
    thresholds = np.append(levels, -np.inf)
    tp = np.append(tp, pos.size)
    fp = np.append(fp, neg.size)
    return RocCurve(thresholds, fp.astype(np.int64), tp.astype(np.int64), pos.size, neg.size)


def auc_score(pos_scores, neg_scores) -> float:
    return roc(pos_scores, neg_scores).auc()


def ptp_at_pfp(curve: RocCurve, u: float) -> tuple[float, float]:
    """Best true-positive rate whose empirical false-positive rate does not exceed u.

    No interpolation between ROC steps; returns (P_tp, threshold).
    """
    if not 0.0 < u < 1.0:
        raise MetricError("u must lie in (0, 1)")
    ok = np.nonzero(curve.fp <= u * curve.n_neg + 1e-9)[0]
    i = ok[-1]  # fp and tp are non-decreasing along the curve
    return float(curve.ptp[i]), float(curve.thresholds[i])


def accuracy_at(pos_scores, neg_scores, threshold: float = 0.5) -> float:
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size + neg.size == 0:
        raise MetricError("accuracy of an empty score set")
    good = np.count_nonzero(pos > threshold) + np.count_nonzero(neg <= threshold)
    return good / (pos.size + neg.size)


@dataclass
class EvalReport:
    accuracy: float
    auc: float
    ptp: dict[float, float]
    thresholds: dict[float, float]
    n_pos: int
    n_neg: int
    curve: RocCurve | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        out = {"accuracy": self.accuracy, "auc": self.auc, "n_pos": self.n_pos, "n_neg": self.n_neg}
        for u in sorted(self.ptp):
            out[f"ptp@{u:g}"] = self.ptp[u]
            out[f"threshold@{u:g}"] = self.thresholds[u]
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def report_from_scores(pos, neg, operating_points=OPERATING_POINTS) -> EvalReport:
    curve = roc(pos, neg)
    ptp, thr = {}, {}
    for u in operating_points:
        ptp[u], thr[u] = ptp_at_pfp(curve, u)
    return EvalReport(accuracy_at(pos, neg, 0.5), curve.auc(), ptp, thr, curve.n_pos, curve.n_neg, curve)


def collect_scores(model, records, B_groups: int, n: int, trials: int, rng):
    """Score each query against all groups of its trial; returns (pos, neg) arrays."""
    sc = model.scorer
    pos, neg = [], []
    for _ in range(trials):
        batch = sample_batch(records, B_groups, n, rng)
        groups = model.embed_groups(batch.enrolled)
        queries = model.embed_queries(batch.queries.reshape(B_groups * n, -1))
        S = sc.score_matrix(queries, groups)
        labels = batch.labels
        pos.append(S[labels])
        neg.append(S[~labels])
    return np.concatenate(pos), np.concatenate(neg)


def run_eval(model, records, B_groups: int, n: int, trials: int, rng) -> EvalReport:
    """Enroll ``trials`` x ``B_groups`` disjoint groups of held-out identities and
    score every query against every group of its trial."""
    pos, neg = collect_scores(model, records, B_groups, n, trials, rng)
    return report_from_scores(pos, neg)
