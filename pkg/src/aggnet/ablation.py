"""Ablation matrix, group-size sweep and binary-vs-real comparison at desk scale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datasets import DatasetSplit
from .evaluation import EvalReport, collect_scores, report_from_scores
from .model import AggNet
from .numcore import spawn_rngs
from .trainer import TrainConfig, train

# Ablation table of the original LFW experiment (ResNet50 trained on VGGFace2, n=4),
# attached to desk-scale tables for context only.
REPORTED = {
    "EoA": {"accuracy": 0.74, "ptp@0.01": 0.15, "ptp@0.05": 0.33, "ptp@0.1": 0.45, "auc": 0.80},
    "Sum-WMW": {"accuracy": 0.90, "ptp@0.01": 0.36, "ptp@0.05": 0.65, "ptp@0.1": 0.80, "auc": 0.93},
    "GeM-WMW": {"accuracy": 0.91, "ptp@0.01": 0.36, "ptp@0.05": 0.66, "ptp@0.1": 0.80, "auc": 0.93},
    "AggNet-WCE": {"accuracy": 0.92, "ptp@0.01": 0.34, "ptp@0.05": 0.68, "ptp@0.1": 0.83, "auc": 0.93},
    "AggNet-WMW": {"accuracy": 0.92, "ptp@0.01": 0.46, "ptp@0.05": 0.75, "ptp@0.1": 0.87, "auc": 0.95},
}

METRICS = ("accuracy", "ptp@0.01", "ptp@0.05", "ptp@0.1", "auc")


@dataclass
class Variant:
    name: str
    overrides: dict = field(default_factory=dict)
    trained: bool = True
    reported_as: str | None = None


@dataclass
class EvalSettings:
    groups_per_trial: int = 64
    trials: int = 50
    seed: int = 12345


@dataclass
class AblationRow:
    variant: Variant
    reports: list[EvalReport]

    def values(self, metric: str) -> np.ndarray:
        return np.array([r.as_dict()[metric] for r in self.reports])

    def mean(self, metric: str) -> float:
        return float(self.values(metric).mean())

    def std(self, metric: str) -> float:
        return float(self.values(metric).std())


@dataclass
class AblationTable:
    rows: list[AblationRow]

    def row(self, name: str) -> AblationRow:
        for r in self.rows:
            if r.variant.name == name:
                return r
        raise KeyError(name)

    def to_text(self) -> str:
        head = f"{'variant':<30}" + "".join(f"{m:>18}" for m in METRICS) + "   reported (LFW)"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            cells = "".join(f"{r.mean(m):>11.4f}±{r.std(m):<6.4f}" for m in METRICS)
            rep = REPORTED.get(r.variant.reported_as or "")
            rep_s = " ".join(f"{rep[m]:.2f}" for m in METRICS) if rep else "-"
            lines.append(f"{r.variant.name:<30}{cells}   {rep_s}")
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        out = []
        for r in self.rows:
            rec = {"variant": r.variant.name, "trained": r.variant.trained, "overrides": r.variant.overrides,
                   "seeds": len(r.reports)}
            for m in METRICS:
                rec[m] = r.mean(m)
                rec[m + "_std"] = r.std(m)
            if r.variant.reported_as in REPORTED:
                rec["reported"] = REPORTED[r.variant.reported_as]
            out.append(json.dumps(rec, default=str))
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "ablation.txt").write_text(self.to_text())
        (out_dir / "ablation.jsonl").write_text(self.to_jsonl())
        for r in self.rows:
            slug = "".join(c if c.isalnum() else "_" for c in r.variant.name).strip("_")
            for i, rep in enumerate(r.reports):
                if rep.curve is not None:
                    rep.curve.write(out_dir / "roc" / f"{slug}_seed{i}.txt")
        return out_dir


def default_matrix() -> list[Variant]:
    """Rows of the ablation table, then the group-size sweep and the real-valued variant."""
    return [
        Variant("Baseline (frozen, Sum, sign)", {"pooling": "sum"}, trained=False, reported_as="EoA"),
        Variant("Sum-WMW", {"pooling": "sum", "loss": "wmw"}, reported_as="Sum-WMW"),
        Variant("GeM-WMW", {"pooling": "gem", "loss": "wmw"}, reported_as="GeM-WMW"),
        Variant("AggNet-WCE", {"pooling": "netvlad", "loss": "wce"}, reported_as="AggNet-WCE"),
        Variant("AggNet-WMW", {"pooling": "netvlad", "loss": "wmw"}, reported_as="AggNet-WMW"),
        Variant("AggNet-WMW n=2", {"pooling": "netvlad", "group_size": 2}),
        Variant("AggNet-WMW n=8", {"pooling": "netvlad", "group_size": 8}),
        Variant("AggNet-WMW real-valued", {"pooling": "netvlad", "hashing": False}),
    ]


def run_variant(variant: Variant, base: TrainConfig, data: DatasetSplit, settings: EvalSettings,
                seed: int) -> EvalReport:
    cfg = replace(base, **variant.overrides, seed=seed)
    if variant.trained:
        _, model = train(cfg, data)
    else:
        model = AggNet(cfg.model_config(data.dim), spawn_rngs(seed, ["init"])["init"]).eval()
    n = cfg.group_size
    groups = min(settings.groups_per_trial, len(data.test) // n)
    rng = spawn_rngs(settings.seed + seed, ["eval"])["eval"]
    pos, neg = collect_scores(model, data.test, groups, n, settings.trials, rng)
    return report_from_scores(pos, neg)


def run_ablation(matrix: list[Variant], base: TrainConfig, data_for_seed, seeds,
                 settings: EvalSettings = EvalSettings()) -> AblationTable:
    """Train and evaluate every variant for every seed.

    ``data_for_seed`` maps a seed to a DatasetSplit (or is a DatasetSplit used for all seeds).
    """
    rows = []
    for variant in matrix:
        reports = []
        for seed in seeds:
            data = data_for_seed(seed) if callable(data_for_seed) else data_for_seed
            reports.append(run_variant(variant, base, data, settings, seed))
        rows.append(AblationRow(variant, reports))
    return AblationTable(rows)
