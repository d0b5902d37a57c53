"""Command-line interface: gen | train | enroll | verify | eval | ablate.

Settings are resolved as flags > ``--config`` file (flat key=value lines) > defaults.
``verify`` exits 0 on accept, 1 on reject; any error exits 2.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import EvalSettings, default_matrix, run_ablation
from .datasets import DatasetSplit, gen_synthetic, load_embeddings, write_embeddings
from .errors import AggNetError
from .evaluation import run_eval
from .membership import GroupStore
from .model import load_checkpoint, save_checkpoint
from .numcore import make_rng, spawn_rngs
from .trainer import TrainConfig, train

log = logging.getLogger("aggnet")

GEN_DEFAULTS = {"identities": 640, "samples": 6, "d_in": 64, "class_sep": 3.0, "noise_sigma": 0.3}
EVAL_DEFAULTS = {"groups_per_trial": 64, "group_size": 4, "trials": 50, "split": "test", "threshold": 0.5}


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise AggNetError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(value, like):
    if isinstance(value, str):
        if isinstance(like, bool):
            return value.lower() in ("1", "true", "on", "yes")
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, tuple):
            return tuple(int(x) for x in value.split(",") if x.strip())
    return value


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults, config-file values and explicitly given flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            if k in merged:
                merged[k] = _coerce(v, merged[k])
    for k, v in vars(args).items():
        if k in merged and v is not None:
            merged[k] = _coerce(v, merged[k])
    return merged


def train_config(args) -> TrainConfig:
    base = TrainConfig()
    defaults = {f.name: getattr(base, f.name) for f in fields(TrainConfig)}
    values = resolve(args, defaults)
    return TrainConfig(**values)


def _load_data(path) -> DatasetSplit:
    return load_embeddings(path)


# -- subcommands -------------------------------------------------------------------

def cmd_gen(args) -> int:
    v = resolve(args, {**GEN_DEFAULTS, "seed": 0})
    data = gen_synthetic(v["identities"], v["samples"], v["d_in"], v["class_sep"], v["noise_sigma"],
                         make_rng(v["seed"]))
    out = Path(args.out or "data/synthetic.txt")
    write_embeddings(data, out)
    print(f"wrote {out} ({len(data.train)}/{len(data.validation)}/{len(data.test)} identities)")
    return 0


def cmd_train(args) -> int:
    cfg = train_config(args)
    data = _load_data(args.data)
    report, model = train(cfg, data)
    out = Path(args.out or "run")
    save_checkpoint(model, out / "model.ckpt")
    report.write(out / "train_report.jsonl")
    print(f"wrote {out / 'model.ckpt'} (best epoch {report.best_epoch}, val AUC {report.best_val_auc})")
    return 0


def parse_group_manifest(path) -> list[tuple[str, list[tuple[int, int]]]]:
    """Lines ``group_id: ident[:sample] ident[:sample] ...``; sample index defaults to 0."""
    groups = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise AggNetError(f"{path}:{lineno}: expected 'group_id: member ...'")
        gid, rest = line.split(":", 1)
        members = []
        for tok in rest.split():
            ident, _, sample = tok.partition(":")
            members.append((int(ident), int(sample or 0)))
        if not members:
            raise AggNetError(f"{path}:{lineno}: group {gid.strip()!r} has no members")
        groups.append((gid.strip(), members))
    return groups


def cmd_enroll(args) -> int:
    model = load_checkpoint(args.model)
    data = _load_data(args.data)
    store_path = Path(args.store or "store.txt")
    store = GroupStore.load(store_path) if store_path.exists() else GroupStore.for_model(model, args.retain_samples)
    for gid, members in parse_group_manifest(args.groups):
        samples = np.stack([data.find(i).samples[k] for i, k in members])
        store.enroll(gid, samples, model, handles=[f"{i}:{k}" for i, k in members])
    store.save(store_path)
    print(f"wrote {store_path} ({len(store)} groups)")
    return 0


def _query_vector(args) -> np.ndarray:
    if args.vector:
        return np.array([float(x) for x in args.vector.split(",")])
    if args.data is None or args.identity is None:
        raise AggNetError("verify needs --vector or --data with --identity")
    return _load_data(args.data).find(args.identity).samples[args.sample]


def cmd_verify(args) -> int:
    v = resolve(args, {"threshold": 0.5})
    model = load_checkpoint(args.model)
    store = GroupStore.load(args.store)
    decision = store.verify(args.group, _query_vector(args), model, v["threshold"])
    verdict = "accept" if decision.accept else "reject"
    print(f"score={decision.score:.6f} threshold={decision.threshold:g} {verdict}")
    return 0 if decision.accept else 1


def cmd_eval(args) -> int:
    v = resolve(args, {**EVAL_DEFAULTS, "seed": 0})
    model = load_checkpoint(args.model)
    data = _load_data(args.data)
    records = getattr(data, v["split"])
    groups = min(v["groups_per_trial"], len(records) // v["group_size"])
    report = run_eval(model, records, groups, v["group_size"], v["trials"], make_rng(v["seed"]))
    out = Path(args.out or "eval")
    out.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{k:<16}{val}\n" for k, val in report.as_dict().items())
    (out / "report.txt").write_text(text)
    (out / "report.jsonl").write_text(report.to_json() + "\n")
    report.curve.write(out / "roc.txt")
    sys.stdout.write(text)
    return 0


def cmd_ablate(args) -> int:
    base = train_config(args)
    v = resolve(args, {**GEN_DEFAULTS, **EVAL_DEFAULTS, "seeds": 3})
    if args.data:
        data = _load_data(args.data)
        data_for_seed = data
    else:
        def data_for_seed(seed):
            rng = spawn_rngs(seed, ["data"])["data"]
            return gen_synthetic(v["identities"], v["samples"], v["d_in"], v["class_sep"], v["noise_sigma"], rng)
    settings = EvalSettings(v["groups_per_trial"], v["trials"], base.seed)
    seeds = [base.seed + i for i in range(v["seeds"])]
    table = run_ablation(default_matrix(), base, data_for_seed, seeds, settings)
    out = table.write(Path(args.out or "ablation"))
    sys.stdout.write(table.to_text())
    print(f"wrote {out}")
    return 0


# -- parser ------------------------------------------------------------------------

def _add_train_flags(p):
    g = p.add_argument_group("training (mirrors TrainConfig)")
    g.add_argument("--lr", type=float, help="learning rate (default 0.001)")
    g.add_argument("--momentum", type=float, help="SGD momentum (default 0.9)")
    g.add_argument("--weight-decay", dest="weight_decay", type=float, help="L2 weight decay (default 0.001)")
    g.add_argument("--batch-size", dest="batch_size", type=int, help="groups per batch B (default 64)")
    g.add_argument("--group-size", dest="group_size", type=int, help="members per group n (default 4)")
    g.add_argument("--max-epochs", dest="max_epochs", type=int, help="epochs (default 30)")
    g.add_argument("--plateau-patience", dest="plateau_patience", type=int,
                   help="epochs without validation improvement before the lr drops (default 3)")
    g.add_argument("--lr-factor", dest="lr_factor", type=float, help="lr multiplier on plateau (default 0.1)")
    g.add_argument("--loss", choices=("wmw", "wce"), help="training objective (default wmw)")
    g.add_argument("--pooling", choices=("netvlad", "gem", "sum"), help="aggregation (default netvlad)")
    g.add_argument("--hashing", choices=("on", "off"), help="binarize codes (default on)")
    g.add_argument("--d", type=int, help="descriptor / code dimension (default 128)")
    g.add_argument("--hidden", help="comma-separated hidden widths of the feature net (default 128)")
    g.add_argument("--K", type=int, help="NetVLAD clusters (default 8)")
    g.add_argument("--alpha", type=float, help="NetVLAD initial assignment sharpness (default 10)")
    g.add_argument("--penalty-weight", dest="penalty_weight", type=float, help="hash penalty weight (default 0.1)")
    g.add_argument("--penalty-exponent", dest="penalty_exponent", type=float, help="hash penalty exponent (default 3)")
    g.add_argument("--wmw-margin", dest="wmw_margin", type=float, help="WMW margin gamma (default 0.3)")
    g.add_argument("--wmw-exponent", dest="wmw_exponent", type=float, help="WMW exponent p (default 2)")
    g.add_argument("--val-batches", dest="val_batches", type=int, help="validation batches per epoch (default 4)")


def _add_gen_flags(p):
    p.add_argument("--identities", type=int, help="number of identities (default 640)")
    p.add_argument("--samples", type=int, help="samples per identity (default 6)")
    p.add_argument("--d-in", dest="d_in", type=int, help="raw feature dimension (default 64)")
    p.add_argument("--class-sep", dest="class_sep", type=float, help="latent mean norm (default 3.0)")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, help="per-coordinate noise std (default 0.3)")


def _add_eval_flags(p):
    p.add_argument("--groups-per-trial", dest="groups_per_trial", type=int, help="groups per trial (default 64)")
    p.add_argument("--group-size", dest="group_size", type=int, help="members per group (default 4)")
    p.add_argument("--trials", type=int, help="number of trials (default 50)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggnet", description="Group membership verification with learned aggregation.")
    parser.add_argument("--version", action="version", version=f"aggnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="master random seed (default 0)")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("gen", help="generate a synthetic embedding dataset")
    common(p)
    _add_gen_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--data", required=True, help="embedding manifest")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enroll", help="enroll groups into a store")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint manifest")
    p.add_argument("--data", required=True, help="embedding manifest holding the member samples")
    p.add_argument("--groups", required=True, help="group manifest: 'group_id: ident[:sample] ...' per line")
    p.add_argument("--store", help="store file to create or extend (default store.txt)")
    p.add_argument("--retain-samples", dest="retain_samples", action="store_true",
                   help="keep raw member samples so groups can be updated later")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="verify a claimed membership; exit 0 accept, 1 reject")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint manifest")
    p.add_argument("--store", required=True, help="group store file")
    p.add_argument("--group", required=True, help="claimed group id")
    p.add_argument("--data", help="embedding manifest to take the query from")
    p.add_argument("--identity", type=int, help="query identity id in --data")
    p.add_argument("--sample", type=int, default=0, help="query sample index (default 0)")
    p.add_argument("--vector", help="query as comma-separated raw features")
    p.add_argument("--threshold", type=float, help="accept iff score > threshold (default 0.5)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="evaluate a model on held-out identities")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint manifest")
    p.add_argument("--data", required=True, help="embedding manifest")
    p.add_argument("--split", choices=("train", "validation", "test"), help="split to evaluate (default test)")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation matrix")
    common(p)
    p.add_argument("--data", help="embedding manifest (default: synthetic data per seed)")
    p.add_argument("--seeds", type=int, help="seeds per variant (default 3)")
    _add_gen_flags(p)
    _add_train_flags(p)
    p.add_argument("--groups-per-trial", dest="groups_per_trial", type=int, help="groups per trial (default 64)")
    p.add_argument("--trials", type=int, help="number of trials (default 50)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "hashing", None) is not None:
        args.hashing = args.hashing == "on"
    try:
        return args.func(args)
    except (AggNetError, OSError, ValueError, KeyError) as exc:
        print(f"aggnet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
