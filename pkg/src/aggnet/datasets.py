"""Identity-labelled descriptor data: synthetic generator, embedding files, batch sampler."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, NotFoundError, SamplingError

SPLIT_TAGS = {"train": 0, "validation": 1, "test": 2}
_ID_ROW = struct.Struct("<IB")


@dataclass
class IdentityRecord:
    identity_id: int
    samples: np.ndarray  # [num_samples, d_in]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass
class DatasetSplit:
    train: list[IdentityRecord] = field(default_factory=list)
    validation: list[IdentityRecord] = field(default_factory=list)
    test: list[IdentityRecord] = field(default_factory=list)

    def parts(self):
        return (("train", self.train), ("validation", self.validation), ("test", self.test))

    @property
    def dim(self) -> int:
        for _, part in self.parts():
            if part:
                return part[0].dim
        raise ConfigError("empty dataset")

    def find(self, identity_id: int) -> IdentityRecord:
        for _, part in self.parts():
            for rec in part:
                if rec.identity_id == identity_id:
                    return rec
        raise NotFoundError(f"identity {identity_id} not in dataset")


@dataclass
class TrainBatch:
    """B groups of n identities; row ``g*n + i`` of ``queries`` belongs to group g."""

    enrolled: np.ndarray  # [B, n, d_in]
    queries: np.ndarray  # [B, n, d_in]
    identity_ids: np.ndarray  # [B, n]

    @property
    def group_count(self) -> int:
        return self.enrolled.shape[0]

    @property
    def group_size(self) -> int:
        return self.enrolled.shape[1]

    @property
    def group_of_query(self) -> np.ndarray:
        return np.repeat(np.arange(self.group_count), self.group_size)

    @property
    def labels(self) -> np.ndarray:
        """Boolean [B*n, B] matrix, True where the query belongs to the group."""
        return self.group_of_query[:, None] == np.arange(self.group_count)[None, :]


def _split_counts(num_identities: int) -> tuple[int, int, int]:
    n_train = int(round(0.8 * num_identities))
    n_val = int(round(0.1 * num_identities))
    return n_train, n_val, num_identities - n_train - n_val


def gen_synthetic(num_identities: int, samples_per_identity: int, d_in: int, class_sep: float,
                  noise_sigma: float, rng: np.random.Generator) -> DatasetSplit:
    """Gaussian clusters around latent directions, split 80/10/10 by identity.

    Identity j has a latent mean drawn uniformly on the sphere of radius
    ``class_sep``; each of its samples adds isotropic N(0, noise_sigma^2) noise.
    """
    if num_identities <= 0 or samples_per_identity <= 0 or d_in <= 0:
        raise ConfigError("num_identities, samples_per_identity and d_in must be positive")
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be >= 0")
    means = rng.standard_normal((num_identities, d_in))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= class_sep
    noise = rng.standard_normal((num_identities, samples_per_identity, d_in)) * noise_sigma
    data = means[:, None, :] + noise
    records = [IdentityRecord(j, data[j]) for j in range(num_identities)]
    n_train, n_val, _ = _split_counts(num_identities)
    return DatasetSplit(records[:n_train], records[n_train:n_train + n_val], records[n_train + n_val:])


# -- embedding files ---------------------------------------------------------------

def _parse_manifest(path: Path) -> dict[str, str]:
    raw = path.read_bytes()
    out: dict[str, str] = {}
    offset = 0
    for line in raw.split(b"\n"):
        text = line.decode("utf-8", errors="replace").strip()
        if text and not text.startswith("#"):
            if "=" not in text:
                raise FormatError(f"expected key=value, got {text!r}", offset, path)
            key, value = text.split("=", 1)
            key = key.strip()
            if key in out:
                raise FormatError(f"duplicate key {key!r}", offset, path)
            out[key] = value.strip()
        offset += len(line) + 1
    return out


def load_embeddings(manifest_path) -> DatasetSplit:
    """Read a manifest + float32 data file + (id, split) rows file.

    Identities keep the order of their first row. Every identity must carry a
    single split tag and train identities need at least two samples.
    """
    manifest_path = Path(manifest_path)
    meta = _parse_manifest(manifest_path)
    for key in ("dim", "count", "data_file", "ids_file"):
        if key not in meta:
            raise FormatError(f"manifest missing {key!r}", 0, manifest_path)
    try:
        dim, count = int(meta["dim"]), int(meta["count"])
    except ValueError as exc:
        raise FormatError(f"dim/count must be integers: {exc}", 0, manifest_path) from None
    if dim <= 0 or count < 0:
        raise FormatError("dim must be positive and count non-negative", 0, manifest_path)

    base = manifest_path.parent
    data_path = base / meta["data_file"]
    ids_path = base / meta["ids_file"]
    data_raw = data_path.read_bytes()
    ids_raw = ids_path.read_bytes()
    need = count * dim * 4
    if len(data_raw) != need:
        raise FormatError(f"data file holds {len(data_raw)} bytes, expected {need}",
                          min(len(data_raw), need), data_path)
    need = count * _ID_ROW.size
    if len(ids_raw) != need:
        raise FormatError(f"ids file holds {len(ids_raw)} bytes, expected {need}",
                          min(len(ids_raw), need), ids_path)

    data = np.frombuffer(data_raw, dtype="<f4").reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data.reshape(-1)))[0, 0])
        raise FormatError("non-finite value in data file", bad * 4, data_path)

    order: list[int] = []
    rows: dict[int, list[int]] = {}
    tag_of: dict[int, int] = {}
    for r, (ident, tag) in enumerate(_ID_ROW.iter_unpack(ids_raw)):
        if tag not in (0, 1, 2):
            raise FormatError(f"unknown split tag {tag}", r * _ID_ROW.size + 4, ids_path)
        if ident in tag_of and tag_of[ident] != tag:
            raise FormatError(f"identity {ident} appears in two splits", r * _ID_ROW.size, ids_path)
        if ident not in rows:
            order.append(ident)
            rows[ident] = []
            tag_of[ident] = tag
        rows[ident].append(r)

    split = DatasetSplit()
    parts = (split.train, split.validation, split.test)
    for ident in order:
        if tag_of[ident] == 0 and len(rows[ident]) < 2:
            raise FormatError(f"train identity {ident} has fewer than 2 samples",
                              rows[ident][0] * _ID_ROW.size, ids_path)
        parts[tag_of[ident]].append(IdentityRecord(ident, data[rows[ident]]))
    return split


def write_embeddings(split: DatasetSplit, manifest_path, data_file: str | None = None,
                     ids_file: str | None = None) -> Path:
    """Write ``split`` in the embedding-file format; inverse of load_embeddings."""
    manifest_path = Path(manifest_path)
    stem = manifest_path.stem
    data_file = data_file or f"{stem}.f32"
    ids_file = ids_file or f"{stem}.ids"
    dim = split.dim
    chunks, id_rows = [], bytearray()
    for name, part in split.parts():
        tag = SPLIT_TAGS[name]
        for rec in part:
            if rec.dim != dim:
                raise FormatError(f"identity {rec.identity_id} has dim {rec.dim}, expected {dim}")
            chunks.append(np.asarray(rec.samples, dtype="<f4"))
            for _ in range(len(rec.samples)):
                id_rows += _ID_ROW.pack(rec.identity_id, tag)
    data = np.concatenate(chunks) if chunks else np.zeros((0, dim), "<f4")
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    (manifest_path.parent / data_file).write_bytes(data.tobytes())
    (manifest_path.parent / ids_file).write_bytes(bytes(id_rows))
    manifest_path.write_text(f"dim={dim}\ncount={len(data)}\ndata_file={data_file}\nids_file={ids_file}\n")
    return manifest_path


# -- batch sampling ----------------------------------------------------------------

def sample_batch(records: list[IdentityRecord], B: int, n: int, rng: np.random.Generator) -> TrainBatch:
    """Draw B*n distinct identities and two distinct samples from each."""
    if B < 1 or n < 1:
        raise SamplingError("B and n must be positive")
    if len(records) < B * n:
        raise SamplingError(f"need {B * n} identities, split has {len(records)}")
    picked = rng.choice(len(records), size=B * n, replace=False)
    d_in = records[0].dim
    enrolled = np.empty((B * n, d_in))
    queries = np.empty((B * n, d_in))
    ids = np.empty(B * n, dtype=np.int64)
    for slot, r in enumerate(picked):
        rec = records[r]
        if len(rec.samples) < 2:
            raise SamplingError(f"identity {rec.identity_id} has fewer than 2 samples")
        e, q = rng.choice(len(rec.samples), size=2, replace=False)
        enrolled[slot] = rec.samples[e]
        queries[slot] = rec.samples[q]
        ids[slot] = rec.identity_id
    return TrainBatch(enrolled.reshape(B, n, d_in), queries.reshape(B, n, d_in), ids.reshape(B, n))


def epoch_length(num_identities: int, B: int, n: int) -> int:
    return num_identities // (B * n)
