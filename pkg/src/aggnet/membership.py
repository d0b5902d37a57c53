"""Group enrollment and membership verification.

A :class:`GroupStore` keeps one code per group and nothing else by default.
Raw member samples are kept only with ``retain_samples=True``. Retention is
what makes membership changes possible without the original templates, but it
also means the server holds raw templates, which weakens the protection that
aggregation and binarization otherwise give.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, unquote

import numpy as np

from .errors import CapabilityError, ConflictError, DimensionError, FormatError, NotFoundError

STORE_FORMAT = "aggnet-store/1"


@dataclass(frozen=True)
class VerifyDecision:
    score: float
    threshold: float
    accept: bool


@dataclass
class GroupEntry:
    code: np.ndarray
    member_count: int
    handles: list[str] | None = None
    samples: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


class GroupStore:
    """Single-writer / multi-reader map from group id to group code."""

    def __init__(self, dim: int, hashing: bool = True, retain_samples: bool = False):
        self.dim = int(dim)
        self.hashing = bool(hashing)
        self.retain_samples = bool(retain_samples)
        self._groups: dict[str, GroupEntry] = {}
        self._write_lock = threading.Lock()

    @classmethod
    def for_model(cls, model, retain_samples: bool = False) -> "GroupStore":
        return cls(model.config.d, model.hashing.enabled, retain_samples)

    def __contains__(self, group_id) -> bool:
        return group_id in self._groups

    def __len__(self) -> int:
        return len(self._groups)

    @property
    def group_ids(self) -> list[str]:
        return list(self._groups)

    def code(self, group_id: str) -> np.ndarray:
        try:
            return self._groups[group_id].code.copy()
        except KeyError:
            raise NotFoundError(f"group {group_id!r} not found") from None

    def entry(self, group_id: str) -> GroupEntry:
        try:
            return self._groups[group_id]
        except KeyError:
            raise NotFoundError(f"group {group_id!r} not found") from None

    def _check_model(self, model):
        if model.config.d != self.dim or model.hashing.enabled != self.hashing:
            raise DimensionError(
                f"model (d={model.config.d}, hashing={model.hashing.enabled}) does not match "
                f"store (d={self.dim}, hashing={self.hashing})")

    # -- writes --------------------------------------------------------------------
    def enroll(self, group_id: str, member_samples, model, handles=None, meta=None) -> np.ndarray:
        self._check_model(model)
        samples = np.atleast_2d(np.asarray(member_samples, dtype=np.float64))
        if len(samples) < 1:
            raise DimensionError("a group needs at least one member")
        if handles is None:
            handles = [str(i) for i in range(len(samples))]
        handles = [str(h) for h in handles]
        if len(handles) != len(samples) or len(set(handles)) != len(handles):
            raise ValueError("need one distinct handle per member sample")
        code = model.group_embed(samples)
        with self._write_lock:
            if group_id in self._groups:
                raise ConflictError(f"group {group_id!r} already enrolled")
            self._groups[group_id] = GroupEntry(
                code=code, member_count=len(samples),
                handles=handles if self.retain_samples else None,
                samples=samples.copy() if self.retain_samples else None,
                meta=dict(meta or {}),
            )
        return code.copy()

    def update_group(self, group_id: str, model, add=None, add_handles=None, remove=()) -> np.ndarray:
        """Re-aggregate the group from its retained samples after adding/removing members.

        Model parameters are never touched.
        """
        self._check_model(model)
        with self._write_lock:
            entry = self.entry(group_id)
            if entry.samples is None:
                raise CapabilityError("store does not retain member samples; cannot update groups")
            handles = list(entry.handles)
            samples = entry.samples
            keep = np.ones(len(handles), dtype=bool)
            for h in remove:
                if h not in handles:
                    raise NotFoundError(f"group {group_id!r} has no member {h!r}")
                keep[handles.index(h)] = False
            handles = [h for h, k in zip(handles, keep) if k]
            samples = samples[keep]
            if add is not None:
                add = np.atleast_2d(np.asarray(add, dtype=np.float64))
                if add_handles is None:
                    start = len(entry.handles)
                    add_handles = [f"m{start + i}" for i in range(len(add))]
                add_handles = [str(h) for h in add_handles]
                if len(add_handles) != len(add) or set(add_handles) & set(handles):
                    raise ValueError("added members need distinct, unused handles")
                handles += add_handles
                samples = np.concatenate([samples, add]) if len(samples) else add
            if len(handles) == 0:
                raise ValueError(f"update would leave group {group_id!r} empty")
            code = model.group_embed(samples)
            self._groups[group_id] = GroupEntry(code, len(handles), handles, samples.copy(), entry.meta)
        return code.copy()

    def remove_group(self, group_id: str) -> None:
        with self._write_lock:
            if self._groups.pop(group_id, None) is None:
                raise NotFoundError(f"group {group_id!r} not found")

    # -- reads ---------------------------------------------------------------------
    def verify(self, group_id: str, query_sample, model, threshold: float = 0.5) -> VerifyDecision:
        """Score a fresh query against the claimed group only; accept iff score > threshold."""
        self._check_model(model)
        g = self.code(group_id)
        q = model.query_embed(query_sample)
        s = float(model.scorer.score(g, q))
        return VerifyDecision(s, float(threshold), s > threshold)

    # -- persistence ---------------------------------------------------------------
    def save(self, path) -> Path:
        """Text manifest; codes are hex of packed bits (+1 -> 1) or of float64 values."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            f"format={STORE_FORMAT}",
            f"dim={self.dim}",
            f"count={len(self._groups)}",
            f"hashing={'on' if self.hashing else 'off'}",
            f"retain={'on' if self.retain_samples else 'off'}",
        ]
        blob = bytearray()
        for gid, e in self._groups.items():
            rec = [f"group={quote(gid, safe='')}", f"members={e.member_count}", f"code={encode_code(e.code, self.hashing)}"]
            if e.samples is not None:
                rec.append("handles=" + ",".join(quote(h, safe="") for h in e.handles))
                rec.append(f"samples={len(blob)}:{e.samples.shape[0]}x{e.samples.shape[1]}")
                blob += np.ascontiguousarray(e.samples, dtype="<f8").tobytes()
            lines.append(" ".join(rec))
        if self.retain_samples:
            (path.parent / (path.name + ".samples")).write_bytes(bytes(blob))
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "GroupStore":
        path = Path(path)
        raw = path.read_bytes()
        header: dict[str, str] = {}
        records: list[tuple[int, str]] = []
        offset = 0
        for line in raw.split(b"\n"):
            text = line.decode("utf-8").strip()
            if text.startswith("group="):
                records.append((offset, text))
            elif text:
                if "=" not in text:
                    raise FormatError(f"expected key=value, got {text!r}", offset, path)
                k, v = text.split("=", 1)
                header[k] = v
            offset += len(line) + 1
        if header.get("format") != STORE_FORMAT:
            raise FormatError(f"not a group store (format={header.get('format')!r})", 0, path)
        try:
            store = cls(int(header["dim"]), header["hashing"] == "on", header.get("retain") == "on")
            count = int(header["count"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad store header: {exc}", 0, path) from None
        if count != len(records):
            raise FormatError(f"header announces {count} groups, found {len(records)}", offset, path)
        blob = None
        if store.retain_samples:
            blob = (path.parent / (path.name + ".samples")).read_bytes()
        for off, text in records:
            fields = dict(tok.split("=", 1) for tok in text.split())
            try:
                gid = unquote(fields["group"])
                code = decode_code(fields["code"], store.dim, store.hashing)
                entry = GroupEntry(code, int(fields["members"]))
            except (KeyError, ValueError) as exc:
                raise FormatError(f"bad group record: {exc}", off, path) from None
            if "samples" in fields and blob is not None:
                start, shape = fields["samples"].split(":")
                rows, cols = (int(x) for x in shape.split("x"))
                start = int(start)
                data = blob[start:start + rows * cols * 8]
                if len(data) != rows * cols * 8:
                    raise FormatError("samples file too short", len(blob), path.parent / (path.name + ".samples"))
                entry.samples = np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()
                entry.handles = [unquote(h) for h in fields["handles"].split(",")]
            if gid in store._groups:
                raise FormatError(f"duplicate group {gid!r}", off, path)
            store._groups[gid] = entry
        return store


def encode_code(code: np.ndarray, hashing: bool) -> str:
    if hashing:
        return np.packbits(np.asarray(code) > 0).tobytes().hex()
    return np.ascontiguousarray(code, dtype="<f8").tobytes().hex()


def decode_code(text: str, dim: int, hashing: bool) -> np.ndarray:
    raw = bytes.fromhex(text)
    if hashing:
        if len(raw) != (dim + 7) // 8:
            raise ValueError(f"code has {len(raw)} bytes, expected {(dim + 7) // 8}")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:dim]
        return np.where(bits == 1, 1.0, -1.0)
    if len(raw) != 8 * dim:
        raise ValueError(f"code has {len(raw)} bytes, expected {8 * dim}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)
