"""Append-only event log, full-state snapshots and deterministic replay.

Log framing, repeated per entry::

    [u32 LE payload length][payload: JSON {"seq": n, "record": {...}}][u32 LE CRC32(payload)]

Records are either feed records (``fast_exit`` / ``head``) or AVS records
(``operator``, ``task``, ``round``).  Replaying the log from genesis, or
from a snapshot plus the entries after it, yields identical state.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from . import avs
from .avs import AvsParams, Strategy, World
from .errors import ChecksumMismatch, CorruptLog, IoFailure, ParamsMismatch
from .ingestion import FAST_EXIT, record_from_obj
from .scoring import ChainState, ScoringParams, advance_head, apply_event

_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class LogEntry:
    seq: int
    record: dict
    checksum: int


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_frame(seq: int, record: dict) -> tuple[bytes, int]:
    payload = _canonical({"seq": seq, "record": record})
    crc = zlib.crc32(payload)
    return _U32.pack(len(payload)) + payload + _U32.pack(crc), crc


def iter_frames(data: bytes) -> Iterator[LogEntry]:
    offset = 0
    expected = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise CorruptLog(f"truncated length prefix at byte {offset}")
        (length,) = _U32.unpack_from(data, offset)
        end = offset + 4 + length
        if end + 4 > len(data):
            raise CorruptLog(f"truncated entry at byte {offset}")
        payload = data[offset + 4 : end]
        (crc,) = _U32.unpack_from(data, end)
        if zlib.crc32(payload) != crc:
            raise ChecksumMismatch(expected, offset)
        try:
            body = json.loads(payload)
            seq, record = body["seq"], body["record"]
        except (ValueError, KeyError, TypeError):
            raise CorruptLog(f"undecodable entry at byte {offset}") from None
        if seq != expected:
            raise CorruptLog(f"sequence gap: expected {expected}, found {seq}")
        yield LogEntry(seq, record, crc)
        expected += 1
        offset = end + 4


class EventLog:
    """Single-writer append-only log file."""

    def __init__(self, path):
        self.path = Path(path)
        self._next_seq = sum(1 for _ in self.entries()) if self.path.exists() else 0

    def __len__(self) -> int:
        return self._next_seq

    def entries(self) -> Iterator[LogEntry]:
        if not self.path.exists():
            return iter(())
        try:
            data = self.path.read_bytes()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return iter_frames(data)

    def append(self, record: dict) -> LogEntry:
        return self.append_many([record])[-1]

    def append_many(self, records: Iterable[dict]) -> list[LogEntry]:
        """Append records; all are fsynced before this returns."""
        out = []
        chunks = []
        seq = self._next_seq
        for rec in records:
            frame, crc = encode_frame(seq, rec)
            chunks.append(frame)
            out.append(LogEntry(seq, rec, crc))
            seq += 1
        try:
            with open(self.path, "ab") as fh:
                fh.write(b"".join(chunks))
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._next_seq = seq
        return out

    def truncate(self) -> None:
        try:
            with open(self.path, "wb") as fh:
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._next_seq = 0


def params_hash(scoring: ScoringParams, avs_params: AvsParams) -> str:
    doc = {"scoring": scoring.to_dict(), "avs": avs_params.to_dict()}
    # repr gives the shortest round-trip form of every float
    text = json.dumps(doc, sort_keys=True, default=repr, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def apply_record(
    state: ChainState,
    world: World,
    record: dict,
    scoring: ScoringParams,
    avs_params: AvsParams,
):
    """Fold one log record into (state, world).  Returns the round result, if any."""
    kind = record.get("type")
    if kind in (FAST_EXIT, "head"):
        rec = record_from_obj(record)
        if rec.kind == FAST_EXIT:
            apply_event(state, rec.payload, scoring)
        else:
            advance_head(state, rec.payload.l2_block)
        return None
    if kind == "operator":
        avs.register_operator(
            world, record["id"], int(record["stake"]), Strategy.parse(record["strategy"]), avs_params
        )
        return None
    if kind == "task":
        avs.create_task(world, record["l2_block"], state.head)
        return None
    if kind == "round":
        _, result = avs.run_round(world, state, record["l2_block"], avs_params, scoring)
        return result
    raise CorruptLog(f"unknown record type {kind!r}")


@dataclass
class Snapshot:
    # number of log entries folded into this state
    as_of_seq: int
    chain_state: dict
    avs_state: dict
    params_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "as_of_seq": self.as_of_seq,
                "chain_state": self.chain_state,
                "avs_state": self.avs_state,
                "params_hash": self.params_hash,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Snapshot":
        d = json.loads(text)
        return cls(d["as_of_seq"], d["chain_state"], d["avs_state"], d["params_hash"])

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(self.to_json())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Snapshot":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def snapshot(
    state: ChainState,
    world: World,
    as_of_seq: int,
    scoring: ScoringParams,
    avs_params: AvsParams,
) -> Snapshot:
    return Snapshot(as_of_seq, state.to_dict(), world.to_dict(), params_hash(scoring, avs_params))


def replay(
    entries: Iterable[LogEntry],
    from_snapshot: Optional[Snapshot],
    scoring: ScoringParams,
    avs_params: AvsParams,
) -> tuple[ChainState, World, int]:
    """Fold log entries into fresh state.  Returns (state, world, entries folded)."""
    if from_snapshot is not None:
        if from_snapshot.params_hash != params_hash(scoring, avs_params):
            raise ParamsMismatch("snapshot was taken under different parameters")
        state = ChainState.from_dict(from_snapshot.chain_state)
        world = World.from_dict(from_snapshot.avs_state)
        start = from_snapshot.as_of_seq
    else:
        state, world, start = ChainState(), World.genesis(avs_params), 0
    n = start
    for entry in entries:
        if entry.seq < start:
            continue
        if entry.seq != n:
            raise CorruptLog(f"sequence gap: expected {n}, found {entry.seq}")
        apply_record(state, world, entry.record, scoring, avs_params)
        n += 1
    return state, world, n
