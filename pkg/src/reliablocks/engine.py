"""Replayed state plus the log it came from, shared by the CLI and the service."""
from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Iterable, Optional

from . import avs
from .avs import AvsParams, World
from .config import Config
from .errors import ParamsMismatch
from .scoring import (
    BlockReliability,
    ChainState,
    ScoringParams,
    interest_rate,
    query_block,
    query_range,
)
from .store import EventLog, Snapshot, apply_record, replay, snapshot

log = logging.getLogger(__name__)

RANGE_CAP = 10_000


def score_payload(rec: BlockReliability, params: ScoringParams) -> dict:
    return {
        "l2_block": rec.l2_block,
        "score": rec.score,
        "interest_rate": interest_rate(rec.score, params),
        "cumulative_value_base_units": str(rec.cumulative_value_base_units),
        "exit_count": rec.exit_count,
        "depth": rec.depth,
        "finalized": rec.finalized,
    }


def operator_payload(op: avs.Operator) -> dict:
    return {
        "id": op.id,
        "stake": str(op.stake),
        "active": op.active,
        "slashed_total": str(op.slashed_total),
        "rewards_total": str(op.rewards_total),
        "strategy": str(op.strategy),
    }


class Engine:
    """Single-writer state machine over an optional on-disk log."""

    def __init__(
        self,
        scoring: ScoringParams,
        avs_params: AvsParams,
        event_log: Optional[EventLog] = None,
        snapshot_path: Optional[Path] = None,
    ):
        self.scoring = scoring
        self.avs_params = avs_params
        self.log = event_log
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.state = ChainState()
        self.world = World.genesis(avs_params)
        self.seq = 0
        self._lock = threading.RLock()

    @classmethod
    def from_config(cls, config: Config) -> "Engine":
        eng = cls(
            config.scoring,
            config.avs,
            EventLog(config.paths.log),
            config.paths.snapshot_path,
        )
        eng.load()
        return eng

    def load(self) -> None:
        """Rebuild state from the log, starting at the snapshot when it is usable."""
        snap = None
        if self.snapshot_path is not None and self.snapshot_path.exists():
            snap = Snapshot.load(self.snapshot_path)
            if self.log is not None and snap.as_of_seq > len(self.log):
                log.warning("snapshot is ahead of the log; replaying from genesis")
                snap = None
        entries = self.log.entries() if self.log is not None else ()
        try:
            self.state, self.world, self.seq = replay(entries, snap, self.scoring, self.avs_params)
        except ParamsMismatch:
            log.info("snapshot parameters differ from config; replaying from genesis")
            entries = self.log.entries() if self.log is not None else ()
            self.state, self.world, self.seq = replay(entries, None, self.scoring, self.avs_params)

    def reset(self) -> None:
        with self._lock:
            if self.log is not None:
                self.log.truncate()
            if self.snapshot_path is not None and self.snapshot_path.exists():
                self.snapshot_path.unlink()
            self.state = ChainState()
            self.world = World.genesis(self.avs_params)
            self.seq = 0

    def apply(self, records: Iterable[dict]) -> list:
        """Fold records into state and append them to the log.

        Records are applied before they are written, so a record that fails
        never reaches the log.
        """
        with self._lock:
            results = []
            applied = []
            try:
                for rec in records:
                    results.append(
                        apply_record(self.state, self.world, rec, self.scoring, self.avs_params)
                    )
                    applied.append(rec)
                    self.seq += 1
            finally:
                if self.log is not None and applied:
                    self.log.append_many(applied)
            return results

    def save_snapshot(self) -> Optional[Snapshot]:
        with self._lock:
            snap = snapshot(self.state, self.world, self.seq, self.scoring, self.avs_params)
            if self.snapshot_path is not None:
                snap.save(self.snapshot_path)
            return snap

    # read side

    def score(self, l2_block: int) -> dict:
        with self._lock:
            return score_payload(query_block(self.state, l2_block, self.scoring), self.scoring)

    def scores(self, lo: int, hi: int) -> list[dict]:
        with self._lock:
            return [score_payload(r, self.scoring) for r in query_range(self.state, lo, hi, self.scoring)]

    def create_task(self, l2_block: int) -> dict:
        with self._lock:
            self.apply([{"type": "task", "l2_block": l2_block}])
            task = self.world.tasks[f"task-{self.world.task_counter - 1}"]
            return task.to_dict()

    def get_task(self, task_id: str) -> dict:
        with self._lock:
            return avs.get_task(self.world, task_id).to_dict()

    def operators(self) -> list[dict]:
        with self._lock:
            return [operator_payload(self.world.operators[k]) for k in sorted(self.world.operators)]

    def health(self) -> dict:
        with self._lock:
            return {"status": "ok", "head": self.state.head, "events": self.seq}
