"""Per-block reliability scores and the interest rates derived from them.

A fast exit paid against L2 block ``b`` vouches for ``b`` and every block
below it, so the value attesting a block is the sum over all exits at
heights ``>= b``.  That value, together with the block's depth below the
head, saturates exponentially into a 0..100 score.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    BlockBeyondHead,
    DuplicateEventId,
    HeadRegression,
    MalformedEvent,
    ScoreOutOfRange,
)

WEI_PER_TOKEN = 10**18

# 7 days of 2-second L2 blocks
DEFAULT_FINALITY_DEPTH = 7 * 24 * 3600 // 2


@dataclass(frozen=True)
class ScoringParams:
    kappa_value: float = 1000.0
    kappa_depth: Optional[float] = None  # None -> finality_depth / 5
    rate_min: float = 0.01
    rate_max: float = 0.03
    finality_depth: int = DEFAULT_FINALITY_DEPTH
    score_decimals: int = 3

    def __post_init__(self):
        if isinstance(self.finality_depth, bool) or not isinstance(self.finality_depth, int):
            raise ValueError("finality_depth must be an integer")
        if self.finality_depth < 1:
            raise ValueError("finality_depth must be >= 1")
        if not self.kappa_value > 0 or not self.depth_scale > 0:
            raise ValueError("kappa_value and kappa_depth must be positive")
        if not 0 < self.rate_min < self.rate_max < 1:
            raise ValueError("need 0 < rate_min < rate_max < 1")
        if not isinstance(self.score_decimals, int) or not 0 <= self.score_decimals <= 12:
            raise ValueError("score_decimals must be a small non-negative integer")

    @property
    def depth_scale(self) -> float:
        return self.finality_depth / 5 if self.kappa_depth is None else self.kappa_depth

    @property
    def rate_decimals(self) -> int:
        # rate is affine in score/100 with a 2-decimal slope, so this is exact
        return self.score_decimals + 4

    def to_dict(self) -> dict:
        return {
            "kappa_value": self.kappa_value,
            "kappa_depth": self.depth_scale,
            "rate_min": self.rate_min,
            "rate_max": self.rate_max,
            "finality_depth": self.finality_depth,
            "score_decimals": self.score_decimals,
        }


@dataclass(frozen=True)
class FastExitEvent:
    id: str
    l2_block: int
    provider: str
    value_base_units: int
    l1_block: int = 0
    ts: int = 0


@dataclass(frozen=True)
class BlockReliability:
    l2_block: int
    cumulative_value_base_units: int
    exit_count: int
    depth: int
    score: float
    finalized: bool


def _is_uint(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 0


def check_event(event: FastExitEvent) -> None:
    if not isinstance(event.id, str) or not event.id:
        raise MalformedEvent("event id must be a non-empty string")
    if not isinstance(event.provider, str):
        raise MalformedEvent(f"{event.id}: provider must be a string")
    for name in ("l2_block", "value_base_units", "l1_block", "ts"):
        if not _is_uint(getattr(event, name)):
            raise MalformedEvent(f"{event.id}: {name} must be a non-negative integer")


@dataclass
class ChainState:
    """Accumulated view of the rollup.

    Only the value and count landing directly on each block are stored;
    cumulative (inherited) figures are suffix sums computed on demand.
    """

    head: int = 0
    event_count: int = 0
    # l2_block -> [value_base_units, exit_count] of exits landing on that block
    exits: dict[int, list[int]] = field(default_factory=dict)
    seen_ids: set[str] = field(default_factory=set)
    _suffix: Optional[tuple[list[int], list[int], list[int]]] = field(
        default=None, init=False, repr=False, compare=False
    )

    def _suffix_sums(self):
        if self._suffix is None:
            keys = sorted(self.exits)
            vals = [0] * (len(keys) + 1)
            counts = [0] * (len(keys) + 1)
            for i in range(len(keys) - 1, -1, -1):
                v, c = self.exits[keys[i]]
                vals[i] = vals[i + 1] + v
                counts[i] = counts[i + 1] + c
            self._suffix = (keys, vals, counts)
        return self._suffix

    def attested(self, l2_block: int) -> tuple[int, int]:
        """(cumulative value, exit count) of all exits at heights >= l2_block."""
        keys, vals, counts = self._suffix_sums()
        i = bisect_left(keys, l2_block)
        return vals[i], counts[i]

    def sweep(self, lo: int, hi: int):
        """Yield (block, cumulative value, exit count) for lo..hi in one pass."""
        keys, vals, counts = self._suffix_sums()
        i = bisect_left(keys, lo)
        for b in range(lo, hi + 1):
            while i < len(keys) and keys[i] < b:
                i += 1
            yield b, vals[i], counts[i]

    def tracked_blocks(self, params: ScoringParams) -> dict[int, BlockReliability]:
        """Records for every block that at least one exit landed on."""
        return {b: query_block(self, b, params) for b in sorted(self.exits)}

    def copy(self) -> "ChainState":
        return ChainState(
            head=self.head,
            event_count=self.event_count,
            exits={b: list(vc) for b, vc in self.exits.items()},
            seen_ids=set(self.seen_ids),
        )

    def to_dict(self) -> dict:
        return {
            "head": self.head,
            "event_count": self.event_count,
            "exits": [[b, str(v), c] for b, (v, c) in sorted(self.exits.items())],
            "seen_ids": sorted(self.seen_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainState":
        return cls(
            head=int(d["head"]),
            event_count=int(d["event_count"]),
            exits={int(b): [int(v), int(c)] for b, v, c in d["exits"]},
            seen_ids=set(d["seen_ids"]),
        )


def apply_event(state: ChainState, event: FastExitEvent, params: ScoringParams) -> ChainState:
    """Record one fast exit.  Mutates and returns ``state``."""
    check_event(event)
    if event.id in state.seen_ids:
        raise DuplicateEventId(event.id)
    state.seen_ids.add(event.id)
    slot = state.exits.setdefault(event.l2_block, [0, 0])
    slot[0] += event.value_base_units
    slot[1] += 1
    state._suffix = None
    state.head = max(state.head, event.l2_block)
    state.event_count += 1
    return state


def advance_head(state: ChainState, new_head: int) -> ChainState:
    if not _is_uint(new_head):
        raise MalformedEvent(f"head must be a non-negative integer, got {new_head!r}")
    if new_head < state.head:
        raise HeadRegression(f"head {state.head} -> {new_head}")
    state.head = new_head
    return state


def raw_weight(block_state: BlockReliability, params: ScoringParams) -> float:
    tokens = block_state.cumulative_value_base_units / WEI_PER_TOKEN
    return tokens / params.kappa_value + block_state.depth / params.depth_scale


def saturation(w: float) -> float:
    """Unrounded 100 * (1 - e^-w)."""
    return -100.0 * math.expm1(-w)


def score_from_weight(w: float, finalized: bool, params: ScoringParams) -> float:
    if w < 0 or math.isnan(w):
        raise ValueError(f"weight must be non-negative, got {w}")
    if finalized:
        return 100.0
    return round(saturation(w), params.score_decimals)


def interest_rate(score: float, params: ScoringParams) -> float:
    if not 0 <= score <= 100:
        raise ScoreOutOfRange(score)
    # endpoints are returned verbatim so the band edges hold exactly
    if score == 0:
        return params.rate_max
    if score == 100:
        return params.rate_min
    rate = params.rate_max - (params.rate_max - params.rate_min) * (score / 100)
    rate = round(rate, params.rate_decimals)
    return min(max(rate, params.rate_min), params.rate_max)


def _record(b: int, value: int, count: int, head: int, params: ScoringParams) -> BlockReliability:
    depth = head - b
    finalized = depth >= params.finality_depth
    partial = BlockReliability(b, value, count, depth, 0.0, finalized)
    score = score_from_weight(raw_weight(partial, params), finalized, params)
    return BlockReliability(b, value, count, depth, score, finalized)


def query_block(state: ChainState, l2_block: int, params: ScoringParams) -> BlockReliability:
    if not _is_uint(l2_block):
        raise MalformedEvent(f"block must be a non-negative integer, got {l2_block!r}")
    if l2_block > state.head:
        raise BlockBeyondHead(f"block {l2_block} is beyond head {state.head}")
    value, count = state.attested(l2_block)
    return _record(l2_block, value, count, state.head, params)


def query_range(state: ChainState, lo: int, hi: int, params: ScoringParams) -> list[BlockReliability]:
    """Records for lo..hi inclusive; hi must not exceed the head."""
    if hi > state.head:
        raise BlockBeyondHead(f"block {hi} is beyond head {state.head}")
    return [_record(b, v, c, state.head, params) for b, v, c in state.sweep(lo, hi)]
