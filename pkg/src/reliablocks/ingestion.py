"""Fast-exit feeds: JSON-lines parsing, validation and synthetic generation.

A feed is an ordered sequence of two record kinds::

    {"type":"fast_exit","id":"fe-1","l2_block":5,"provider":"p1",
     "value_base_units":"1000000000000000000","l1_block":900,"ts":100}
    {"type":"head","l2_block":42,"ts":101}

``value_base_units`` is a decimal string so wei-scale amounts survive any
JSON reader.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .errors import ParseError
from .prng import MASK64, Xoshiro256StarStar
from .scoring import WEI_PER_TOKEN, FastExitEvent

FAST_EXIT = "fast_exit"
HEAD_ADVANCE = "head_advance"


@dataclass(frozen=True)
class HeadAdvance:
    l2_block: int
    ts: int = 0


@dataclass(frozen=True)
class FeedRecord:
    kind: str
    payload: Union[FastExitEvent, HeadAdvance]

    @classmethod
    def exit(cls, event: FastExitEvent) -> "FeedRecord":
        return cls(FAST_EXIT, event)

    @classmethod
    def head(cls, l2_block: int, ts: int = 0) -> "FeedRecord":
        return cls(HEAD_ADVANCE, HeadAdvance(l2_block, ts))


def _uint(obj: dict, key: str, position) -> int:
    if key not in obj:
        raise ParseError(position, f"missing {key}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(position, f"{key} must be an integer")
    if v < 0:
        raise ParseError(position, f"{key} must be non-negative")
    return v


def _str(obj: dict, key: str, position) -> str:
    if key not in obj:
        raise ParseError(position, f"missing {key}")
    v = obj[key]
    if not isinstance(v, str):
        raise ParseError(position, f"{key} must be a string")
    return v


def record_from_obj(obj, position=None) -> FeedRecord:
    if not isinstance(obj, dict):
        raise ParseError(position, "record must be a JSON object")
    kind = _str(obj, "type", position)
    if kind == "head":
        return FeedRecord.head(_uint(obj, "l2_block", position), _uint(obj, "ts", position))
    if kind != FAST_EXIT:
        raise ParseError(position, f"unknown record type {kind!r}")
    event_id = _str(obj, "id", position)
    if not event_id:
        raise ParseError(position, "id must be non-empty")
    l2_block = _uint(obj, "l2_block", position)
    provider = _str(obj, "provider", position)
    raw_value = _str(obj, "value_base_units", position)
    if not raw_value.isascii() or not raw_value.isdigit():
        raise ParseError(position, "value_base_units must be a non-negative decimal string")
    return FeedRecord.exit(
        FastExitEvent(
            id=event_id,
            l2_block=l2_block,
            provider=provider,
            value_base_units=int(raw_value),
            l1_block=_uint(obj, "l1_block", position),
            ts=_uint(obj, "ts", position),
        )
    )


def parse_feed_line(line: str, position: Optional[int] = None) -> FeedRecord:
    """Parse one feed line.  Unknown fields are ignored."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(position, f"malformed JSON: {exc.msg}") from None
    return record_from_obj(obj, position)


def record_to_obj(record: FeedRecord) -> dict:
    p = record.payload
    if record.kind == HEAD_ADVANCE:
        return {"type": "head", "l2_block": p.l2_block, "ts": p.ts}
    return {
        "type": FAST_EXIT,
        "id": p.id,
        "l2_block": p.l2_block,
        "provider": p.provider,
        "value_base_units": str(p.value_base_units),
        "l1_block": p.l1_block,
        "ts": p.ts,
    }


def serialize_record(record: FeedRecord) -> str:
    return json.dumps(record_to_obj(record), separators=(",", ":"))


def read_feed(path) -> Iterator[FeedRecord]:
    """Yield records from a feed file; positions are 1-based line numbers."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield parse_feed_line(line, lineno)


def write_feed(records: Iterable[FeedRecord], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(serialize_record(rec))
            fh.write("\n")
            n += 1
    return n


@dataclass
class Issue:
    position: int
    code: str
    detail: str


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def first(self) -> Optional[Issue]:
        return self.issues[0] if self.issues else None


def validate_feed(records: Iterable[FeedRecord], start: int = 1) -> ValidationReport:
    """Check a feed replays cleanly.

    Positions count from ``start`` (1 matches file line numbers for feeds
    without blank lines).
    """
    report = ValidationReport()
    seen: set[str] = set()
    head = 0
    for pos, rec in enumerate(records, start=start):
        p = rec.payload
        if rec.kind == HEAD_ADVANCE:
            if p.l2_block < head:
                report.issues.append(
                    Issue(pos, "HeadRegression", f"head {head} -> {p.l2_block}")
                )
            else:
                head = p.l2_block
            continue
        if p.id in seen:
            report.issues.append(Issue(pos, "DuplicateEventId", p.id))
        seen.add(p.id)
        if p.l2_block > head:
            report.issues.append(
                Issue(pos, "ExitBeyondHead", f"exit {p.id} at block {p.l2_block} > head {head}")
            )
    return report


@dataclass(frozen=True)
class GenParams:
    seed: int = 42
    num_blocks: int = 100
    exit_rate: float = 0.5
    value_log_mean: float = 1.0
    value_log_sigma: float = 1.0
    num_providers: int = 5
    block_time: int = 2

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.num_blocks < 0:
            raise ValueError("num_blocks must be non-negative")
        if not self.exit_rate >= 0 or not self.value_log_sigma >= 0:
            raise ValueError("exit_rate and value_log_sigma must be non-negative")
        if self.num_providers < 1:
            raise ValueError("num_providers must be >= 1")
        if self.block_time < 1:
            raise ValueError("block_time must be >= 1")


# L1 slot time in seconds, used to place synthetic batches on L1
L1_BLOCK_TIME = 12


def poisson_inversion(u: float, lam: float) -> int:
    """Smallest k with P(X <= k) > u for X ~ Poisson(lam)."""
    if lam <= 0:
        return 0
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u >= cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0 and k > lam:
            # tail underflowed; cdf has stopped moving
            break
    return k


def generate_feed(params: GenParams) -> Iterator[FeedRecord]:
    """Deterministic synthetic feed.

    Per block: one head advance, then Poisson(exit_rate) exits whose
    whole-token values are log-normal (Box-Muller, cosine branch, one
    uniform pair per exit).
    """
    rng = Xoshiro256StarStar(params.seed)
    counter = 0
    for block in range(params.num_blocks):
        ts = block * params.block_time
        yield FeedRecord.head(block, ts)
        n = poisson_inversion(rng.uniform(), params.exit_rate)
        for _ in range(n):
            u1 = 1.0 - rng.uniform()  # (0, 1]
            u2 = rng.uniform()
            z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
            tokens = math.exp(params.value_log_mean + params.value_log_sigma * z)
            provider = int(rng.uniform() * params.num_providers)
            yield FeedRecord.exit(
                FastExitEvent(
                    id=f"fe-{counter:08d}",
                    l2_block=block,
                    provider=f"prov-{provider}",
                    value_base_units=math.floor(tokens * WEI_PER_TOKEN),
                    l1_block=ts // L1_BLOCK_TIME,
                    ts=ts,
                )
            )
            counter += 1
