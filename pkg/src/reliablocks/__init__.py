"""Reliability scores for non-finalized optimistic-rollup blocks."""
from .avs import AggregationResult, AvsParams, Operator, Strategy, Task, World
from .errors import ReliablocksError
from .ingestion import FeedRecord, GenParams, generate_feed, parse_feed_line, validate_feed
from .scoring import (
    BlockReliability,
    ChainState,
    FastExitEvent,
    ScoringParams,
    advance_head,
    apply_event,
    interest_rate,
    query_block,
    raw_weight,
    score_from_weight,
)

__version__ = "0.1.0"
