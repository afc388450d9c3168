"""Simulated AVS operator network.

Staked operators answer score tasks keyed by L2 block.  A task resolves to
the lower median of the submitted scores; submitters further than
``deviation_tolerance`` from it lose ``slash_fraction`` of their stake to
the treasury, the rest split the per-task reward.  All amounts are integer
base units, so stake + treasury + reward pool is conserved exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import (
    BlockBeyondHead,
    DuplicateOperator,
    InsufficientStake,
    NoSubmissions,
    QuorumNotReached,
    ReliablocksError,
    TaskNotOpen,
    UnknownOperator,
    UnknownTask,
)
from .prng import Xoshiro256StarStar
from .scoring import ChainState, ScoringParams, query_block

HONEST = "honest"
OFFSET = "offset"
RANDOM = "random"
SILENT = "silent"

OPEN = "open"
RESOLVED = "resolved"
EXPIRED = "expired"


@dataclass(frozen=True)
class AvsParams:
    min_stake: int = 10**18
    slash_fraction: float = 0.10
    deviation_tolerance: float = 0.5
    quorum_fraction: float = 2 / 3
    reward_per_task: int = 10**16
    task_deadline: int = 10
    # not part of the per-task rules; seeds the world and the CLI
    initial_reward_pool: int = 10**21
    operator_stake: int = 32 * 10**18

    def __post_init__(self):
        if self.min_stake < 1:
            raise ValueError("min_stake must be positive")
        if not 0 < self.slash_fraction <= 1:
            raise ValueError("slash_fraction must be in (0, 1]")
        if not self.deviation_tolerance > 0:
            raise ValueError("deviation_tolerance must be positive")
        if not 0 < self.quorum_fraction <= 1:
            raise ValueError("quorum_fraction must be in (0, 1]")
        if self.reward_per_task < 1 or self.task_deadline < 1:
            raise ValueError("reward_per_task and task_deadline must be positive")
        if self.initial_reward_pool < 0 or self.operator_stake < self.min_stake:
            raise ValueError("initial_reward_pool >= 0 and operator_stake >= min_stake required")

    def to_dict(self) -> dict:
        return {
            "min_stake": self.min_stake,
            "slash_fraction": self.slash_fraction,
            "deviation_tolerance": self.deviation_tolerance,
            "quorum_fraction": self.quorum_fraction,
            "reward_per_task": self.reward_per_task,
            "task_deadline": self.task_deadline,
            "initial_reward_pool": self.initial_reward_pool,
            "operator_stake": self.operator_stake,
        }


@dataclass(frozen=True)
class Strategy:
    kind: str = HONEST
    delta: float = 0.0
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``honest``, ``silent``, ``offset:<delta>`` or ``random:<seed>``."""
        name, _, arg = text.partition(":")
        if name in (HONEST, SILENT) and not arg:
            return cls(name)
        if name == OFFSET and arg:
            delta = float(arg)
            if not math.isfinite(delta):
                raise ValueError(f"bad offset {arg!r}")
            return cls(OFFSET, delta=delta)
        if name == RANDOM and arg:
            return cls(RANDOM, seed=int(arg))
        raise ValueError(f"unknown strategy {text!r}")

    def __str__(self) -> str:
        if self.kind == OFFSET:
            return f"offset:{self.delta!r}"
        if self.kind == RANDOM:
            return f"random:{self.seed}"
        return self.kind


@dataclass
class Operator:
    id: str
    stake: int
    strategy: Strategy = field(default_factory=Strategy)
    slashed_total: int = 0
    rewards_total: int = 0
    active: bool = True
    rng: Optional[Xoshiro256StarStar] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.strategy.kind == RANDOM and self.rng is None:
            self.rng = Xoshiro256StarStar(self.strategy.seed)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "stake": str(self.stake),
            "strategy": str(self.strategy),
            "slashed_total": str(self.slashed_total),
            "rewards_total": str(self.rewards_total),
            "active": self.active,
        }
        if self.rng is not None:
            d["rng_state"] = [str(x) for x in self.rng.s]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Operator":
        op = cls(
            id=d["id"],
            stake=int(d["stake"]),
            strategy=Strategy.parse(d["strategy"]),
            slashed_total=int(d["slashed_total"]),
            rewards_total=int(d["rewards_total"]),
            active=bool(d["active"]),
        )
        if "rng_state" in d:
            op.rng = Xoshiro256StarStar.from_state(int(x) for x in d["rng_state"])
        return op


@dataclass(frozen=True)
class Submission:
    operator_id: str
    task_id: str
    score: float
    submitted_at: int


@dataclass
class AggregationResult:
    consensus_score: float
    accepted: frozenset
    slashed: frozenset
    non_responders: frozenset
    stake_deltas: dict[str, int]
    treasury_delta: int

    def to_dict(self) -> dict:
        return {
            "consensus_score": self.consensus_score,
            "accepted": sorted(self.accepted),
            "slashed": sorted(self.slashed),
            "non_responders": sorted(self.non_responders),
            "stake_deltas": {k: self.stake_deltas[k] for k in sorted(self.stake_deltas)},
            "treasury_delta": self.treasury_delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AggregationResult":
        return cls(
            consensus_score=float(d["consensus_score"]),
            accepted=frozenset(d["accepted"]),
            slashed=frozenset(d["slashed"]),
            non_responders=frozenset(d["non_responders"]),
            stake_deltas={k: int(v) for k, v in d["stake_deltas"].items()},
            treasury_delta=int(d["treasury_delta"]),
        )


@dataclass
class Task:
    task_id: str
    l2_block: int
    created_tick: int
    status: str = OPEN
    submissions: list[Submission] = field(default_factory=list)
    result: Optional[AggregationResult] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "l2_block": self.l2_block,
            "created_tick": self.created_tick,
            "status": self.status,
            "submissions": [
                {
                    "operator_id": s.operator_id,
                    "task_id": s.task_id,
                    "score": s.score,
                    "submitted_at": s.submitted_at,
                }
                for s in self.submissions
            ],
            "result": self.result.to_dict() if self.result else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Task":
        return cls(
            task_id=d["task_id"],
            l2_block=d["l2_block"],
            created_tick=d["created_tick"],
            status=d["status"],
            submissions=[Submission(**s) for s in d["submissions"]],
            result=AggregationResult.from_dict(d["result"]) if d["result"] else None,
        )


@dataclass
class World:
    """Registry, task queue and the two token sinks/sources."""

    operators: dict[str, Operator] = field(default_factory=dict)
    tasks: dict[str, Task] = field(default_factory=dict)
    task_counter: int = 0
    tick: int = 0
    treasury: int = 0
    reward_pool: int = 0

    @classmethod
    def genesis(cls, params: AvsParams) -> "World":
        return cls(reward_pool=params.initial_reward_pool)

    def active_ids(self) -> list[str]:
        return sorted(i for i, op in self.operators.items() if op.active)

    def total_value(self) -> int:
        return sum(op.stake for op in self.operators.values()) + self.treasury + self.reward_pool

    def to_dict(self) -> dict:
        return {
            "operators": [self.operators[k].to_dict() for k in sorted(self.operators)],
            "tasks": [t.to_dict() for t in self.tasks.values()],
            "task_counter": self.task_counter,
            "tick": self.tick,
            "treasury": str(self.treasury),
            "reward_pool": str(self.reward_pool),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "World":
        ops = [Operator.from_dict(o) for o in d["operators"]]
        tasks = [Task.from_dict(t) for t in d["tasks"]]
        return cls(
            operators={o.id: o for o in ops},
            tasks={t.task_id: t for t in tasks},
            task_counter=d["task_counter"],
            tick=d["tick"],
            treasury=int(d["treasury"]),
            reward_pool=int(d["reward_pool"]),
        )


def register_operator(
    world: World, op_id: str, stake: int, strategy: Strategy, params: AvsParams
) -> World:
    if op_id in world.operators:
        raise DuplicateOperator(op_id)
    if stake < params.min_stake:
        raise InsufficientStake(f"{op_id}: stake {stake} < min_stake {params.min_stake}")
    world.operators[op_id] = Operator(op_id, stake, strategy)
    return world


def create_task(world: World, l2_block: int, head: int) -> Task:
    if l2_block > head:
        raise BlockBeyondHead(f"block {l2_block} is beyond head {head}")
    task = Task(f"task-{world.task_counter}", l2_block, world.tick)
    world.task_counter += 1
    world.tasks[task.task_id] = task
    return task


def operator_compute(
    operator: Operator, l2_block: int, chain_state: ChainState, params: ScoringParams
) -> Optional[float]:
    """Score this operator would submit, or None when it stays silent."""
    s = operator.strategy
    if s.kind == SILENT:
        return None
    if s.kind == RANDOM:
        return round(operator.rng.uniform() * 100.0, params.score_decimals)
    honest = query_block(chain_state, l2_block, params).score
    if s.kind == OFFSET:
        return round(min(max(honest + s.delta, 0.0), 100.0), params.score_decimals)
    return honest


def submit(world: World, task_id: str, operator_id: str, score: float) -> Submission:
    task = get_task(world, task_id)
    if task.status != OPEN:
        raise TaskNotOpen(task_id)
    op = world.operators.get(operator_id)
    if op is None:
        raise UnknownOperator(operator_id)
    if not op.active:
        raise ReliablocksError(f"operator {operator_id} is inactive")
    if any(s.operator_id == operator_id for s in task.submissions):
        raise ReliablocksError(f"operator {operator_id} already submitted to {task_id}")
    if not 0 <= score <= 100:
        raise ReliablocksError(f"score {score} outside [0, 100]")
    sub = Submission(operator_id, task_id, score, world.tick)
    task.submissions.append(sub)
    return sub


def get_task(world: World, task_id: str) -> Task:
    try:
        return world.tasks[task_id]
    except KeyError:
        raise UnknownTask(task_id) from None


def quorum_size(n_active: int, params: AvsParams) -> int:
    frac = Fraction(str(params.quorum_fraction))
    return max(1, math.ceil(frac * n_active))


def lower_median(values) -> float:
    xs = sorted(values)
    return xs[(len(xs) - 1) // 2]


def aggregate(world: World, task_id: str, params: AvsParams) -> AggregationResult:
    task = get_task(world, task_id)
    if task.status != OPEN:
        raise TaskNotOpen(task_id)
    deadline_passed = world.tick >= task.created_tick + params.task_deadline
    active = world.active_ids()
    subs = task.submissions
    if not subs:
        if deadline_passed:
            task.status = EXPIRED
            raise NoSubmissions(task_id)
        raise QuorumNotReached(f"{task_id}: 0 submissions")
    need = quorum_size(len(active), params)
    if len(subs) < need and not deadline_passed:
        raise QuorumNotReached(f"{task_id}: {len(subs)} of {need} submissions")

    consensus = lower_median(s.score for s in subs)
    submitters = {s.operator_id for s in subs}
    slashed = sorted(
        s.operator_id for s in subs if abs(s.score - consensus) > params.deviation_tolerance
    )
    accepted = sorted(submitters.difference(slashed))
    deltas: dict[str, int] = {}

    slash_frac = Fraction(str(params.slash_fraction))
    treasury_delta = 0
    for op_id in slashed:
        op = world.operators[op_id]
        amount = math.floor(slash_frac * op.stake)
        op.stake -= amount
        op.slashed_total += amount
        treasury_delta += amount
        deltas[op_id] = -amount
        if op.stake < params.min_stake:
            op.active = False
    world.treasury += treasury_delta

    if accepted:
        each = min(params.reward_per_task, world.reward_pool) // len(accepted)
        for op_id in accepted:
            op = world.operators[op_id]
            op.stake += each
            op.rewards_total += each
            deltas[op_id] = each
        world.reward_pool -= each * len(accepted)

    result = AggregationResult(
        consensus_score=consensus,
        accepted=frozenset(accepted),
        slashed=frozenset(slashed),
        non_responders=frozenset(set(active) - submitters),
        stake_deltas=deltas,
        treasury_delta=treasury_delta,
    )
    task.status = RESOLVED
    task.result = result
    return result


def run_round(
    world: World,
    chain_state: ChainState,
    l2_block: int,
    params: AvsParams,
    scoring: ScoringParams,
) -> tuple[World, Optional[AggregationResult]]:
    """One task lifecycle: create, collect every active operator, aggregate.

    If quorum is short the clock jumps to the task deadline.  A round in
    which nobody answers leaves the task expired and returns None.
    """
    task = create_task(world, l2_block, chain_state.head)
    # operator compute is pure; commit in operator-id order
    for op_id in world.active_ids():
        score = operator_compute(world.operators[op_id], l2_block, chain_state, scoring)
        if score is not None:
            submit(world, task.task_id, op_id, score)
    if len(task.submissions) < quorum_size(len(world.active_ids()), params):
        world.tick = task.created_tick + params.task_deadline
    try:
        result = aggregate(world, task.task_id, params)
    except NoSubmissions:
        result = None
    world.tick += 1
    return world, result
