"""``reliablocks`` command line.

Exit codes: 0 ok, 1 I/O, 2 usage, 3 feed validation, 4 domain error.
Payloads go to stdout as JSON or CSV; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import socket
import sys
from pathlib import Path

from .avs import Strategy
from .config import Config, ConfigError, load_config, override
from .engine import Engine, score_payload
from .errors import IoFailure, ParseError, ReliablocksError
from .ingestion import generate_feed, read_feed, record_to_obj, validate_feed, write_feed
from .scoring import query_range

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_VALIDATION, EXIT_DOMAIN = 0, 1, 2, 3, 4

CSV_HEADER = [
    "l2_block",
    "score",
    "interest_rate",
    "cumulative_value_base_units",
    "exit_count",
    "depth",
    "finalized",
]

log = logging.getLogger("reliablocks")


class CliExit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")


def _config(args) -> Config:
    cfg = load_config(args.config)
    if getattr(args, "log", None):
        cfg = override(cfg, paths=override(cfg.paths, log=args.log))
    return cfg


def _open_engine(cfg: Config) -> Engine:
    if not Path(cfg.paths.log).exists():
        raise CliExit(EXIT_IO, f"log {cfg.paths.log} not found; run `reliablocks replay` first")
    return Engine.from_config(cfg)


def cmd_gen(args) -> int:
    cfg = _config(args)
    if args.blocks is not None and args.blocks < 0:
        raise CliExit(EXIT_USAGE, "--blocks must be >= 0")
    try:
        gen = override(cfg.gen, seed=args.seed, num_blocks=args.blocks, exit_rate=args.exit_rate)
    except ConfigError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None
    records = list(generate_feed(gen))
    try:
        n = write_feed(records, args.out)
    except OSError as exc:
        raise CliExit(EXIT_IO, str(exc)) from None
    exits = sum(1 for r in records if r.kind == "fast_exit")
    _emit({"records": n, "exits": exits, "out": str(args.out)})
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _config(args)
    try:
        records = list(read_feed(args.events))
    except OSError as exc:
        raise CliExit(EXIT_IO, str(exc)) from None
    except ParseError as exc:
        raise CliExit(EXIT_VALIDATION, f"line {exc.position}: {exc.reason}") from None
    report = validate_feed(records)
    if not report.ok:
        issue = report.first()
        raise CliExit(EXIT_VALIDATION, f"line {issue.position}: {issue.code}: {issue.detail}")
    engine = Engine.from_config(cfg)
    engine.reset()
    engine.apply(record_to_obj(r) for r in records)
    engine.save_snapshot()
    _emit(
        {
            "head": engine.state.head,
            "events": engine.seq,
            "exits": engine.state.event_count,
            "blocks_tracked": len(engine.state.exits),
        }
    )
    return EXIT_OK


def cmd_score(args) -> int:
    engine = _open_engine(_config(args))
    _emit(engine.score(args.block))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.operators < 1:
        raise CliExit(EXIT_USAGE, "--operators must be >= 1")
    if not 0 <= args.byzantine <= args.operators:
        raise CliExit(EXIT_USAGE, "--byzantine must be between 0 and --operators")
    if args.tasks < 1:
        raise CliExit(EXIT_USAGE, "--tasks must be >= 1")
    try:
        strategy = Strategy.parse(args.strategy)
    except ValueError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None

    cfg = _config(args)
    engine = _open_engine(cfg)
    width = len(str(args.operators - 1))
    honest = args.operators - args.byzantine
    setup = []
    for i in range(args.operators):
        op_id = f"op-{i:0{width}d}"
        if op_id in engine.world.operators:
            continue
        strat = Strategy() if i < honest else strategy
        setup.append(
            {"type": "operator", "id": op_id, "stake": str(cfg.avs.operator_stake), "strategy": str(strat)}
        )
    engine.apply(setup)

    head = engine.state.head
    blocks = [i * (head + 1) // args.tasks for i in range(args.tasks)]
    results = engine.apply({"type": "round", "l2_block": b} for b in blocks)
    engine.save_snapshot()

    out = args.out or cfg.paths.rounds
    resolved = [r for r in results if r is not None]
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for r in resolved:
                fh.write(json.dumps(r.to_dict(), separators=(",", ":")) + "\n")
    except OSError as exc:
        raise CliExit(EXIT_IO, str(exc)) from None

    _emit(
        {
            "rounds": len(results),
            "expired": len(results) - len(resolved),
            "total_slashed": str(sum(r.treasury_delta for r in resolved)),
            "total_rewards": str(
                sum(d for r in resolved for d in r.stake_deltas.values() if d > 0)
            ),
            "final_stakes": {k: str(op.stake) for k, op in sorted(engine.world.operators.items())},
            "treasury": str(engine.world.treasury),
            "reward_pool": str(engine.world.reward_pool),
            "out": str(out),
        }
    )
    return EXIT_OK


def write_csv(engine: Engine, fh) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    n = 0
    for rec in query_range(engine.state, 0, engine.state.head, engine.scoring):
        payload = score_payload(rec, engine.scoring)
        writer.writerow(
            [
                payload["l2_block"],
                repr(payload["score"]),
                repr(payload["interest_rate"]),
                payload["cumulative_value_base_units"],
                payload["exit_count"],
                payload["depth"],
                "true" if payload["finalized"] else "false",
            ]
        )
        n += 1
    return n


def cmd_export(args) -> int:
    engine = _open_engine(_config(args))
    try:
        if args.out in (None, "-"):
            write_csv(engine, sys.stdout)
        else:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                n = write_csv(engine, fh)
            log.info("wrote %d rows to %s", n, args.out)
    except OSError as exc:
        raise CliExit(EXIT_IO, str(exc)) from None
    return EXIT_OK


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise CliExit(EXIT_USAGE, f"bad --addr {addr!r}; expected HOST:PORT")
    return host, int(port)


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    host, port = parse_addr(args.addr)
    engine = _open_engine(_config(args))
    try:
        sock = socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
    except OSError as exc:
        raise CliExit(EXIT_IO, f"cannot bind {args.addr}: {exc}") from None
    bound = sock.getsockname()
    _emit({"addr": f"{bound[0]}:{bound[1]}"})
    sys.stdout.flush()
    server = uvicorn.Server(uvicorn.Config(create_app(engine), log_level="warning"))
    server.run(sockets=[sock])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reliablocks", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, log_flag=True):
        sp.add_argument("--config", help="TOML config (falls back to $RELIABLOCKS_CONFIG)")
        if log_flag:
            sp.add_argument("--log", help="event log path")

    g = sub.add_parser("gen", help="generate a synthetic fast-exit feed")
    g.add_argument("--seed", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--exit-rate", type=float)
    g.add_argument("--out", required=True)
    common(g, log_flag=False)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("replay", help="validate a feed and rebuild the event log from it")
    r.add_argument("--events", required=True)
    common(r)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("score", help="print the score payload for one block")
    s.add_argument("--block", type=int, required=True)
    common(s)
    s.set_defaults(func=cmd_score)

    m = sub.add_parser("simulate", help="run AVS rounds over the replayed chain")
    m.add_argument("--operators", type=int, default=4)
    m.add_argument("--byzantine", type=int, default=0)
    m.add_argument("--strategy", default="offset:10", help="honest|silent|offset:D|random:SEED")
    m.add_argument("--tasks", type=int, default=10)
    m.add_argument("--out", help="round report JSONL path")
    common(m)
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("export", help="per-block CSV of scores and interest rates")
    e.add_argument("--out", default="-")
    e.add_argument("--format", choices=["csv"], default="csv")
    common(e)
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("serve", help="serve the HTTP API")
    v.add_argument("--addr", default="127.0.0.1:8080")
    common(v)
    v.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliExit as exc:
        if exc.message:
            print(f"reliablocks: {exc.message}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"reliablocks: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IoFailure as exc:
        print(f"reliablocks: {exc}", file=sys.stderr)
        return EXIT_IO
    except ReliablocksError as exc:
        print(f"reliablocks: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
