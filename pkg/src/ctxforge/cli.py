"""Command-line interface: ``ctxforge <subcommand> ...``.

Exit status 0 on success, 2 for usage errors and missing input files, 1 for
any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .cache.build import StaleChangeError, apply_change, build_cache, read_changes
from .cache.snapshot import CacheSnapshot
from .config import ABLATIONS, EngineConfig, PolicyMode
from .corpus import CorpusError, CorpusStore, ingest_corpus, read_documents
from .hybrid import Engine, replay
from .policy.network import PolicyParams
from .policy.ppo import PpoConfig, TrainingDiverged, ppo_train
from .syncorpus import CorpusSpec, TraceRecord, generate

log = logging.getLogger("ctxforge")


class MissingInput(Exception):
    pass


def _existing(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise MissingInput(f"no such file: {path}")
    return p


def _dump(obj: object) -> str:
    return json.dumps(obj, sort_keys=True)


def engine_config(args: argparse.Namespace) -> EngineConfig:
    cfg = EngineConfig.load(_existing(args.config)) if args.config else EngineConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg.ablate(*(args.ablate or ()))


def cmd_build(args: argparse.Namespace) -> int:
    corpus = _existing(args.corpus)
    cfg = engine_config(args)
    store = ingest_corpus(corpus)
    knowledge = None
    if args.retrieval_corpus:
        with open(_existing(args.retrieval_corpus), encoding="utf-8") as fh:
            knowledge = CorpusStore.from_documents(list(store.documents.values()) + read_documents(fh))
    policy = None
    if args.policy:
        policy = PolicyParams.load(_existing(args.policy))
        if cfg.policy_mode is PolicyMode.HEURISTIC:
            cfg = cfg.replace(policy_mode=PolicyMode.LEARNED)
    elif cfg.policy_mode is PolicyMode.LEARNED:
        raise ValueError("policy_mode 'learned' needs --policy")
    snap = build_cache(store, cfg, policy, knowledge)
    snap.save(args.out)
    print(_dump({**snap.stats, "snapshot": str(args.out), "digest": snap.digest()}))
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    engine = Engine(CacheSnapshot.load(_existing(args.snapshot)))
    ctx, metrics = engine.answer(args.text, args.query_id)
    print(_dump({"context": ctx.to_dict(), "metrics": metrics}))
    return 0


def cmd_update(args: argparse.Namespace) -> int:
    snap = CacheSnapshot.load(_existing(args.snapshot))
    with open(_existing(args.changes), encoding="utf-8") as fh:
        events = read_changes(fh)
    nodes = 0
    for event in events:
        snap, changed = apply_change(snap, event)
        nodes += len(changed)
        log.info("%s %s: %d nodes recompressed", event.op.value, event.doc_id, len(changed))
    out = args.out or args.snapshot
    snap.save(out)
    print(_dump({"events": len(events), "recomputed_nodes": nodes, "snapshot": str(out), "digest": snap.digest()}))
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    engine = Engine(CacheSnapshot.load(_existing(args.snapshot)))
    with open(_existing(args.trace), encoding="utf-8") as fh:
        trace = [TraceRecord.from_record(json.loads(line)) for line in fh if line.strip()]
    ids = [t.query_id for t in trace]
    if len(set(ids)) != len(ids):
        raise ValueError("trace query_ids must be unique")
    report = replay(engine, trace)
    if args.out:
        Path(args.out).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(_dump(report["aggregates"]))
    return 0


def cmd_train_policy(args: argparse.Namespace) -> int:
    from .policy.envs import CompressionEnv, EnvConfig  # pulls in the build pipeline

    spec = CorpusSpec.from_json(_existing(args.corpus_spec)) if args.corpus_spec else None
    ppo = {}
    if args.ppo_config:
        ppo = json.loads(_existing(args.ppo_config).read_text(encoding="utf-8"))
    if args.seed is not None:
        ppo["seed"] = args.seed
    unknown = sorted(set(ppo) - set(PpoConfig.__dataclass_fields__))
    if unknown:
        raise ValueError(f"unknown PPO config field(s): {', '.join(unknown)}")
    cfg = PpoConfig(**ppo)
    engine_cfg = EngineConfig.load(_existing(args.config)) if args.config else EngineConfig()
    env = CompressionEnv(EnvConfig(), engine_cfg, spec)
    result = ppo_train(env, cfg)
    result.params.save(args.out)
    tail = result.batch_mean_returns[-10:]
    print(_dump({"episodes": cfg.episodes, "final_mean_return": sum(tail) / len(tail) if tail else None,
                 "policy": str(args.out)}))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import make_server

    engine = Engine(CacheSnapshot.load(_existing(args.snapshot)))
    host, _, port = args.bind.rpartition(":")
    try:
        server = make_server(engine, host or "127.0.0.1", int(port))
    except OSError as exc:
        print(f"ctxforge: cannot bind {args.bind}: {exc}", file=sys.stderr)
        return 1
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    spec = CorpusSpec.from_json(_existing(args.spec)) if args.spec else CorpusSpec.standard()
    if args.seed is not None:
        spec = CorpusSpec(**{**spec.__dict__, "seed": args.seed})
    paths = generate(spec).write(args.out)
    print(_dump({k: str(v) for k, v in paths.items()}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="engine config JSON (defaults for every missing field)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--ablate", action="append", choices=ABLATIONS, help="switch off one component")

    p = argparse.ArgumentParser(prog="ctxforge", description="Token-budgeted context cache engine.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], help="compress a corpus into a cache snapshot")
    b.add_argument("corpus", help="JSON-lines corpus")
    b.add_argument("--out", required=True, help="snapshot path to write")
    b.add_argument("--policy", help="trained policy file (implies policy_mode learned)")
    b.add_argument("--retrieval-corpus", help="extra JSON-lines documents served only on cache misses")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="assemble the context for one query")
    q.add_argument("text")
    q.add_argument("--snapshot", required=True)
    q.add_argument("--query-id")
    q.set_defaults(func=cmd_query)

    u = sub.add_parser("update", help="apply a JSON-lines change feed to a snapshot")
    u.add_argument("changes")
    u.add_argument("--snapshot", required=True)
    u.add_argument("--out", help="write here instead of rewriting --snapshot")
    u.set_defaults(func=cmd_update)

    r = sub.add_parser("replay", help="replay a query trace and write a benchmark report")
    r.add_argument("trace")
    r.add_argument("--snapshot", required=True)
    r.add_argument("--out", help="report JSON path")
    r.set_defaults(func=cmd_replay)

    t = sub.add_parser("train-policy", help="train the compression policy")
    t.add_argument("corpus_spec", nargs="?", help="CorpusSpec JSON (default: standard corpus)")
    t.add_argument("ppo_config", nargs="?", help="PPO config JSON")
    t.add_argument("--config", help="engine config JSON")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True, help="policy file to write")
    t.set_defaults(func=cmd_train_policy)

    s = sub.add_parser("serve", help="serve queries over HTTP")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--bind", default="127.0.0.1:8080", help="host:port")
    s.set_defaults(func=cmd_serve)

    g = sub.add_parser("generate", help="write a synthetic corpus, trace and ground truth")
    g.add_argument("spec", nargs="?", help="CorpusSpec JSON (default: standard corpus)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CTXFORGE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"ctxforge: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, StaleChangeError, TrainingDiverged, ValueError, OSError) as exc:
        print(f"ctxforge: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
