"""Command-line entry point.  Every verb reads and writes plain files; model
and embedder settings come from ``--config`` (the offline mock by default)."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from importlib.resources import files
from pathlib import Path
from typing import Any

from . import __version__
from .catalog import (Catalog, IngestConfig, Retriever, SummaryCache, VectorStore, build_index,
                      ingest_file, rerank, summarize_catalog)
from .dialogue import SimContext, simulate_batch
from .errors import McrError
from .evalkit.corpus import corpus_stats, load_dialogue_texts, text_stats
from .evalkit.runners import (judge_conversations, load_responses, pair_responses, rec_eval_run,
                              response_metrics)
from .optimizer import optimize_batch
from .pipeline import artifacts as A
from .pipeline.config import PipelineConfig, build_embedder, build_gateway
from .pipeline.run import Pipeline, parse_stages
from .pipeline.validate import validate_corpus
from .profiles import ProfileGenerator, expand_scenarios
from .records import Conversation

logger = logging.getLogger("mcrsynth")


def default_config_path() -> Path:
    return Path(str(files("mcrsynth") / "data" / "fixture.yaml"))


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.load(args.config or default_config_path())
    updates: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "workdir", None):
        updates["workdir"] = str(Path(args.workdir).resolve())
    if getattr(args, "workers", None):
        updates["workers"] = args.workers
    return config.model_copy(update=updates) if updates else config


def emit(data: Any, out: str | None = None) -> None:
    text = json.dumps(data, indent=2, ensure_ascii=False)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def _retriever(config: PipelineConfig, args: argparse.Namespace) -> Retriever:
    return Retriever(Catalog.load(args.catalog), VectorStore.load(args.index), build_embedder(config),
                     config.simulation.rerank_m)


# ---------------------------------------------------------------------------
# verbs


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = IngestConfig(category_whitelist=tuple(args.whitelist or ()), max_products=args.max_products,
                       sample=args.sample, seed=args.seed or 0, image_root=args.image_root,
                       check_images=args.image_root is not None)
    catalog, report = ingest_file(args.input, cfg)
    catalog.save(args.out)
    emit({"out": args.out, **report.to_json()})
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    config = load_config(args)
    catalog = Catalog.load(args.catalog)
    gateway = build_gateway(config)
    cache = SummaryCache(args.cache) if args.cache else None
    made = summarize_catalog(catalog, gateway, cap=args.cap or config.catalog.summary_cap, cache=cache,
                             workers=config.workers)
    catalog.save(args.out or args.catalog)
    emit({"summarized": made, "products": len(catalog), "ledger": gateway.ledger_report()["total"]})
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    config = load_config(args)
    store = build_index(Catalog.load(args.catalog), build_embedder(config))
    store.save(args.out)
    emit({"out": args.out, "vectors": len(store), "dimension": store.dimension})
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    config = load_config(args)
    retriever = _retriever(config, args)
    hits = retriever.search(args.query, args.k)
    result: dict[str, Any] = {"query": args.query,
                              "hits": [{"product_id": h.product_id, "score": round(h.score, 6),
                                        "title": retriever.catalog[h.product_id].title} for h in hits]}
    if args.rerank and hits:
        best = rerank(hits, args.query, build_gateway(config), retriever.catalog, m=args.rerank)
        result["best"] = best.product_id
    emit(result)
    return 0


def cmd_scenarios(args: argparse.Namespace) -> int:
    config = load_config(args)
    s = config.scenarios
    seeds = A.load_scenarios(args.seeds or s.seeds)
    from .gates import GateReport

    gates = GateReport()
    scenarios = expand_scenarios(seeds, args.target_count or s.target_count, build_gateway(config),
                                 args.tau or s.tau, stall_limit=s.stall_limit, batch_size=s.batch_size,
                                 seed=config.seed, gates=gates)
    A.save_scenarios(args.out, scenarios)
    emit({"out": args.out, "seeds": len(seeds), "scenarios": len(scenarios), "gates": gates.to_json()})
    return 0


def cmd_profiles(args: argparse.Namespace) -> int:
    config = load_config(args)
    gen = ProfileGenerator(build_gateway(config), _retriever(config, args), A.load_scenarios(args.scenarios),
                           config.profile_config(), seed=config.seed, workers=config.workers)
    batch = gen.generate(args.count)
    A.save_profiles(args.out, batch.profiles)
    emit({"out": args.out, **batch.to_json()})
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args)
    profiles = A.load_profiles(args.profiles)
    if args.limit:
        profiles = profiles[:args.limit]
    scenarios = {s.scenario_id: s for s in A.load_scenarios(args.scenarios)}
    ctx = SimContext(build_gateway(config), _retriever(config, args), scenarios, config.sim_config())
    batch = simulate_batch(profiles, ctx, seed=config.seed, workers=config.workers)
    A.save_conversations(args.out, batch.conversations)
    emit({"out": args.out, **batch.to_json()})
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    config = load_config(args)
    o = config.optimizer
    conversations = A.load_conversations(args.input)
    profiles = {p.profile_id: p for p in A.load_profiles(args.profiles)} if args.profiles else None
    batch = optimize_batch(
        conversations, build_gateway(config), profiles=profiles,
        colloquial_prob=o.colloquial_prob if args.colloquial_prob is None else args.colloquial_prob,
        threshold=o.threshold if args.threshold is None else args.threshold,
        rewrite_enabled=o.rewrite and not args.no_rewrite, seed=config.seed, workers=config.workers)
    A.save_conversations(args.out, batch.retained)
    if args.reviewed:
        A.save_conversations(args.reviewed, batch.reviewed)
    emit({"out": args.out, **batch.to_json()})
    return 0


def _read_native(path: str) -> list[Conversation] | None:
    try:
        return A.load_conversations(path)
    except (ValueError, TypeError):
        return None


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = _read_native(args.input)
    if corpus:
        stats = corpus_stats(corpus)
    else:
        stats = text_stats(load_dialogue_texts(args.input))
    emit(stats.to_json(), args.out)
    return 0


def cmd_eval_rec(args: argparse.Namespace) -> int:
    config = load_config(args)
    routes = {"eval": args.model} if args.model else None
    if args.model and args.model not in config.providers:
        raise McrError(f"--model {args.model!r} is not a configured provider")
    gateway = build_gateway(config, extra_routes=routes)
    n_values = [int(n) for n in args.n.split(",")] if args.n else config.eval.n_values
    result = rec_eval_run(A.load_conversations(args.input), gateway, _retriever(config, args), n_values,
                          points=args.points or config.eval.points, seed=config.seed,
                          workers=config.workers)
    emit(result.to_json(), args.out)
    return 0


def cmd_eval_response(args: argparse.Namespace) -> int:
    preds, golds = pair_responses(load_responses(args.pred), load_responses(args.gold))
    emit(response_metrics(preds, golds), args.out)
    return 0


def cmd_judge(args: argparse.Namespace) -> int:
    config = load_config(args)
    corpus = A.load_conversations(args.input)
    if args.sample and args.sample < len(corpus):
        corpus = random.Random(config.seed).sample(corpus, args.sample)
    report = judge_conversations(corpus, build_gateway(config), rounds=args.rounds or config.eval.judge_rounds,
                                 seed=config.seed, workers=config.workers)
    data = report.to_json()
    if not args.per_conversation:
        data.pop("per_conversation")
    emit(data, args.out)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    catalog = Catalog.load(args.catalog) if args.catalog else None
    profiles = {p.profile_id: p for p in A.load_profiles(args.profiles)} if args.profiles else None
    sim = None
    if args.config:
        sim = PipelineConfig.load(args.config).sim_config()
    report = validate_corpus(args.input, catalog=catalog, profiles=profiles, config=sim)
    emit(report.to_json())
    return 0 if report.ok else 1


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest = Pipeline(config).run(parse_stages(args.stages))
    data = manifest.to_json()
    emit({"run_id": data["run_id"], "workdir": config.workdir,
          "stages": {k: {"inputs": v.get("inputs"), "outputs": v.get("outputs")} for k, v in data["stages"].items()},
          "gates": data["gates"], "reconciliation": data["reconciliation"],
          "cost": data["ledger"]["total"]})
    return 0 if not data["reconciliation"] else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcrsynth", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def verb(name: str, func, help_: str, config: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        if config:
            p.add_argument("--config", help="pipeline YAML (default: bundled offline fixture config)")
            p.add_argument("--seed", type=int)
            p.add_argument("--workers", type=int)
        return p

    def stores(p: argparse.ArgumentParser) -> None:
        p.add_argument("--catalog", required=True, help="catalog JSONL with summaries")
        p.add_argument("--index", required=True, help="vector index JSON")

    p = verb("ingest", cmd_ingest, "filter raw product records into a catalog", config=False)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--whitelist", nargs="*", help="allowed category names")
    p.add_argument("--max-products", type=int)
    p.add_argument("--sample", choices=["first", "random"], default="first")
    p.add_argument("--seed", type=int)
    p.add_argument("--image-root", help="check that local images exist under this directory")

    p = verb("summarize", cmd_summarize, "write a compact summary for every product")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", help="defaults to rewriting --catalog")
    p.add_argument("--cache", help="summary cache file")
    p.add_argument("--cap", type=int, help="maximum summary length in characters")

    p = verb("index", cmd_index, "embed summaries into a vector index")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)

    p = verb("search", cmd_search, "query the product index")
    stores(p)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--rerank", type=int, metavar="M", help="also let the model pick among the top M")

    p = verb("scenarios", cmd_scenarios, "expand seed scenarios with deduplication")
    p.add_argument("--seeds", help="seed scenarios JSONL (default: from config)")
    p.add_argument("--target-count", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--out", required=True)

    p = verb("profiles", cmd_profiles, "generate screened user profiles")
    stores(p)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--out", required=True)

    p = verb("simulate", cmd_simulate, "simulate one conversation per profile")
    stores(p)
    p.add_argument("--profiles", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--limit", type=int)
    p.add_argument("--out", required=True)

    p = verb("optimize", cmd_optimize, "rewrite, review and filter conversations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profiles", help="profiles JSONL, shown to the reviewer")
    p.add_argument("--reviewed", help="also write every reviewed conversation here")
    p.add_argument("--colloquial-prob", type=float)
    p.add_argument("--threshold", type=int)
    p.add_argument("--no-rewrite", action="store_true")

    p = verb("stats", cmd_stats, "corpus statistics", config=False)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")

    p = verb("eval-rec", cmd_eval_rec, "recall@n / MRR@n of model-generated retrieval queries")
    stores(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", help="provider name (from the config) that generates queries")
    p.add_argument("--n", help="comma-separated cutoffs, e.g. 10,20")
    p.add_argument("--points", choices=["recommend", "final"])
    p.add_argument("--out")

    p = verb("eval-response", cmd_eval_response, "BLEU/ROUGE/distinct metrics of responses", config=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")

    p = verb("judge", cmd_judge, "five-dimension model judging of conversations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--rounds", type=int)
    p.add_argument("--per-conversation", action="store_true")
    p.add_argument("--out")

    p = verb("validate", cmd_validate, "check a corpus file", config=False)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--catalog")
    p.add_argument("--profiles")
    p.add_argument("--config", help="also check round limits from this config")

    p = verb("run", cmd_run, "run pipeline stages end to end")
    p.add_argument("--stages", default="all", help="comma-separated subset of "
                   "ingest,scenarios,profiles,simulate,optimize,stats (default: all)")
    p.add_argument("--workdir", help="override the config's work directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (McrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
