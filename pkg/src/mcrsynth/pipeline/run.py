"""Stage orchestration with on-disk hand-off between stages and a run manifest."""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from .. import gates as G
from ..catalog import Retriever, SummaryCache, build_index, ingest_file, summarize_catalog
from ..dialogue import SimContext, simulate_batch
from ..evalkit.corpus import corpus_stats
from ..gateway import CostLedger, Gateway
from ..errors import StageFailure
from ..optimizer import optimize_batch
from ..profiles import ProfileGenerator, expand_scenarios
from ..seeding import derive_seed
from . import artifacts as A
from .config import PipelineConfig, build_embedder, build_gateway

logger = logging.getLogger(__name__)

STAGES = ("ingest", "scenarios", "profiles", "simulate", "optimize", "stats")

# (upstream stage, output key) must equal (downstream stage, input key) when both ran
HANDOFFS = (
    (("ingest", "products"), ("profiles", "products")),
    (("scenarios", "scenarios"), ("profiles", "scenarios")),
    (("profiles", "profiles"), ("simulate", "profiles")),
    (("simulate", "conversations"), ("optimize", "conversations")),
    (("optimize", "corpus"), ("stats", "conversations")),
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class StageResult:
    inputs: dict[str, int]
    outputs: dict[str, int]
    gates: G.GateReport = field(default_factory=G.GateReport)
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class RunManifest:
    run_id: str
    config_hash: str
    created: str
    updated: str = ""
    stages: dict[str, dict[str, Any]] = field(default_factory=dict)

    def gate_report(self) -> G.GateReport:
        report = G.GateReport()
        for name in STAGES:
            if name in self.stages:
                report.merge(G.GateReport.from_json(self.stages[name].get("gates", {})))
        return report

    def ledger(self) -> dict[str, Any]:
        ledger = CostLedger()
        for entry in self.stages.values():
            ledger.merge_report(entry.get("ledger", {}))
        return ledger.report()

    def reconcile(self) -> list[str]:
        problems = []
        for (up, out_key), (down, in_key) in HANDOFFS:
            a, b = self.stages.get(up), self.stages.get(down)
            if not a or not b or a.get("status") != "ok" or b.get("status") != "ok":
                continue
            produced, consumed = a["outputs"].get(out_key), b["inputs"].get(in_key)
            if produced != consumed:
                problems.append(f"{up}.{out_key}={produced} but {down}.{in_key}={consumed}")
        sim = self.stages.get("simulate")
        if sim and sim.get("status") == "ok":
            if sim["outputs"]["conversations"] + sim["outputs"]["abandoned"] != sim["inputs"]["profiles"]:
                problems.append("simulate: conversations + abandoned != profiles")
        for name, count in self.gate_report().items():
            if not count.reconciles():
                problems.append(f"gate {name}: generated != retained + rejected")
        return problems

    def to_json(self) -> dict[str, Any]:
        return {"run_id": self.run_id, "config_hash": self.config_hash, "created": self.created,
                "updated": self.updated, "stages": self.stages,
                "gates": self.gate_report().to_json(), "ledger": self.ledger(),
                "reconciliation": self.reconcile()}

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["run_id"], data["config_hash"], data["created"], data.get("updated", ""),
                   data.get("stages", {}))


def parse_stages(spec: str | Sequence[str]) -> list[str]:
    names = [s.strip() for s in (spec.split(",") if isinstance(spec, str) else spec) if s.strip()]
    if names == ["all"]:
        return list(STAGES)
    unknown = [n for n in names if n not in STAGES]
    if unknown:
        raise ValueError(f"unknown stage(s) {unknown}; choose from {', '.join(STAGES)}")
    return [s for s in STAGES if s in names]


class Pipeline:
    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.workdir = Path(config.workdir)

    def path(self, name: str) -> Path:
        return self.workdir / name

    def _gateway(self, stage: str) -> Gateway:
        return build_gateway(self.config, seed=derive_seed(self.config.seed, stage))

    def _retriever(self) -> Retriever:
        return Retriever(A.load_catalog(self.path(A.CATALOG)), A.load_index(self.path(A.INDEX)),
                         build_embedder(self.config), self.config.simulation.rerank_m)

    def _seed(self, stage: str) -> int:
        return derive_seed(self.config.seed, stage, "work")

    # -- stages --------------------------------------------------------------

    def stage_ingest(self, gateway: Gateway) -> StageResult:
        cfg = self.config
        catalog, report = ingest_file(cfg.catalog.input, cfg.ingest_config())
        cache = SummaryCache(self.path(A.SUMMARY_CACHE))
        summarize_catalog(catalog, gateway, cap=cfg.catalog.summary_cap, cache=cache, workers=cfg.workers)
        catalog.save(self.path(A.CATALOG))
        store = build_index(catalog, build_embedder(cfg))
        store.save(self.path(A.INDEX))
        return StageResult({"records": report.seen}, {"products": len(catalog), "indexed": len(store)},
                           detail={"ingest": report.to_json()})

    def stage_scenarios(self, gateway: Gateway) -> StageResult:
        s = self.config.scenarios
        seeds = A.load_scenarios(s.seeds)
        gates = G.GateReport()
        scenarios = expand_scenarios(seeds, s.target_count, gateway, s.tau, stall_limit=s.stall_limit,
                                     batch_size=s.batch_size, seed=self._seed("scenarios"), gates=gates)
        A.save_scenarios(self.path(A.SCENARIOS), scenarios)
        return StageResult({"seeds": len(seeds)}, {"scenarios": len(scenarios)}, gates)

    def stage_profiles(self, gateway: Gateway) -> StageResult:
        retriever = self._retriever()
        scenarios = A.load_scenarios(self.path(A.SCENARIOS))
        generator = ProfileGenerator(gateway, retriever, scenarios, self.config.profile_config(),
                                     seed=self._seed("profiles"), workers=self.config.workers)
        batch = generator.generate()
        A.save_profiles(self.path(A.PROFILES), batch.profiles)
        return StageResult({"products": len(retriever.catalog), "scenarios": len(scenarios)},
                           {"profiles": len(batch.profiles), "attempts": batch.attempts}, batch.gates,
                           {"failures": dict(batch.failures)})

    def stage_simulate(self, gateway: Gateway) -> StageResult:
        retriever = self._retriever()
        scenarios = {s.scenario_id: s for s in A.load_scenarios(self.path(A.SCENARIOS))}
        profiles = A.load_profiles(self.path(A.PROFILES))
        ctx = SimContext(gateway, retriever, scenarios, self.config.sim_config())
        batch = simulate_batch(profiles, ctx, seed=self._seed("simulate"), workers=self.config.workers)
        A.save_conversations(self.path(A.CONVERSATIONS), batch.conversations)
        A.save_conversations(self.path(A.ABANDONED), batch.abandoned)
        return StageResult({"profiles": len(profiles)},
                           {"conversations": len(batch.conversations), "abandoned": len(batch.abandoned)},
                           detail=batch.to_json())

    def stage_optimize(self, gateway: Gateway) -> StageResult:
        o = self.config.optimizer
        conversations = A.load_conversations(self.path(A.CONVERSATIONS))
        profiles = {p.profile_id: p for p in A.load_profiles(self.path(A.PROFILES))}
        batch = optimize_batch(conversations, gateway, profiles=profiles, colloquial_prob=o.colloquial_prob,
                               threshold=o.threshold, rewrite_enabled=o.rewrite, seed=self._seed("optimize"),
                               workers=self.config.workers)
        A.save_conversations(self.path(A.REVIEWED), batch.reviewed)
        A.save_conversations(self.path(A.CORPUS), batch.retained)
        return StageResult({"conversations": len(conversations)},
                           {"reviewed": len(batch.reviewed), "corpus": len(batch.retained)}, batch.gates,
                           {"rewrite_failures": batch.rewrite_failures, "colloquial": batch.colloquial})

    def stage_stats(self, gateway: Gateway) -> StageResult:
        corpus = A.load_conversations(self.path(A.CORPUS))
        stats = corpus_stats(corpus)
        self.path(A.STATS).write_text(json.dumps(stats.to_json(), indent=2), encoding="utf-8")
        return StageResult({"conversations": len(corpus)}, {"dialogues": stats.dialogues},
                           detail={"stats": stats.to_json()})

    # -- driver --------------------------------------------------------------

    def _manifest(self) -> RunManifest:
        digest = self.config.config_hash()
        path = self.path(A.MANIFEST)
        if path.exists():
            try:
                existing = RunManifest.load(path)
            except (ValueError, KeyError) as exc:
                logger.warning("ignoring unreadable manifest %s: %s", path, exc)
            else:
                if existing.config_hash == digest:
                    return existing
                logger.info("config changed since the last run; starting a new manifest")
        return RunManifest(f"run-{digest[:12]}", digest, _now())

    def run(self, stages: Sequence[str] = STAGES) -> RunManifest:
        stages = parse_stages(stages)
        self.workdir.mkdir(parents=True, exist_ok=True)
        manifest = self._manifest()
        handlers: dict[str, Callable[[Gateway], StageResult]] = {
            name: getattr(self, f"stage_{name}") for name in STAGES}
        for name in stages:
            started = _now()
            gateway = self._gateway(name)
            logger.info("stage %s starting", name)
            try:
                result = handlers[name](gateway)
            except Exception as exc:
                manifest.stages[name] = {"status": "failed", "started": started, "finished": _now(),
                                         "error": f"{type(exc).__name__}: {exc}",
                                         "ledger": gateway.ledger_report()}
                manifest.updated = _now()
                manifest.save(self.path(A.MANIFEST))
                raise StageFailure(name, f"{type(exc).__name__}: {exc}") from exc
            manifest.stages[name] = {
                "status": "ok", "started": started, "finished": _now(),
                "inputs": result.inputs, "outputs": result.outputs,
                "gates": result.gates.to_json(), "ledger": gateway.ledger_report(),
                "detail": result.detail,
            }
            manifest.updated = _now()
            manifest.save(self.path(A.MANIFEST))
            logger.info("stage %s done: %s", name, result.outputs)
        gates_path = self.path(A.GATES)
        gates_path.write_text(json.dumps(manifest.gate_report().to_json(), indent=2), encoding="utf-8")
        return manifest


def run(config: PipelineConfig, stages: Sequence[str] | str = STAGES) -> RunManifest:
    return Pipeline(config).run(parse_stages(stages) if isinstance(stages, str) else stages)
