from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path

import pytest

from mcrsynth.catalog import Catalog, HashEmbedder, Retriever, build_index, ingest_file, summarize_catalog
from mcrsynth.gateway import Gateway, MockProvider
from mcrsynth.pipeline import PipelineConfig, run
from mcrsynth.pipeline.artifacts import load_scenarios
from mcrsynth.records import Conversation, Product, Scenario, Turn

DATA = Path(str(files("mcrsynth") / "data"))
FIXTURES = Path(__file__).parent / "fixtures"


def make_gateway(seed: int = 0, **kwargs) -> tuple[Gateway, MockProvider]:
    gateway_kwargs = {k: kwargs.pop(k) for k in ("max_concurrency", "json_retries", "image_root",
                                                 "temperatures", "pricing") if k in kwargs}
    provider = MockProvider(seed, **kwargs)
    return Gateway(provider, sleep=lambda _: None, **gateway_kwargs), provider


def product(pid: str, summary: str, title: str | None = None) -> Product:
    return Product(product_id=pid, title=title or summary.split(".")[0], description=summary,
                   image_ref=f"https://img.example/{pid}.png", category_path=["Clothing"], summary=summary)


def retriever_for(products: list[Product], dimension: int = 64, seed: int = 0) -> Retriever:
    catalog = Catalog(products)
    embedder = HashEmbedder(dimension, seed)
    return Retriever(catalog, build_index(catalog, embedder), embedder)


def conversation(cid, golds):
    """Opening turns, then for each gold a user ask followed by a recommendation."""
    turns = [Turn(index=0, speaker="user", action="open", text="hello there"),
             Turn(index=1, speaker="assistant", action="open", text="hi, how can I help?")]
    for gold in golds:
        turns.append(Turn(index=len(turns), speaker="user", action="chitchat", text=f"please find {gold}"))
        turns.append(Turn(index=len(turns), speaker="assistant", action="recommend", text="try this",
                          product_id=gold, image_refs=[f"https://img.example/{gold}.png"]))
    turns.append(Turn(index=len(turns), speaker="user", action="accept", text="thanks"))
    return Conversation(conversation_id=cid, profile_id=f"prof-{cid}", target_product_id=golds[-1],
                        open_mode="text_open", turns=turns, status="accepted")


@pytest.fixture
def gateway_factory():
    return make_gateway


@pytest.fixture(scope="session")
def fixture_config_path() -> Path:
    return DATA / "fixture.yaml"


def fixture_gateway(seed: int = 0, **kwargs) -> tuple[Gateway, MockProvider]:
    """Mock gateway that can read the bundled fixture images."""
    return make_gateway(seed, image_root=DATA / "fixture", **kwargs)


_FIXTURE_CATALOG: list[dict] = []


def fixture_retriever(**kwargs) -> Retriever:
    """Bundled 50-product catalog, summarized by the mock and indexed with the hash embedder."""
    if not _FIXTURE_CATALOG:
        catalog, _ = ingest_file(DATA / "fixture" / "catalog.jsonl")
        summarize_catalog(catalog, fixture_gateway()[0], workers=1)
        _FIXTURE_CATALOG.extend(p.to_json() for p in catalog)
    catalog = Catalog(Product.model_validate(row) for row in _FIXTURE_CATALOG)
    embedder = HashEmbedder(64, 0)
    return Retriever(catalog, build_index(catalog, embedder), embedder, **kwargs)


def seed_scenarios() -> list[Scenario]:
    return load_scenarios(DATA / "seed_scenarios.jsonl")


def fixture_config(workdir: Path, **overrides) -> PipelineConfig:
    config = PipelineConfig.load(DATA / "fixture.yaml")
    config = config.model_copy(update={"workdir": str(workdir)})
    for section, values in overrides.items():
        if isinstance(values, dict):
            current = getattr(config, section)
            config = config.model_copy(update={section: current.model_copy(update=values)})
        else:
            config = config.model_copy(update={section: values})
    return config


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """One full offline pipeline run over the bundled fixture, shared by tests."""
    workdir = tmp_path_factory.mktemp("fixture-run")
    manifest = run(fixture_config(workdir), "all")
    return workdir, manifest


def read_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
