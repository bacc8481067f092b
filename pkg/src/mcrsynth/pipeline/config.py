"""Pipeline configuration: a YAML file validated into typed sections.

Relative input paths resolve against the directory holding the config file;
the work directory resolves against the current directory.
Credentials never live in the file; live providers name the environment
variable that holds their key.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..catalog import HashEmbedder, HttpEmbedder, IngestConfig
from ..dialogue import SimConfig
from ..errors import ConfigError
from ..gateway import Gateway, MockBehaviour, MockProvider, OpenAICompatEmbeddingClient, OpenAICompatProvider, Pricing
from ..profiles import ProfileConfig
from ..seeding import derive_seed

# fields that change how fast a run goes, never what it produces
NON_SEMANTIC = ("workers", "workdir")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MockProviderConfig(Section):
    kind: Literal["mock"] = "mock"
    seed: Optional[int] = None
    script: Optional[str] = None
    behaviour: dict[str, Any] = Field(default_factory=dict)


class OpenAIProviderConfig(Section):
    kind: Literal["openai"]
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = Field(60.0, gt=0)


ProviderConfig = Union[MockProviderConfig, OpenAIProviderConfig]


class PricingConfig(Section):
    prompt_per_1k: float = Field(0.0, ge=0)
    completion_per_1k: float = Field(0.0, ge=0)
    per_image: float = Field(0.0, ge=0)


class GatewayConfig(Section):
    max_concurrency: int = Field(8, ge=1)
    max_attempts: int = Field(3, ge=1)
    backoff: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    json_retries: int = Field(2, ge=0)


class EmbedderConfig(Section):
    kind: Literal["hash", "openai"] = "hash"
    dimension: int = Field(64, ge=1)
    seed: Optional[int] = None
    base_url: Optional[str] = None
    model: Optional[str] = None
    api_key_env: str = "OPENAI_API_KEY"
    batch_size: int = Field(64, ge=1)

    @model_validator(mode="after")
    def _live_needs_endpoint(self) -> "EmbedderConfig":
        if self.kind == "openai" and not (self.base_url and self.model):
            raise ValueError("openai embedder needs base_url and model")
        return self


class CatalogSection(Section):
    input: str
    image_root: Optional[str] = None
    category_whitelist: list[str] = Field(default_factory=list)
    max_products: Optional[int] = Field(None, ge=1)
    sample: Literal["first", "random"] = "first"
    summary_cap: int = Field(400, ge=20)
    check_images: bool = True


class ScenarioSection(Section):
    seeds: str
    target_count: int = Field(40, ge=1)
    tau: float = Field(0.6, gt=0, lt=1)
    stall_limit: int = Field(20, ge=1)
    batch_size: int = Field(8, ge=1)


class ProfileSection(Section):
    count: int = Field(40, ge=1)
    tau: float = Field(0.6, gt=0, lt=1)
    candidate_pool: int = Field(20, ge=1)
    backstory_retries: int = Field(3, ge=0)


class SimulationSection(Section):
    round_limit: int = Field(5, ge=1)
    chitchat_p0: float = Field(0.4, ge=0, le=1)
    chitchat_decay: float = Field(0.6, gt=0, le=1)
    multimodal_rate: float = Field(0.3, ge=0, le=1)
    retrieval_k: int = Field(10, ge=1)
    rerank_m: Optional[int] = Field(None, ge=1)


class OptimizerSection(Section):
    rewrite: bool = True
    colloquial_prob: float = Field(0.35, ge=0, le=1)
    threshold: int = Field(5, ge=0, le=6)


class EvalSection(Section):
    n_values: list[int] = Field(default_factory=lambda: [10, 20])
    points: Literal["recommend", "final"] = "recommend"
    judge_rounds: int = Field(3, ge=1)


class PipelineConfig(Section):
    seed: int = 0
    workdir: str = "run"
    workers: int = Field(8, ge=1)
    providers: dict[str, ProviderConfig] = Field(
        default_factory=lambda: {"default": MockProviderConfig()})
    routes: dict[str, str] = Field(default_factory=dict)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    temperatures: dict[str, float] = Field(default_factory=dict)
    pricing: dict[str, PricingConfig] = Field(default_factory=dict)
    embedder: EmbedderConfig = Field(default_factory=EmbedderConfig)
    catalog: CatalogSection
    scenarios: ScenarioSection
    profiles: ProfileSection = Field(default_factory=ProfileSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    @model_validator(mode="after")
    def _check_refs(self) -> "PipelineConfig":
        if "default" not in self.providers:
            raise ValueError("providers must define 'default'")
        for tag, name in self.routes.items():
            if name not in self.providers:
                raise ValueError(f"route {tag!r} targets unknown provider {name!r}")
        for tag, t in self.temperatures.items():
            if not 0 <= t <= 2:
                raise ValueError(f"temperature for {tag!r} must lie in [0, 2]")
        return self

    # -- loading -----------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | Path = ".") -> "PipelineConfig":
        try:
            config = cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return config.resolved(Path(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(data, path.parent)

    def resolved(self, base: Path) -> "PipelineConfig":
        """Copy with every path made absolute and checked for existence."""

        def fix(p: str | None, must_exist: bool = True) -> str | None:
            if p is None:
                return None
            full = Path(p) if Path(p).is_absolute() else (base / p)
            full = full.resolve()
            if must_exist and not full.exists():
                raise ConfigError(f"path does not exist: {full}")
            return str(full)

        data = self.model_copy(deep=True)
        data.workdir = str(Path(self.workdir).resolve())
        data.catalog.input = fix(self.catalog.input) or ""
        data.catalog.image_root = fix(self.catalog.image_root)
        data.scenarios.seeds = fix(self.scenarios.seeds) or ""
        for provider in data.providers.values():
            if isinstance(provider, MockProviderConfig) and provider.script:
                provider.script = fix(provider.script)
        return data

    def semantic_dict(self) -> dict[str, Any]:
        data = self.model_dump(mode="json")
        for key in NON_SEMANTIC:
            data.pop(key, None)
        data["gateway"].pop("max_concurrency", None)
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # -- factories ---------------------------------------------------------

    def ingest_config(self) -> IngestConfig:
        return IngestConfig(category_whitelist=tuple(self.catalog.category_whitelist),
                            max_products=self.catalog.max_products, sample=self.catalog.sample,
                            seed=derive_seed(self.seed, "ingest"), image_root=self.catalog.image_root,
                            check_images=self.catalog.check_images)

    def sim_config(self) -> SimConfig:
        return SimConfig(**self.simulation.model_dump())

    def profile_config(self) -> ProfileConfig:
        return ProfileConfig(count=self.profiles.count, tau=self.profiles.tau,
                             candidate_pool=self.profiles.candidate_pool,
                             backstory_retries=self.profiles.backstory_retries)


def build_provider(name: str, cfg: ProviderConfig, seed: int):
    if isinstance(cfg, OpenAIProviderConfig):
        return OpenAICompatProvider(cfg.base_url, cfg.model, api_key_env=cfg.api_key_env,
                                    timeout=cfg.timeout, provider_id=name)
    mock_seed = cfg.seed if cfg.seed is not None else derive_seed(seed, "mock", name)
    behaviour = MockBehaviour.from_dict(cfg.behaviour)
    if cfg.script:
        return MockProvider.from_script_file(cfg.script, seed=mock_seed, behaviour=behaviour,
                                             record_requests=False)
    return MockProvider(mock_seed, behaviour=behaviour, record_requests=False)


def build_gateway(config: PipelineConfig, *, seed: int | None = None,
                  extra_routes: dict[str, str] | None = None) -> Gateway:
    """Fresh gateway (and fresh mock state) seeded from ``seed`` or the config seed."""
    seed = config.seed if seed is None else seed
    providers = {name: build_provider(name, cfg, seed) for name, cfg in config.providers.items()}
    routes = {**config.routes, **(extra_routes or {})}
    pricing = {name: Pricing(**p.model_dump()) for name, p in config.pricing.items()}
    g = config.gateway
    return Gateway(providers, routes, max_concurrency=g.max_concurrency, max_attempts=g.max_attempts,
                   backoff=g.backoff, json_retries=g.json_retries, image_root=config.catalog.image_root,
                   pricing=pricing, temperatures=config.temperatures)


def build_embedder(config: PipelineConfig):
    e = config.embedder
    if e.kind == "hash":
        return HashEmbedder(e.dimension, e.seed if e.seed is not None else derive_seed(config.seed, "embed"))
    client = OpenAICompatEmbeddingClient(e.base_url or "", e.model or "", api_key_env=e.api_key_env)
    return HttpEmbedder(client, e.batch_size)
