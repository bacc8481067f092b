"""End-to-end orchestration, configuration and corpus validation."""

from .config import PipelineConfig, build_embedder, build_gateway
from .run import STAGES, Pipeline, RunManifest, parse_stages, run
from .validate import ValidationReport, validate_corpus

__all__ = ["PipelineConfig", "Pipeline", "RunManifest", "STAGES", "ValidationReport", "build_embedder",
           "build_gateway", "parse_stages", "run", "validate_corpus"]
