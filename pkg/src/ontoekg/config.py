"""Pipeline configuration: defaults, config file loading, CLI overrides.

Config files are flat JSON objects whose keys are exactly the
PipelineConfig field names. CLI flags override file values. API keys are
never stored in config; only the names of the environment variables are.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError


class ConfigError(ValueError):
    pass


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base_iri: str = "https://example.org/onto#"
    extraction_model: str = "gemini-3-flash-preview"
    entailment_model: str = "claude-opus-4-5"
    embedding_model: str = "text-embedding-3-small"
    fuzzy_threshold: float = Field(default=0.94, ge=0.0, le=1.0)
    max_chars_per_request: int = Field(default=16000, gt=0)
    max_entailment_pairs: int = Field(default=2000, gt=0)
    strict_validation: bool = False
    repair_policy: Literal["auto_add", "drop"] = "auto_add"
    max_concurrent_requests: int = Field(default=4, gt=0)
    embedding_batch_size: int = Field(default=64, gt=0)
    include_annotations: bool = False
    llm_api_key_env: str = "ONTOEKG_LLM_API_KEY"
    embedding_api_key_env: str = "ONTOEKG_EMBEDDING_API_KEY"
    llm_base_url: str | None = None
    embedding_base_url: str | None = None


def load_config(path: str | Path | None = None, **overrides: Any) -> PipelineConfig:
    """Build a PipelineConfig from an optional JSON file plus overrides.

    Overrides with value None are ignored, so CLI flags can be passed
    through unconditionally.
    """
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {path} ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file must hold a flat JSON object: {path}")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
