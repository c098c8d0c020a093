"""Run configuration: one JSON file, flag overrides win.

The file uses nested sections (``provider``, ``embedder``, ``chunking``,
``retrieval``, ``enrichment``) plus top-level ``seed``, ``timestamp``,
and ``paths``. Unknown keys are errors so typos never silently fall back
to defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from metarag.exceptions import ConfigError
from metarag.mk_summary import DEFAULT_TIMESTAMP


@dataclass
class RunConfig:
    provider_name: str = "mock"
    model: str = "default"
    max_in_flight: int = 4
    mock_script: str = ""
    embedder_name: str = "hash"
    embedder_dim: int = 64
    chunk_size: int = 256
    overlap_ratio: float = 0.10
    k_per_query: int = 3
    context_cap: int = 10
    document_types: str = "research papers"
    users_types: str = "scientists"
    timestamp: str = DEFAULT_TIMESTAMP
    seed: int = 42
    paths: dict = field(default_factory=dict)


_SECTIONS = {
    "provider": {"name": "provider_name", "model": "model",
                 "max_in_flight": "max_in_flight",
                 "mock_script": "mock_script"},
    "embedder": {"name": "embedder_name", "dimension": "embedder_dim"},
    "chunking": {"chunk_size": "chunk_size", "overlap_ratio": "overlap_ratio"},
    "retrieval": {"k_per_query": "k_per_query", "context_cap": "context_cap"},
    "enrichment": {"document_types": "document_types",
                   "users_types": "users_types"},
}


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be an object")
    cfg = RunConfig()
    for section, value in raw.items():
        if section == "seed":
            cfg.seed = int(value)
        elif section == "timestamp":
            cfg.timestamp = str(value)
        elif section == "paths":
            if not isinstance(value, dict):
                raise ConfigError("paths", "must be an object")
            cfg.paths = {str(k): str(v) for k, v in value.items()}
        elif section in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(section, "must be an object")
            for key, raw_value in value.items():
                attr = _SECTIONS[section].get(key)
                if attr is None:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                setattr(cfg, attr, _coerce(f"{section}.{key}", raw_value,
                                           type(getattr(cfg, attr))))
        else:
            raise ConfigError(section, "unknown section")
    return cfg


def _coerce(key: str, value, target):
    try:
        if target is bool:
            return bool(value)
        return target(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc


def build_provider(cfg: RunConfig):
    from metarag.gateway import HttpProvider, MockProvider, MockScript, \
        default_script

    if cfg.provider_name == "mock":
        script = MockScript.load(cfg.mock_script) if cfg.mock_script \
            else default_script()
        if "enrichment" in script.rules and "enrichment_retry" not in script.rules:
            script.rules["enrichment_retry"] = script.rules["enrichment"]
        return MockProvider(script, max_in_flight=cfg.max_in_flight)
    if cfg.provider_name == "http":
        endpoint = os.environ.get("MODEL_ENDPOINT", "")
        if not endpoint:
            raise ConfigError("provider.endpoint",
                              "set MODEL_ENDPOINT for the http provider")
        return HttpProvider(endpoint=endpoint,
                            api_key=os.environ.get("MODEL_API_KEY", ""),
                            model=cfg.model, max_in_flight=cfg.max_in_flight)
    raise ConfigError("provider.name", f"unknown provider {cfg.provider_name!r}")


def build_embedder(cfg: RunConfig):
    from metarag.embedding import HashEmbedder, RemoteEmbedder

    if cfg.embedder_name == "hash":
        return HashEmbedder(dim=cfg.embedder_dim)
    if cfg.embedder_name == "remote":
        endpoint = os.environ.get("EMBED_ENDPOINT", "")
        if not endpoint:
            raise ConfigError("embedder.endpoint",
                              "set EMBED_ENDPOINT for the remote embedder")
        return RemoteEmbedder(endpoint=endpoint, model=cfg.model,
                              dim=cfg.embedder_dim,
                              api_key=os.environ.get("MODEL_API_KEY", ""))
    raise ConfigError("embedder.name", f"unknown embedder {cfg.embedder_name!r}")
