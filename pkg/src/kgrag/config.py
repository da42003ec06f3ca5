"""Pipeline configuration: endpoints, knobs, and dataset paths from a YAML file."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .gateway import EndpointConfig

_SECRET_KEYS = {"credential", "api_key", "apikey", "token", "secret"}


class ConfigError(Exception):
    pass


@dataclass
class KnowledgeBaseSettings:
    base_url: str
    credential_env: str = "UMLS_API_KEY"
    requests_per_second: float = 15.0


@dataclass
class PipelineConfig:
    endpoints: dict[str, EndpointConfig]
    knowledge_base: KnowledgeBaseSettings
    datasets: dict[str, Path]
    top_k: int = 10
    max_relations: int = 50
    workers: int = 4
    cache_root: Path = Path("cache")
    output_root: Path = Path("runs")
    max_attempts: int = 3
    backoff_base: float = 1.0
    circuit_breaker_fraction: float = 0.5

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.max_relations < 1:
            raise ConfigError("max_relations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _endpoint(endpoint_id: str, raw: dict) -> EndpointConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"endpoint {endpoint_id!r} must be a map")
    inlined = _SECRET_KEYS.intersection(k.lower() for k in raw)
    if inlined:
        raise ConfigError(
            f"endpoint {endpoint_id!r} inlines a credential ({sorted(inlined)}); "
            "name an environment variable via credential_env instead"
        )
    try:
        return EndpointConfig(
            endpoint_id=endpoint_id,
            base_url=raw["base_url"],
            model=raw.get("model", ""),
            credential_env=raw.get("credential_env"),
            max_in_flight=int(raw.get("max_in_flight", 4)),
        )
    except KeyError as exc:
        raise ConfigError(f"endpoint {endpoint_id!r} missing field {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a map")

    endpoints_raw = raw.get("endpoints") or {}
    endpoints: dict[str, EndpointConfig] = {}
    for endpoint_id in ("chat", "embedding", "token_embedding"):
        if endpoint_id in endpoints_raw:
            endpoints[endpoint_id] = _endpoint(endpoint_id, endpoints_raw[endpoint_id])
    if "chat" not in endpoints:
        raise ConfigError("a chat endpoint is required")

    kb_raw = endpoints_raw.get("knowledge_base") or raw.get("knowledge_base") or {}
    inlined = _SECRET_KEYS.intersection(k.lower() for k in kb_raw)
    if inlined:
        raise ConfigError("knowledge_base inlines a credential; use credential_env")
    knowledge_base = KnowledgeBaseSettings(
        base_url=kb_raw.get("base_url", "https://uts-ws.nlm.nih.gov/rest"),
        credential_env=kb_raw.get("credential_env", "UMLS_API_KEY"),
        requests_per_second=float(kb_raw.get("requests_per_second", 15.0)),
    )

    datasets = {
        name: (path.parent / Path(p)).resolve() if not Path(p).is_absolute() else Path(p)
        for name, p in (raw.get("datasets") or {}).items()
    }

    def _path(key: str, default: str) -> Path:
        p = Path(raw.get(key, default))
        return p if p.is_absolute() else (path.parent / p).resolve()

    return PipelineConfig(
        endpoints=endpoints,
        knowledge_base=knowledge_base,
        datasets=datasets,
        top_k=int(raw.get("top_k", 10)),
        max_relations=int(raw.get("max_relations", 50)),
        workers=int(raw.get("workers", 4)),
        cache_root=_path("cache_root", "cache"),
        output_root=_path("output_root", "runs"),
        max_attempts=int(raw.get("max_attempts", 3)),
        backoff_base=float(raw.get("backoff_base", 1.0)),
        circuit_breaker_fraction=float(raw.get("circuit_breaker_fraction", 0.5)),
    )
