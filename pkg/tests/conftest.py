import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ChatScript, TransportStats, make_mock_transport

from kgrag.caching import DiskCache
from kgrag.config import KnowledgeBaseSettings, PipelineConfig
from kgrag.gateway import EndpointConfig, LlmGateway
from kgrag.umls import UmlsClient

MOCK_LLM_BASE = "https://mock.test/v1"
MOCK_UMLS_BASE = "https://mock.test/umls"


def make_endpoints(max_in_flight: int = 4) -> dict[str, EndpointConfig]:
    return {
        "chat": EndpointConfig("chat", MOCK_LLM_BASE, "mock-chat", max_in_flight=max_in_flight),
        "embedding": EndpointConfig("embedding", MOCK_LLM_BASE, "mock-embed", max_in_flight=max_in_flight),
        "token_embedding": EndpointConfig(
            "token_embedding", MOCK_LLM_BASE, "mock-token-embed", max_in_flight=max_in_flight
        ),
    }


def make_gateway(tmp_path, transport, backoff_base=0.001, sleep=lambda s: None, **kwargs) -> LlmGateway:
    return LlmGateway(
        endpoints=make_endpoints(kwargs.pop("max_in_flight", 4)),
        cache=DiskCache(tmp_path / "llm-cache"),
        transport=transport,
        backoff_base=backoff_base,
        sleep=sleep,
        **kwargs,
    )


def make_kb_client(tmp_path, transport, **kwargs) -> UmlsClient:
    return UmlsClient(
        cache=DiskCache(tmp_path / "umls-cache"),
        base_url=MOCK_UMLS_BASE,
        transport=transport,
        requests_per_second=0,  # no throttling in tests
        backoff_base=0.001,
        sleep=lambda s: None,
        **kwargs,
    )


def make_config(tmp_path, datasets=None, **overrides) -> PipelineConfig:
    defaults = dict(
        endpoints=make_endpoints(),
        knowledge_base=KnowledgeBaseSettings(base_url=MOCK_UMLS_BASE),
        datasets=datasets or {},
        cache_root=tmp_path / "cache",
        output_root=tmp_path / "runs",
        backoff_base=0.001,
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


@pytest.fixture
def stats():
    return TransportStats()


@pytest.fixture
def mock_transport(stats):
    return make_mock_transport(ChatScript(), stats)


@pytest.fixture
def gateway(tmp_path, mock_transport):
    gw = make_gateway(tmp_path, mock_transport)
    yield gw
    gw.close()


@pytest.fixture
def kb_client(tmp_path, mock_transport):
    client = make_kb_client(tmp_path, mock_transport)
    yield client
    client.close()
