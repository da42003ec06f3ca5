"""UMLS Terminology Services REST client: term search and CUI relation fetch.

Every response is cached on disk keyed by a hash of the request (path plus
sorted query, credential excluded), which doubles as the replayable fixture
format used by the tests. A token-interval rate limiter keeps request volume
under the configured requests-per-second ceiling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable
from urllib.parse import urlencode

import httpx

from .caching import DiskCache
from .entities import EntitySet

log = logging.getLogger(__name__)

CUI_RE = re.compile(r"^C\d{7}$")
DEFAULT_BASE_URL = "https://uts-ws.nlm.nih.gov/rest"
DEFAULT_MAX_RELATIONS = 50


class RetrievalError(Exception):
    """Knowledge-base request failed after retries; the entity is skipped."""


@dataclass(frozen=True)
class ConceptRef:
    concept_id: str
    preferred_name: str
    matched_term: str

    def __post_init__(self):
        if not CUI_RE.match(self.concept_id):
            raise ValueError(f"not a CUI: {self.concept_id!r}")
        if not self.preferred_name:
            raise ValueError("preferred_name must be non-empty")


@dataclass(frozen=True)
class KnowledgeTriple:
    subject: str
    relation: str
    object: str
    source_entity: str
    source_concept: str

    def __post_init__(self):
        if not (self.subject and self.relation and self.object):
            raise ValueError("triple fields must be non-empty")


@dataclass
class EntityGraph:
    question_id: str
    triples: list[KnowledgeTriple] = field(default_factory=list)
    per_entity_counts: dict[str, int] = field(default_factory=dict)


def request_key(path: str, params: dict) -> str:
    """Cache/fixture key: hash of path plus sorted query string, no credential."""
    descriptor = path + "?" + urlencode(sorted(params.items()))
    return hashlib.sha256(descriptor.encode("utf-8")).hexdigest()


class _RateLimiter:
    def __init__(self, per_second: float):
        self._interval = 1.0 / per_second if per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self, sleep: Callable[[float], None] = time.sleep) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            sleep(delay)


class UmlsClient:
    """Search and relations against the UTS REST API with on-disk replay cache."""

    def __init__(
        self,
        cache: DiskCache,
        base_url: str = DEFAULT_BASE_URL,
        credential_env: str = "UMLS_API_KEY",
        transport: httpx.BaseTransport | None = None,
        requests_per_second: float = 15.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.cache = cache
        self.credential_env = credential_env
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._limiter = _RateLimiter(requests_per_second)
        self._client = httpx.Client(transport=transport, timeout=timeout)

    def _get(self, path: str, params: dict) -> dict | None:
        """Cached GET; returns parsed JSON, or None for an empty 404 result."""
        key = request_key(path, params)
        hit = self.cache.get(key)
        if hit is not None:
            body = hit.decode("utf-8")
            return json.loads(body) if body else None

        wire_params = dict(params)
        api_key = os.environ.get(self.credential_env)
        if api_key:
            wire_params["apiKey"] = api_key
        url = self.base_url + path

        delay = self.backoff_base
        last_error = "transport failure"
        descriptor = (path + "?" + urlencode(sorted(params.items()))).encode("utf-8")
        for attempt in range(1, self.max_attempts + 1):
            self._limiter.wait(self._sleep)
            try:
                resp = self._client.get(url, params=wire_params)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    self.cache.put(key, descriptor, resp.content)
                    return json.loads(resp.content)
                if resp.status_code == 404:
                    # UTS answers 404 for concepts without relations / unknown terms
                    self.cache.put(key, descriptor, b"")
                    return None
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                else:
                    raise RetrievalError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < self.max_attempts:
                self._sleep(delay)
                delay *= 2
        raise RetrievalError(f"{url}: {last_error} after {self.max_attempts} attempts")

    def search_concept(self, term_en: str) -> ConceptRef | None:
        """Top-1 concept for an English query term, or None when nothing matches."""
        if not term_en.strip():
            raise ValueError("term must be non-empty")
        normalized = term_en.strip().lower()
        data = self._get("/search/current", {"string": normalized, "pageSize": 5})
        if data is None:
            return None
        results = (data.get("result") or {}).get("results") or []
        for record in results:
            cui = record.get("ui") or ""
            name = record.get("name") or ""
            if cui and cui != "NONE" and name and CUI_RE.match(cui):
                return ConceptRef(concept_id=cui, preferred_name=name, matched_term=term_en)
        return None

    def fetch_relations(
        self,
        concept: ConceptRef,
        limit: int = DEFAULT_MAX_RELATIONS,
        source_entity: str = "",
    ) -> list[KnowledgeTriple]:
        """Up to `limit` (subject, relation, object) triples in service order."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        data = self._get(
            f"/content/current/CUI/{concept.concept_id}/relations",
            {"pageSize": limit},
        )
        if data is None:
            return []
        records = data.get("result") or []
        triples: list[KnowledgeTriple] = []
        for record in records:
            label = record.get("additionalRelationLabel") or record.get("relationLabel") or ""
            related = record.get("relatedIdName") or ""
            if not label.strip() or not related.strip():
                continue  # silently drop incomplete records
            triples.append(
                KnowledgeTriple(
                    subject=concept.preferred_name,
                    relation=label.strip(),
                    object=related.strip(),
                    source_entity=source_entity or concept.matched_term,
                    source_concept=concept.concept_id,
                )
            )
            if len(triples) == limit:
                break
        return triples

    def close(self) -> None:
        self._client.close()


def retrieve_graph(
    entity_set: EntitySet,
    client: UmlsClient,
    max_relations: int = DEFAULT_MAX_RELATIONS,
    warnings: list[str] | None = None,
) -> EntityGraph:
    """Search + relations for every translated entity; per-entity failures never
    abort the question."""
    graph = EntityGraph(question_id=entity_set.question_id)
    for entity in entity_set.entities:
        graph.per_entity_counts[entity.surface_ja] = 0
        if not entity.translation_en:
            continue
        try:
            concept = client.search_concept(entity.translation_en)
            if concept is None:
                continue
            triples = client.fetch_relations(
                concept, limit=max_relations, source_entity=entity.surface_ja
            )
        except RetrievalError as exc:
            if warnings is not None:
                warnings.append(f"retrieval failed for {entity.surface_ja!r}: {exc}")
            continue
        graph.triples.extend(triples)
        graph.per_entity_counts[entity.surface_ja] = len(triples)
    return graph
