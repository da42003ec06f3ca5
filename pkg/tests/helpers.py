"""Shared test plumbing: scripted transports, deterministic embeddings, oracles."""

from __future__ import annotations

import hashlib
import json
import re
import threading

import httpx

from kgrag.entities import TRANSLATION_INSTRUCTION

EMBED_DIM = 8


def det_vector(text: str, dim: int = EMBED_DIM) -> list[float]:
    """Deterministic, never-zero embedding derived from the input text."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return [b / 255.0 + 0.01 for b in digest[:dim]]


WARFARIN_TERMS = ["ワルファリン", "服用", "避ける", "野菜"]
WARFARIN_TRANSLATIONS = {
    "ワルファリン": "warfarin",
    "服用": "medication intake",
    "避ける": "avoidance",
    "野菜": "vegetable",
}
WARFARIN_DECLARATIVE = (
    "1.ワルファリンは生理的に凝固因子濃度を低下させる効果がある。\n"
    "2.ワルファリンはクマリン系の抗凝固薬である。"
)
WARFARIN_RAG_ANSWER = (
    "ワルファリンを服用している人が避けるべき野菜は、特にビタミンKを多く含むものです。"
)
DEFAULT_BASELINE_ANSWER = "ビタミンKを含む野菜に注意してください。"

# recorded knowledge-base responses, committed under fixtures/ and replayed in tests
FIXTURES_DIR = __import__("pathlib").Path(__file__).parent / "fixtures"


def _fixture(name: str) -> dict:
    return json.loads((FIXTURES_DIR / name).read_text(encoding="utf-8"))


SEARCH_WARFARIN_BODY = _fixture("umls_search_warfarin.json")
RELATIONS_C0043031_BODY = _fixture("umls_relations_C0043031.json")
EMPTY_SEARCH_BODY = _fixture("umls_search_empty.json")


class ChatScript:
    """Content rules for a scripted chat endpoint, keyed off the last user message."""

    def __init__(
        self,
        extraction_terms=None,
        translations=None,
        declarative=WARFARIN_DECLARATIVE,
        rag_answer=WARFARIN_RAG_ANSWER,
        baseline_answer=DEFAULT_BASELINE_ANSWER,
    ):
        self.extraction_terms = list(WARFARIN_TERMS if extraction_terms is None else extraction_terms)
        self.translations = dict(WARFARIN_TRANSLATIONS if translations is None else translations)
        self.declarative = declarative
        self.rag_answer = rag_answer
        self.baseline_answer = baseline_answer

    def respond(self, body: dict) -> str:
        content = body["messages"][-1]["content"]
        if "Please extract at most 4 terms" in content:
            return json.dumps({"medical terminologies": self.extraction_terms}, ensure_ascii=False)
        if content.startswith(TRANSLATION_INSTRUCTION):
            term = content.splitlines()[-1].strip()
            return self.translations.get(term, term)
        if "平叙文に変換" in content:
            return self.declarative
        if "- 背景知識:" in content:
            return self.rag_answer
        return self.baseline_answer


def chat_response_body(content: str) -> dict:
    return {
        "choices": [
            {"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}
        ],
        "usage": {"prompt_tokens": 10, "completion_tokens": max(1, len(content))},
    }


def embeddings_response_body(inputs: list[str]) -> dict:
    return {
        "data": [
            {"index": i, "embedding": det_vector(text)} for i, text in enumerate(inputs)
        ],
        "model": "mock-embed",
    }


class TransportStats:
    """Thread-safe request counter plus an in-flight high-water mark."""

    def __init__(self):
        self._lock = threading.Lock()
        self.requests = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.bodies: list[dict] = []

    def enter(self, body: dict | None = None) -> None:
        with self._lock:
            self.requests += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            if body is not None:
                self.bodies.append(body)

    def leave(self) -> None:
        with self._lock:
            self.in_flight -= 1


_CUI_PATH_RE = re.compile(r"/content/current/CUI/(C\d{7})/relations$")


def make_mock_transport(
    chat_script: ChatScript | None = None,
    stats: TransportStats | None = None,
    search_bodies: dict[str, dict] | None = None,
    relations_bodies: dict[str, dict] | None = None,
    fail_paths: tuple[str, ...] = (),
) -> httpx.MockTransport:
    """Transport serving scripted chat/embeddings plus UMLS search/relations.

    `fail_paths` substrings force an HTTP 500 on matching request paths.
    """
    chat_script = chat_script or ChatScript()
    search_bodies = search_bodies if search_bodies is not None else {
        "warfarin": SEARCH_WARFARIN_BODY
    }
    relations_bodies = relations_bodies if relations_bodies is not None else {
        "C0043031": RELATIONS_C0043031_BODY
    }

    def handler(request: httpx.Request) -> httpx.Response:
        path = request.url.path
        body = json.loads(request.content) if request.content else None
        if stats is not None:
            stats.enter(
                {"path": path, "body": body, "query": dict(request.url.params)}
            )
        try:
            if any(frag in path for frag in fail_paths):
                return httpx.Response(500, text="scripted failure")
            if path.endswith("/chat/completions"):
                return httpx.Response(200, json=chat_response_body(chat_script.respond(body)))
            if path.endswith("/embeddings"):
                return httpx.Response(200, json=embeddings_response_body(body["input"]))
            if path.endswith("/search/current"):
                term = request.url.params.get("string", "")
                return httpx.Response(
                    200, json=search_bodies.get(term, EMPTY_SEARCH_BODY)
                )
            match = _CUI_PATH_RE.search(path)
            if match:
                found = relations_bodies.get(match.group(1))
                if found is None:
                    return httpx.Response(404, text="no relations")
                return httpx.Response(200, json=found)
            return httpx.Response(404, text=f"unknown path {path}")
        finally:
            if stats is not None:
                stats.leave()

    return httpx.MockTransport(handler)


# -- independent oracles ------------------------------------------------------


def lcs_bitset(a, b) -> int:
    """Bit-parallel LCS length, independent of the package's dynamic program."""
    positions: dict = {}
    for i, ch in enumerate(a):
        positions[ch] = positions.get(ch, 0) | (1 << i)
    row = 0
    for ch in b:
        matches = positions.get(ch, 0)
        union = row | matches
        row = union & ~(union - ((row << 1) | 1))
    return bin(row).count("1")


def brute_force_top_k(scores: list[float], k: int) -> list[int]:
    """Indices of the k best scores, score-descending, original order on ties."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:k]
