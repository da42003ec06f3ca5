"""Semantic reranking of knowledge triples against the question.

Triples are serialized to plain text, embedded alongside the question, and
scored by cosine similarity; the top-K survive (stable on ties).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .gateway import EmbeddingCall, LlmGateway
from .umls import EntityGraph, KnowledgeTriple

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
EMBED_BATCH_SIZE = 64


@dataclass(frozen=True)
class ScoredTriple:
    triple: KnowledgeTriple
    serialized: str
    score: float


def serialize_triple_text(triple: KnowledgeTriple) -> str:
    return " ".join(
        part.strip() for part in (triple.subject, triple.relation, triple.object)
    )


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape or u.size == 0:
        raise ValueError(f"vectors must share one dimension >= 1, got {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for all-zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def _embed(gateway: LlmGateway, texts: list[str]) -> list[np.ndarray]:
    model = gateway.model_for("embedding")
    vectors: list[np.ndarray] = []
    for start in range(0, len(texts), EMBED_BATCH_SIZE):
        batch = tuple(texts[start : start + EMBED_BATCH_SIZE])
        result = gateway.embed_texts(
            EmbeddingCall(model_name=model, inputs=batch, endpoint_id="embedding")
        )
        vectors.extend(np.asarray(v, dtype=float) for v in result.vectors)
    return vectors


def rank_triples(
    question: str,
    graph: EntityGraph,
    k: int,
    gateway: LlmGateway,
    warnings: list[str] | None = None,
) -> list[ScoredTriple]:
    """Return the k most question-relevant triples, score-descending, stable on ties."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not graph.triples:
        return []

    serialized = [serialize_triple_text(t) for t in graph.triples]
    question_vec = _embed(gateway, [question])[0]
    if not np.any(question_vec):
        if warnings is not None:
            warnings.append("ranking: provider returned a zero vector for the question")
        return []
    triple_vecs = _embed(gateway, serialized)

    scored: list[tuple[int, ScoredTriple]] = []
    for idx, (triple, text, vec) in enumerate(zip(graph.triples, serialized, triple_vecs)):
        if not np.any(vec):
            if warnings is not None:
                warnings.append(f"ranking: zero embedding for triple {text!r}, dropped")
            continue
        scored.append(
            (idx, ScoredTriple(triple=triple, serialized=text, score=cosine_similarity(question_vec, vec)))
        )

    scored.sort(key=lambda pair: (-pair[1].score, pair[0]))
    return [st for _, st in scored[:k]]
