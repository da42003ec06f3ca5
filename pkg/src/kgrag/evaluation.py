"""Answer-quality metrics and per-dataset aggregation.

ROUGE-L works on character tokens (whitespace segmentation is meaningless for
Japanese). BERTScore is greedy max-cosine matching over token embeddings with
no IDF weighting and no baseline rescaling; token vectors come from a
pluggable embedding provider. Both scores live on a 0-100 scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gateway import EmbeddingCall, LlmGateway

log = logging.getLogger(__name__)


class AggregationError(Exception):
    """Baseline and RAG score lists do not cover the same question ids."""


@dataclass(frozen=True)
class EvalScore:
    question_id: str
    rouge_l: float
    bertscore: float


@dataclass(frozen=True)
class AggregateReport:
    dataset_name: str
    model_name: str
    n_evaluated: int
    n_failed: int
    baseline_rouge_l: float
    baseline_bertscore: float
    rag_rouge_l: float | None = None
    rag_bertscore: float | None = None
    delta_rouge_l: float | None = None
    delta_bertscore: float | None = None
    partial: bool = False


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest-common-subsequence length, O(len(a)*len(b)) time, O(min) memory."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def _char_tokens(text: str) -> list[str]:
    return list(text.strip())


def rouge_l(candidate: str, reference: str) -> float:
    """Character-level ROUGE-L F1 on a 0-100 scale."""
    cand = _char_tokens(candidate)
    ref = _char_tokens(reference)
    if not cand and not ref:
        return 100.0
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(cand)
    return 100.0 * (2 * precision * recall) / (precision + recall)


def bertscore(
    candidate_tokens: Sequence[tuple[str, Sequence[float]]],
    reference_tokens: Sequence[tuple[str, Sequence[float]]],
) -> float:
    """Greedy max-cosine matching F1 over token embeddings, 0-100 scale."""
    if not candidate_tokens or not reference_tokens:
        raise ValueError("token lists must be non-empty")
    cand = np.asarray([vec for _, vec in candidate_tokens], dtype=float)
    ref = np.asarray([vec for _, vec in reference_tokens], dtype=float)
    if cand.ndim != 2 or ref.ndim != 2 or cand.shape[1] != ref.shape[1]:
        raise ValueError("all token vectors must share one dimension")
    cand_norm = np.linalg.norm(cand, axis=1, keepdims=True)
    ref_norm = np.linalg.norm(ref, axis=1, keepdims=True)
    if np.any(cand_norm == 0) or np.any(ref_norm == 0):
        raise ValueError("token vectors must be non-zero")
    sim = (cand / cand_norm) @ (ref / ref_norm).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall <= 0:
        return 0.0
    # cosines can be negative; the reported score is clamped onto the 0-100 scale
    f1 = (2 * precision * recall) / (precision + recall)
    return min(100.0, max(0.0, 100.0 * f1))


class GatewayTokenEmbedder:
    """Character-token embedding provider backed by the gateway's embeddings endpoint."""

    def __init__(self, gateway: LlmGateway, endpoint_id: str = "token_embedding", batch_size: int = 64):
        self.gateway = gateway
        self.endpoint_id = endpoint_id
        self.batch_size = batch_size

    @property
    def model_name(self) -> str:
        return self.gateway.model_for(self.endpoint_id)

    def embed_tokens(self, text: str) -> list[tuple[str, tuple[float, ...]]]:
        tokens = [ch for ch in text if not ch.isspace()]
        if not tokens:
            return []
        vectors: list[tuple[float, ...]] = []
        for start in range(0, len(tokens), self.batch_size):
            batch = tuple(tokens[start : start + self.batch_size])
            result = self.gateway.embed_texts(
                EmbeddingCall(
                    model_name=self.model_name, inputs=batch, endpoint_id=self.endpoint_id
                )
            )
            vectors.extend(result.vectors)
        return list(zip(tokens, vectors))


def bertscore_texts(candidate: str, reference: str, embedder: GatewayTokenEmbedder) -> float:
    cand_tokens = embedder.embed_tokens(candidate)
    ref_tokens = embedder.embed_tokens(reference)
    if not cand_tokens and not ref_tokens:
        return 100.0
    if not cand_tokens or not ref_tokens:
        return 0.0
    return bertscore(cand_tokens, ref_tokens)


def score_answer(
    question_id: str, answer: str, reference: str, embedder: GatewayTokenEmbedder
) -> EvalScore:
    return EvalScore(
        question_id=question_id,
        rouge_l=rouge_l(answer, reference),
        bertscore=bertscore_texts(answer, reference, embedder),
    )


def format_delta(delta: float) -> str:
    """Signed point difference in the results table's parenthesized style."""
    return f"({delta:+.2f}%)"


def aggregate(
    scores_baseline: list[EvalScore],
    scores_rag: list[EvalScore] | None,
    meta: dict,
) -> AggregateReport:
    """Means over the pairwise-evaluated set plus RAG-minus-baseline point deltas."""
    baseline_by_id = {s.question_id: s for s in scores_baseline}
    if len(baseline_by_id) != len(scores_baseline):
        raise AggregationError("duplicate question ids in baseline scores")

    def _means(scores: list[EvalScore]) -> tuple[float, float]:
        n = len(scores)
        return (
            sum(s.rouge_l for s in scores) / n,
            sum(s.bertscore for s in scores) / n,
        )

    if not scores_baseline:
        raise AggregationError("no evaluated items to aggregate")
    base_rouge, base_bert = _means(scores_baseline)

    rag_rouge = rag_bert = delta_rouge = delta_bert = None
    if scores_rag is not None:
        rag_ids = {s.question_id for s in scores_rag}
        if rag_ids != set(baseline_by_id):
            diff = sorted(rag_ids.symmetric_difference(baseline_by_id))
            raise AggregationError(f"baseline/rag id mismatch: {diff}")
        rag_rouge, rag_bert = _means(scores_rag)
        delta_rouge = rag_rouge - base_rouge
        delta_bert = rag_bert - base_bert

    return AggregateReport(
        dataset_name=meta["dataset_name"],
        model_name=meta["model_name"],
        n_evaluated=len(scores_baseline),
        n_failed=int(meta.get("n_failed", 0)),
        baseline_rouge_l=base_rouge,
        baseline_bertscore=base_bert,
        rag_rouge_l=rag_rouge,
        rag_bertscore=rag_bert,
        delta_rouge_l=delta_rouge,
        delta_bertscore=delta_bert,
        partial=bool(meta.get("partial", False)),
    )
