"""End-to-end orchestration: baseline leg, RAG leg, scoring, and resumable runs."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict
from pathlib import Path
from typing import Callable

from .config import PipelineConfig
from .corpus import QAPair, load_dataset
from .entities import extract_entities, translate_entities
from .evaluation import (
    AggregateReport,
    EvalScore,
    GatewayTokenEmbedder,
    aggregate,
    score_answer,
)
from .gateway import GatewayError, LlmGateway
from .generation import GenerationError, convert_declarative, generate_answer
from .ranking import rank_triples
from .trace import (
    COMPLETE,
    FAILED,
    SKIPPED,
    TraceRecord,
    load_trace,
    save_trace,
    trace_path,
)
from .umls import UmlsClient, retrieve_graph

log = logging.getLogger(__name__)


class PipelineAbortError(Exception):
    """Circuit breaker tripped: too large a fraction of items failed."""


def run_item(
    pair: QAPair,
    config: PipelineConfig,
    gateway: LlmGateway,
    kb_client: UmlsClient,
    embedder: GatewayTokenEmbedder | None = None,
    rag: bool = True,
    clock: Callable[[], float] = time.perf_counter,
) -> TraceRecord:
    """Run one question through baseline and (optionally) the full RAG leg.

    Stage failures degrade per module rules and land in warnings; only
    generation or scoring errors mark the item failed.
    """
    record = TraceRecord(
        question_id=pair.id, question_ja=pair.question_ja, reference_ja=pair.reference_ja
    )
    warnings = record.warnings
    status = record.stage_status
    timings = record.timings_ms
    if embedder is None:
        embedder = GatewayTokenEmbedder(gateway)

    def timed(stage: str, fn):
        start = clock()
        try:
            return fn()
        finally:
            timings[stage] = round((clock() - start) * 1000.0, 3)

    knowledge = None
    try:
        # baseline leg: question only, no retrieval machinery touched
        baseline = timed(
            "generation_baseline",
            lambda: generate_answer(pair.id, pair.question_ja, None, gateway),
        )
        record.answer_baseline = baseline.answer
        status["generation_baseline"] = COMPLETE

        if rag:
            n0 = len(warnings)
            entity_set = timed(
                "extraction",
                lambda: extract_entities(pair.id, pair.question_ja, gateway, warnings),
            )
            status["extraction"] = FAILED if len(warnings) > n0 else COMPLETE

            if entity_set.entities:
                n0 = len(warnings)
                entity_set = timed(
                    "translation",
                    lambda: translate_entities(entity_set, gateway, warnings),
                )
                status["translation"] = FAILED if len(warnings) > n0 else COMPLETE
            else:
                status["translation"] = SKIPPED
            record.entities = [
                {"surface_ja": e.surface_ja, "translation_en": e.translation_en}
                for e in entity_set.entities
            ]

            if any(e.translation_en for e in entity_set.entities):
                n0 = len(warnings)
                graph = timed(
                    "retrieval",
                    lambda: retrieve_graph(
                        entity_set, kb_client, config.max_relations, warnings
                    ),
                )
                if len(warnings) > n0:
                    status["retrieval"] = FAILED
                elif not graph.triples:
                    status["retrieval"] = "empty"
                else:
                    status["retrieval"] = COMPLETE
            else:
                from .umls import EntityGraph

                graph = EntityGraph(question_id=pair.id)
                status["retrieval"] = SKIPPED
            record.triple_counts = dict(graph.per_entity_counts)

            if graph.triples:
                try:
                    ranked = timed(
                        "ranking",
                        lambda: rank_triples(
                            pair.question_ja, graph, config.top_k, gateway, warnings
                        ),
                    )
                    status["ranking"] = COMPLETE
                except GatewayError as exc:
                    warnings.append(f"ranking failed ({exc}); continuing without triples")
                    ranked = []
                    status["ranking"] = FAILED
            else:
                ranked = []
                status["ranking"] = SKIPPED
            record.ranked_triples = [
                {**asdict(st.triple), "serialized": st.serialized, "score": st.score}
                for st in ranked
            ]

            if ranked:
                knowledge = timed(
                    "conversion",
                    lambda: convert_declarative(pair.id, ranked, gateway, warnings),
                )
                status["conversion"] = FAILED if knowledge.fallback else COMPLETE
            else:
                from .generation import DeclarativeKnowledge

                knowledge = DeclarativeKnowledge(question_id=pair.id)
                status["conversion"] = SKIPPED
            record.declarative_sentences = list(knowledge.sentences)

            answer = timed(
                "generation_rag",
                lambda: generate_answer(pair.id, pair.question_ja, knowledge, gateway),
            )
            record.answer_rag = answer.answer
            status["generation_rag"] = COMPLETE
        else:
            for stage in ("extraction", "translation", "retrieval", "ranking", "conversion", "generation_rag"):
                status[stage] = SKIPPED

        def _score() -> None:
            base = score_answer(pair.id, record.answer_baseline, pair.reference_ja, embedder)
            record.scores_baseline = {"rouge_l": base.rouge_l, "bertscore": base.bertscore}
            if record.answer_rag is not None:
                rag_score = score_answer(pair.id, record.answer_rag, pair.reference_ja, embedder)
                record.scores_rag = {"rouge_l": rag_score.rouge_l, "bertscore": rag_score.bertscore}

        timed("scoring", _score)
        status["scoring"] = COMPLETE
    except (GatewayError, GenerationError) as exc:
        record.failed = True
        record.failure = str(exc)
        for stage in ("generation_baseline", "generation_rag", "scoring"):
            status.setdefault(stage, FAILED)
        log.warning("item %s failed: %s", pair.id, exc)

    return record


def aggregate_from_traces(
    traces: list[TraceRecord], meta: dict, rag: bool = True
) -> AggregateReport:
    """Build the per-dataset report; failed items are excluded pairwise and counted."""
    baseline_scores: list[EvalScore] = []
    rag_scores: list[EvalScore] = []
    n_failed = 0
    for t in traces:
        ok = not t.failed and t.scores_baseline is not None
        if rag:
            ok = ok and t.scores_rag is not None
        if not ok:
            n_failed += 1
            continue
        baseline_scores.append(EvalScore(t.question_id, **t.scores_baseline))
        if rag:
            rag_scores.append(EvalScore(t.question_id, **t.scores_rag))
    meta = dict(meta, n_failed=n_failed)
    return aggregate(baseline_scores, rag_scores if rag else None, meta)


def run_dataset(
    dataset_name: str,
    config: PipelineConfig,
    gateway: LlmGateway,
    kb_client: UmlsClient,
    embedder: GatewayTokenEmbedder | None = None,
    limit: int | None = None,
    resume: bool = True,
    rag: bool = True,
    progress: Callable[[TraceRecord], None] | None = None,
) -> tuple[AggregateReport, dict]:
    """Process one dataset with a bounded worker pool, writing one trace per item.

    Already-present trace files are skipped when resume is on; the run aborts
    only when the failed fraction crosses the circuit-breaker threshold.
    """
    try:
        dataset_path = config.datasets[dataset_name]
    except KeyError:
        raise PipelineAbortError(f"no dataset path configured for {dataset_name!r}") from None
    pairs = load_dataset(dataset_path, dataset_name)
    total_available = len(pairs)
    if limit is not None:
        pairs = pairs[:limit]
    partial = len(pairs) < total_available

    trace_dir = config.output_root / dataset_name / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    todo = [p for p in pairs if not (resume and trace_path(trace_dir, p.id).exists())]
    n_skipped = len(pairs) - len(todo)

    fail_lock = threading.Lock()
    fail_count = 0
    breaker_limit = config.circuit_breaker_fraction * len(pairs)

    def _process(pair: QAPair) -> TraceRecord:
        record = run_item(pair, config, gateway, kb_client, embedder=embedder, rag=rag)
        save_trace(record, trace_dir)
        if progress is not None:
            progress(record)
        return record

    aborted = None
    if todo:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(_process, p): p for p in todo}
            for future in as_completed(futures):
                record = future.result()
                if record.failed:
                    with fail_lock:
                        fail_count += 1
                        if fail_count > breaker_limit:
                            aborted = (
                                f"{fail_count}/{len(pairs)} items failed, over the "
                                f"{config.circuit_breaker_fraction:.0%} circuit-breaker threshold"
                            )
                if aborted:
                    for f in futures:
                        f.cancel()
                    break
    if aborted:
        raise PipelineAbortError(aborted)

    traces = [load_trace(trace_path(trace_dir, p.id)) for p in pairs]
    report = aggregate_from_traces(
        traces,
        {
            "dataset_name": dataset_name,
            "model_name": config.endpoints["chat"].model,
            "partial": partial,
        },
        rag=rag,
    )
    summary = {
        "trace_dir": str(trace_dir),
        "n_new": len(todo),
        "n_skipped": n_skipped,
        "n_failed": report.n_failed,
    }
    return report, summary


def rescore_traces(
    trace_dir: str | Path, embedder: GatewayTokenEmbedder
) -> int:
    """Recompute ROUGE-L/BERTScore for every stored trace from its answers."""
    trace_dir = Path(trace_dir)
    count = 0
    for path in sorted(trace_dir.glob("*.json")):
        record = load_trace(path)
        if record.failed or record.answer_baseline is None:
            continue
        base = score_answer(
            record.question_id, record.answer_baseline, record.reference_ja, embedder
        )
        record.scores_baseline = {"rouge_l": base.rouge_l, "bertscore": base.bertscore}
        if record.answer_rag is not None:
            rag_score = score_answer(
                record.question_id, record.answer_rag, record.reference_ja, embedder
            )
            record.scores_rag = {"rouge_l": rag_score.rouge_l, "bertscore": rag_score.bertscore}
        save_trace(record, trace_dir)
        count += 1
    return count
