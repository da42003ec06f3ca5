"""Command-line interface for the Japanese medical KG-RAG pipeline.

Exit codes: 0 success, 1 partial (per-item failures recorded), 2 fatal.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .caching import DiskCache
from .config import ConfigError, PipelineConfig, load_config
from .corpus import compute_stats, load_dataset
from .evaluation import GatewayTokenEmbedder
from .gateway import LlmGateway
from .pipeline import PipelineAbortError, aggregate_from_traces, rescore_traces, run_dataset
from .report import emit_report, report_settings
from .trace import load_trace, load_traces, trace_path
from .umls import UmlsClient

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2


def _build_gateway(config: PipelineConfig) -> LlmGateway:
    return LlmGateway(
        endpoints=config.endpoints,
        cache=DiskCache(config.cache_root / "llm"),
        max_attempts=config.max_attempts,
        backoff_base=config.backoff_base,
    )


def _build_kb_client(config: PipelineConfig) -> UmlsClient:
    return UmlsClient(
        cache=DiskCache(config.cache_root / "umls"),
        base_url=config.knowledge_base.base_url,
        credential_env=config.knowledge_base.credential_env,
        requests_per_second=config.knowledge_base.requests_per_second,
        max_attempts=config.max_attempts,
        backoff_base=config.backoff_base,
    )


def _load_config_or_die(path: str) -> PipelineConfig:
    try:
        return load_config(path)
    except (ConfigError, OSError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Knowledge-graph RAG pipeline for Japanese medical QA."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def _run_impl(config_path, datasets, limit, top_k, workers, resume, rag) -> None:
    config = _load_config_or_die(config_path)
    if top_k is not None:
        config.top_k = top_k
    if workers is not None:
        config.workers = workers
    names = list(datasets) if datasets else sorted(config.datasets)
    if not names:
        click.echo("fatal: no datasets configured", err=True)
        sys.exit(EXIT_FATAL)

    gateway = _build_gateway(config)
    kb_client = _build_kb_client(config)
    embedder = GatewayTokenEmbedder(gateway) if "token_embedding" in config.endpoints else None

    reports = []
    any_failed = False
    try:
        for name in names:
            def _progress(record, name=name):
                mark = "FAIL" if record.failed else "ok"
                click.echo(f"[{name}] {record.question_id}: {mark}")

            report, summary = run_dataset(
                name,
                config,
                gateway,
                kb_client,
                embedder=embedder,
                limit=limit,
                resume=resume,
                rag=rag,
                progress=_progress,
            )
            reports.append(report)
            any_failed = any_failed or report.n_failed > 0
            click.echo(
                f"[{name}] done: {summary['n_new']} new, {summary['n_skipped']} resumed, "
                f"{summary['n_failed']} failed"
            )
        paths = emit_report(reports, config.output_root / "reports", report_settings(config))
        click.echo(f"report: {paths['txt']}")
    except PipelineAbortError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    finally:
        gateway.close()
        kb_client.close()
    sys.exit(EXIT_PARTIAL if any_failed else EXIT_OK)


def _run_options(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path(exists=True))(fn)
    fn = click.option("--dataset", "datasets", multiple=True, help="Dataset name; repeatable.")(fn)
    fn = click.option("--limit", type=int, default=None, help="Process only the first N items.")(fn)
    fn = click.option("--top-k", type=int, default=None)(fn)
    fn = click.option("--workers", type=int, default=None)(fn)
    fn = click.option("--resume/--no-resume", default=True, show_default=True)(fn)
    return fn


@main.command()
@_run_options
@click.option("--no-rag", is_flag=True, help="Baseline only; skip the RAG leg.")
def run(config_path, datasets, limit, top_k, workers, resume, no_rag) -> None:
    """Run the full pipeline (baseline + RAG) over the configured datasets."""
    _run_impl(config_path, datasets, limit, top_k, workers, resume, rag=not no_rag)


@main.command()
@_run_options
def baseline(config_path, datasets, limit, top_k, workers, resume) -> None:
    """Run the unaugmented baseline only."""
    _run_impl(config_path, datasets, limit, top_k, workers, resume, rag=False)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "datasets", multiple=True)
def eval_cmd(config_path, datasets) -> None:
    """Rescore existing traces from their stored answers."""
    config = _load_config_or_die(config_path)
    if "token_embedding" not in config.endpoints:
        click.echo("fatal: eval requires a token_embedding endpoint", err=True)
        sys.exit(EXIT_FATAL)
    gateway = _build_gateway(config)
    embedder = GatewayTokenEmbedder(gateway)
    names = list(datasets) if datasets else sorted(config.datasets)
    try:
        for name in names:
            trace_dir = config.output_root / name / "traces"
            count = rescore_traces(trace_dir, embedder)
            click.echo(f"[{name}] rescored {count} traces")
    finally:
        gateway.close()
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "datasets", multiple=True)
def stats(config_path, datasets) -> None:
    """Print dataset sizes and mean question/answer lengths."""
    config = _load_config_or_die(config_path)
    names = list(datasets) if datasets else sorted(config.datasets)
    click.echo(f"{'Dataset':<14} {'Size':>6} {'Question Length':>16} {'Answer Length':>14}")
    for name in names:
        pairs = load_dataset(config.datasets[name], name)
        ds_stats = compute_stats(pairs)
        flag = " (chars/2 heuristic)" if ds_stats.heuristic else ""
        click.echo(
            f"{name:<14} {ds_stats.size:>6} {ds_stats.mean_question_length:>16.1f} "
            f"{ds_stats.mean_answer_length:>14.1f}{flag}"
        )
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "datasets", multiple=True)
@click.option("--no-rag", is_flag=True, help="Aggregate baseline scores only.")
def report(config_path, datasets, no_rag) -> None:
    """Aggregate existing traces into the report files (CSV, text table, figure)."""
    config = _load_config_or_die(config_path)
    names = list(datasets) if datasets else sorted(config.datasets)
    reports = []
    for name in names:
        traces = load_traces(config.output_root / name / "traces")
        if not traces:
            click.echo(f"[{name}] no traces found, skipping", err=True)
            continue
        reports.append(
            aggregate_from_traces(
                traces,
                {"dataset_name": name, "model_name": config.endpoints["chat"].model},
                rag=not no_rag,
            )
        )
    paths = emit_report(reports, config.output_root / "reports", report_settings(config))
    click.echo(f"report: {paths['txt']}")
    click.echo(f"figure: {paths['figure']}")
    sys.exit(EXIT_OK)


@main.group()
def trace() -> None:
    """Inspect per-question trace records."""


@trace.command("show")
@click.argument("question_id")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def trace_show(question_id, config_path) -> None:
    """Pretty-print one trace record by question id."""
    config = _load_config_or_die(config_path)
    for name in sorted(config.datasets):
        path = trace_path(config.output_root / name / "traces", question_id)
        if path.exists():
            record = load_trace(path)
            click.echo(record.to_json())
            sys.exit(EXIT_OK)
    click.echo(f"fatal: no trace found for {question_id!r}", err=True)
    sys.exit(EXIT_FATAL)


if __name__ == "__main__":
    main()
