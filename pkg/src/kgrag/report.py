"""Report emission: delimited table, aligned text table, and a delta figure.

The text table mirrors the results-table layout with parenthesized signed
point deltas; the CSV carries the same numbers machine-readably; the figure
plots the RAG-minus-baseline deltas per model and dataset.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import AggregateReport, format_delta

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "model",
    "dataset",
    "n_evaluated",
    "n_failed",
    "baseline_rouge_l",
    "baseline_bertscore",
    "rag_rouge_l",
    "rag_bertscore",
    "delta_rouge_l",
    "delta_bertscore",
    "partial",
]


def _sorted(reports: list[AggregateReport]) -> list[AggregateReport]:
    return sorted(reports, key=lambda r: (r.model_name, r.dataset_name))


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def render_csv(reports: list[AggregateReport], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for r in _sorted(reports):
            writer.writerow(
                [
                    r.model_name,
                    r.dataset_name,
                    r.n_evaluated,
                    r.n_failed,
                    _fmt(r.baseline_rouge_l),
                    _fmt(r.baseline_bertscore),
                    _fmt(r.rag_rouge_l),
                    _fmt(r.rag_bertscore),
                    _fmt(r.delta_rouge_l),
                    _fmt(r.delta_bertscore),
                    "yes" if r.partial else "no",
                ]
            )


def render_text_table(reports: list[AggregateReport], settings: dict) -> str:
    """Aligned plain-text table with "<mean> (<signed delta>%)" RAG cells."""
    lines = ["# kg-rag evaluation report"]
    for key in sorted(settings):
        lines.append(f"# {key}: {settings[key]}")
    lines.append("")

    headers = ["Model", "Dataset", "N", "Fail", "ROUGE-L", "ROUGE-L +RAG", "BERTScore", "BERTScore +RAG"]
    rows = [headers]
    for r in _sorted(reports):
        rouge_rag = bert_rag = "-"
        if r.rag_rouge_l is not None:
            rouge_rag = f"{r.rag_rouge_l:.2f} {format_delta(r.delta_rouge_l)}"
            bert_rag = f"{r.rag_bertscore:.2f} {format_delta(r.delta_bertscore)}"
        name = r.dataset_name + (" [partial]" if r.partial else "")
        rows.append(
            [
                r.model_name,
                name,
                str(r.n_evaluated),
                str(r.n_failed),
                f"{r.baseline_rouge_l:.2f}",
                rouge_rag,
                f"{r.baseline_bertscore:.2f}",
                bert_rag,
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_delta_figure(reports: list[AggregateReport], path: Path) -> None:
    """Grouped bars of RAG-minus-baseline point deltas, one group per model/dataset."""
    rows = [r for r in _sorted(reports) if r.delta_rouge_l is not None]
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(rows) + 2), 4.0))
    if rows:
        labels = [f"{r.model_name}\n{r.dataset_name}" for r in rows]
        positions = range(len(rows))
        width = 0.38
        ax.bar(
            [p - width / 2 for p in positions],
            [r.delta_rouge_l for r in rows],
            width,
            label="ROUGE-L delta",
        )
        ax.bar(
            [p + width / 2 for p in positions],
            [r.delta_bertscore for r in rows],
            width,
            label="BERTScore delta",
        )
        ax.set_xticks(list(positions))
        ax.set_xticklabels(labels, fontsize=8)
        ax.legend()
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("RAG - baseline (points)")
    ax.set_title("Baseline vs RAG deltas")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit_report(
    reports: list[AggregateReport], out_dir: str | Path, settings: dict
) -> dict[str, Path]:
    """Write report.csv, report.txt, and deltas.png; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / "report.csv",
        "txt": out_dir / "report.txt",
        "figure": out_dir / "deltas.png",
    }
    render_csv(reports, paths["csv"])
    paths["txt"].write_text(render_text_table(reports, settings), encoding="utf-8")
    render_delta_figure(reports, paths["figure"])
    return paths


def report_settings(config) -> dict:
    """Design-decision defaults stamped into every report header."""
    return {
        "top_k": config.top_k,
        "max_relations": config.max_relations,
        "rouge_tokenization": "character",
        "bertscore_variant": "greedy max-cosine, no idf, no rescaling",
        "baseline_prompt": "answer template with background-knowledge block removed",
        "chat_model": config.endpoints["chat"].model,
        "embedding_model": config.endpoints.get("embedding") and config.endpoints["embedding"].model or "",
        "token_embedding_model": config.endpoints.get("token_embedding")
        and config.endpoints["token_embedding"].model
        or "",
        "umls_relations": "service-default relation set",
    }
