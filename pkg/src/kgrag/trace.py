"""Per-question trace records: every intermediate pipeline artifact for case study."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path

STAGES = (
    "extraction",
    "translation",
    "retrieval",
    "ranking",
    "conversion",
    "generation_baseline",
    "generation_rag",
    "scoring",
)

COMPLETE = "complete"
SKIPPED = "skipped"
FAILED = "failed"


@dataclass
class TraceRecord:
    question_id: str
    question_ja: str
    reference_ja: str
    entities: list[dict] = field(default_factory=list)
    triple_counts: dict[str, int] = field(default_factory=dict)
    ranked_triples: list[dict] = field(default_factory=list)
    declarative_sentences: list[str] = field(default_factory=list)
    answer_baseline: str | None = None
    answer_rag: str | None = None
    scores_baseline: dict | None = None
    scores_rag: dict | None = None
    stage_status: dict[str, str] = field(default_factory=dict)
    timings_ms: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    failed: bool = False
    failure: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TraceRecord":
        return cls(**json.loads(text))


def trace_path(trace_dir: str | Path, question_id: str) -> Path:
    return Path(trace_dir) / f"{question_id}.json"


def save_trace(record: TraceRecord, trace_dir: str | Path) -> Path:
    path = trace_path(trace_dir, record.question_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{record.question_id}.{os.getpid()}.{threading.get_ident()}.tmp"
    tmp.write_text(record.to_json() + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def load_trace(path: str | Path) -> TraceRecord:
    return TraceRecord.from_json(Path(path).read_text(encoding="utf-8"))


def load_traces(trace_dir: str | Path) -> list[TraceRecord]:
    trace_dir = Path(trace_dir)
    if not trace_dir.is_dir():
        return []
    return [load_trace(p) for p in sorted(trace_dir.glob("*.json"))]
