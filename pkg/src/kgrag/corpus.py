"""Dataset loading and statistics for the three Japanese-translated QA corpora.

Files are UTF-8 JSONL, one record per line with keys id / question / answer
and optional question_en / answer_en carrying the English originals. Loader
shims remap a few alternate upstream key spellings per dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

DATASET_NAMES = ("expertqa-bio", "expertqa-med", "liveqa")

# alternate upstream field spellings, applied uniformly across the three corpora
_KEY_ALIASES = {
    "id": ("id", "qid", "question_id"),
    "question": ("question", "question_ja"),
    "answer": ("answer", "answer_ja", "reference", "reference_ja"),
    "question_en": ("question_en", "question_english"),
    "answer_en": ("answer_en", "answer_english", "reference_en"),
}


class DatasetLoadError(Exception):
    """A line failed to parse or validate; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DatasetIntegrityError(Exception):
    """Duplicate ids or other cross-record violations."""


@dataclass
class QAPair:
    id: str
    dataset: str
    question_ja: str
    reference_ja: str
    question_en: str | None = None
    answer_en: str | None = None


@dataclass
class DatasetStats:
    size: int
    mean_question_length: float
    mean_answer_length: float
    heuristic: bool  # True when lengths fall back to characters/2 (no English text)


def _pick(record: dict, field: str):
    for key in _KEY_ALIASES[field]:
        if key in record:
            return record[key]
    return None


def load_dataset(path: str | Path, dataset_name: str) -> list[QAPair]:
    if dataset_name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset {dataset_name!r}, expected one of {DATASET_NAMES}")
    path = Path(path)
    pairs: list[QAPair] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise DatasetLoadError(f"invalid JSON ({exc})", line_number) from exc
            if not isinstance(record, dict):
                raise DatasetLoadError("record is not a map", line_number)
            pair_id = _pick(record, "id")
            question = _pick(record, "question")
            answer = _pick(record, "answer")
            if not pair_id or not isinstance(pair_id, str):
                raise DatasetLoadError("missing or empty id", line_number)
            if not question or not isinstance(question, str):
                raise DatasetLoadError(f"missing question for id {pair_id!r}", line_number)
            if not answer or not isinstance(answer, str):
                raise DatasetLoadError(f"missing answer for id {pair_id!r}", line_number)
            if pair_id in seen_ids:
                raise DatasetIntegrityError(f"duplicate id {pair_id!r} in {dataset_name}")
            seen_ids.add(pair_id)
            pairs.append(
                QAPair(
                    id=pair_id,
                    dataset=dataset_name,
                    question_ja=question,
                    reference_ja=answer,
                    question_en=_pick(record, "question_en"),
                    answer_en=_pick(record, "answer_en"),
                )
            )
    return pairs


def dump_dataset(pairs: list[QAPair], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for pair in pairs:
            record = {"id": pair.id, "question": pair.question_ja, "answer": pair.reference_ja}
            if pair.question_en is not None:
                record["question_en"] = pair.question_en
            if pair.answer_en is not None:
                record["answer_en"] = pair.answer_en
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _word_count(text: str) -> int:
    return len(text.split())


def compute_stats(pairs: list[QAPair]) -> DatasetStats:
    """Size plus mean question/answer lengths.

    Lengths are whitespace word counts of the English originals when every
    record carries them; otherwise a characters/2 heuristic on the Japanese
    text, flagged via `heuristic`.
    """
    if not pairs:
        raise ValueError("cannot compute statistics over an empty dataset")
    have_english = all(p.question_en and p.answer_en for p in pairs)
    n = len(pairs)
    if have_english:
        q_total = sum(_word_count(p.question_en) for p in pairs)
        a_total = sum(_word_count(p.answer_en) for p in pairs)
    else:
        q_total = sum(len(p.question_ja) / 2 for p in pairs)
        a_total = sum(len(p.reference_ja) / 2 for p in pairs)
    return DatasetStats(
        size=n,
        mean_question_length=q_total / n,
        mean_answer_length=a_total / n,
        heuristic=not have_english,
    )
