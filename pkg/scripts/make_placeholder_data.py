#!/usr/bin/env python3
"""Generate placeholder JSONL datasets matching the published corpus statistics.

The original corpora are not redistributable, so these files carry synthetic
Japanese text plus English counterparts whose word counts reproduce the
published sizes and mean question/answer lengths. Intended for harness
development and tests; swap in the real files for actual evaluation runs.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# dataset -> (size, mean question words, mean answer words)
SPECS = {
    "expertqa-bio": (96, 56.7, 410.7),
    "expertqa-med": (504, 56.0, 378.1),
    "liveqa": (627, 118.9, 438.3),
}

VOCAB = [
    "the", "patient", "treatment", "symptom", "dose", "study", "risk",
    "therapy", "clinical", "blood", "effect", "cell", "drug", "level",
]


def english_text(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(n_words))


def main() -> None:
    DATA_DIR.mkdir(exist_ok=True)
    for name, (size, q_mean, a_mean) in SPECS.items():
        rng = random.Random(f"placeholder:{name}")
        q_words = round(q_mean)
        a_words = round(a_mean)
        path = DATA_DIR / f"{name}.jsonl"
        with path.open("w", encoding="utf-8") as handle:
            for i in range(1, size + 1):
                record = {
                    "id": f"{name}-{i:04d}",
                    "question": f"{name}の質問{i}です。どう対処すべきですか？",
                    "answer": f"{name}の質問{i}に対する参照回答です。適切な医学的対応が必要です。",
                    "question_en": english_text(rng, q_words),
                    "answer_en": english_text(rng, a_words),
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        print(f"wrote {path} ({size} records, q={q_words}w a={a_words}w)")


if __name__ == "__main__":
    main()
