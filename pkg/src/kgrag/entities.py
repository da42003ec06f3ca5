"""Medical entity extraction from Japanese questions and word-level English translation.

The extraction prompt lives in prompts/entity_extraction.txt and asks the LLM
for at most 4 terms returned as a single JSON map; translation is one LLM
micro-call per non-ASCII term so the knowledge base can be queried in English.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .gateway import ChatCall, GatewayError, LlmGateway

PROMPTS_DIR = Path(__file__).parent / "prompts"

MAX_ENTITIES = 4
ENTITY_KEY = "medical terminologies"
TRANSLATION_INSTRUCTION = (
    "Translate this Japanese medical term into its standard English medical term. "
    "Return only the term."
)

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*")
_WS_RE = re.compile(r"\s+")


class ExtractionParseError(Exception):
    """No usable entity JSON in the model output; carries the raw text for the trace."""

    def __init__(self, raw: str):
        super().__init__("no parsable entity map in model response")
        self.raw = raw


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return (PROMPTS_DIR / f"{name}.txt").read_text(encoding="utf-8")


@dataclass
class MedicalEntity:
    surface_ja: str
    source_question_id: str
    translation_en: str | None = None


@dataclass
class EntitySet:
    question_id: str
    entities: list[MedicalEntity] = field(default_factory=list)


def render_extraction_prompt(question: str) -> str:
    if not question:
        raise ValueError("question must be non-empty")
    return load_prompt("entity_extraction").replace("{question}", question)


def _normalize(term: str) -> str:
    return _WS_RE.sub(" ", term).strip()


def parse_entity_response(raw: str) -> list[str]:
    """Pull the term list out of the first well-formed top-level JSON map in raw."""
    text = _FENCE_RE.sub("", raw)
    decoder = json.JSONDecoder()
    obj = None
    idx = text.find("{")
    while idx != -1:
        try:
            candidate, _ = decoder.raw_decode(text[idx:])
        except ValueError:
            idx = text.find("{", idx + 1)
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
        idx = text.find("{", idx + 1)
    if obj is None:
        raise ExtractionParseError(raw)
    terms = obj.get(ENTITY_KEY)
    if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
        raise ExtractionParseError(raw)
    seen: set[str] = set()
    out: list[str] = []
    for term in terms:
        norm = _normalize(term)
        if not norm or norm in seen:
            continue
        seen.add(norm)
        out.append(norm)
        if len(out) == MAX_ENTITIES:
            break
    return out


def _chat(gateway: LlmGateway, messages: list[tuple[str, str]], max_tokens: int = 512):
    return gateway.chat_complete(
        ChatCall(
            endpoint_id="chat",
            model_name=gateway.model_for("chat"),
            messages=tuple(messages),
            temperature=0.0,
            max_tokens=max_tokens,
        )
    )


def extract_entities(
    question_id: str,
    question: str,
    gateway: LlmGateway,
    warnings: list[str] | None = None,
) -> EntitySet:
    """Extraction step: prompt the LLM, parse its JSON, reprompt once on garbage."""
    messages = [("user", render_extraction_prompt(question))]
    result = _chat(gateway, messages)
    try:
        terms = parse_entity_response(result.content)
    except ExtractionParseError:
        retry = messages + [
            ("assistant", result.content),
            ("user", "Return only the json."),
        ]
        second = _chat(gateway, retry)
        try:
            terms = parse_entity_response(second.content)
        except ExtractionParseError:
            if warnings is not None:
                warnings.append(
                    f"entity extraction: unparsable model output for {question_id}, "
                    "falling back to no entities"
                )
            terms = []
    return EntitySet(
        question_id=question_id,
        entities=[MedicalEntity(surface_ja=t, source_question_id=question_id) for t in terms],
    )


def translate_entities(
    entity_set: EntitySet,
    gateway: LlmGateway,
    warnings: list[str] | None = None,
) -> EntitySet:
    """Word-level translation: one micro-call per term, ASCII terms pass through."""
    translated: list[MedicalEntity] = []
    for entity in entity_set.entities:
        term = entity.surface_ja
        if term.isascii():
            translated.append(
                MedicalEntity(term, entity.source_question_id, translation_en=term)
            )
            continue
        translation: str | None = None
        try:
            result = _chat(
                gateway,
                [("user", f"{TRANSLATION_INSTRUCTION}\n{term}")],
                max_tokens=64,
            )
            lines = [ln.strip() for ln in result.content.splitlines() if ln.strip()]
            translation = lines[0] if lines else None
        except GatewayError as exc:
            if warnings is not None:
                warnings.append(f"translation failed for {term!r}: {exc}")
        if translation is None and warnings is not None and not any(
            term in w for w in warnings
        ):
            warnings.append(f"translation empty for {term!r}")
        translated.append(
            MedicalEntity(term, entity.source_question_id, translation_en=translation)
        )
    return EntitySet(question_id=entity_set.question_id, entities=translated)
