"""Declarative conversion of triples to Japanese sentences and answer generation.

Both prompts are rendered byte-for-byte from the golden templates under
prompts/; the baseline mode reuses the answer template with the background
knowledge block removed.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .entities import load_prompt
from .gateway import ChatCall, GatewayError, LlmGateway
from .ranking import ScoredTriple, serialize_triple_text
from .umls import KnowledgeTriple

log = logging.getLogger(__name__)

ANSWER_MAX_TOKENS = 512
EMPTY_KNOWLEDGE_SENTINEL = "(なし)"

# leading enumeration markers on converted sentences: "1.", "2)", "‐", "・", bullets
_ENUM_MARKER_RE = re.compile(r"^\s*(?:[0-9０-９]+[\.\)．）]|[-‐・･*•])\s*")


class GenerationError(Exception):
    """Answer generation produced no usable content."""


@dataclass
class DeclarativeKnowledge:
    question_id: str
    sentences: list[str] = field(default_factory=list)
    source_triples: list[KnowledgeTriple] = field(default_factory=list)
    fallback: bool = False  # sentences are raw serialized triples after a conversion failure


@dataclass
class AnswerRecord:
    question_id: str
    mode: str  # baseline | rag
    answer: str
    model_name: str
    completion_tokens: int


def render_declarative_prompt(triples: list[KnowledgeTriple]) -> str:
    if not triples:
        raise ValueError("triples must be non-empty")
    joined = "\n".join(serialize_triple_text(t) for t in triples)
    return load_prompt("declarative_conversion").replace("{triple}", joined)


def split_sentences(content: str) -> list[str]:
    """Line-split model output, stripping enumeration markers and blank lines."""
    sentences = []
    for line in content.splitlines():
        cleaned = _ENUM_MARKER_RE.sub("", line).strip()
        if cleaned:
            sentences.append(cleaned)
    return sentences


def convert_declarative(
    question_id: str,
    ranked: list[ScoredTriple],
    gateway: LlmGateway,
    warnings: list[str] | None = None,
) -> DeclarativeKnowledge:
    """One LLM call turning the ranked triples into Japanese declarative sentences.

    On gateway failure the serialized triples are injected verbatim instead,
    so the answer prompt never loses the retrieved knowledge.
    """
    if not ranked:
        return DeclarativeKnowledge(question_id=question_id)
    triples = [st.triple for st in ranked]
    prompt = render_declarative_prompt(triples)
    try:
        result = gateway.chat_complete(
            ChatCall(
                endpoint_id="chat",
                model_name=gateway.model_for("chat"),
                messages=(("user", prompt),),
                temperature=0.0,
                max_tokens=ANSWER_MAX_TOKENS,
            )
        )
    except GatewayError as exc:
        if warnings is not None:
            warnings.append(f"declarative conversion failed ({exc}); using raw triples")
        return DeclarativeKnowledge(
            question_id=question_id,
            sentences=[st.serialized for st in ranked],
            source_triples=triples,
            fallback=True,
        )
    sentences = split_sentences(result.content)
    if not sentences and warnings is not None:
        warnings.append("declarative conversion returned no sentences")
    return DeclarativeKnowledge(
        question_id=question_id, sentences=sentences, source_triples=triples
    )


def render_answer_prompt(question: str, knowledge: DeclarativeKnowledge | None) -> str:
    if not question:
        raise ValueError("question must be non-empty")
    template = load_prompt("answer_generation")
    if knowledge is None:
        # baseline: same template minus the background-knowledge block
        lines = [ln for ln in template.split("\n") if "{background_knowledge}" not in ln]
        return "\n".join(lines).replace("{question}", question)
    joined = "\n".join(knowledge.sentences) if knowledge.sentences else EMPTY_KNOWLEDGE_SENTINEL
    return template.replace("{question}", question).replace(
        "{background_knowledge}", joined
    )


def generate_answer(
    question_id: str,
    question: str,
    knowledge: DeclarativeKnowledge | None,
    gateway: LlmGateway,
) -> AnswerRecord:
    mode = "rag" if knowledge is not None else "baseline"
    prompt = render_answer_prompt(question, knowledge)
    model = gateway.model_for("chat")
    result = gateway.chat_complete(
        ChatCall(
            endpoint_id="chat",
            model_name=model,
            messages=(("user", prompt),),
            temperature=0.0,
            max_tokens=ANSWER_MAX_TOKENS,
        )
    )
    answer = result.content.strip()
    if not answer:
        raise GenerationError(f"empty answer for {question_id} in {mode} mode")
    return AnswerRecord(
        question_id=question_id,
        mode=mode,
        answer=answer,
        model_name=model,
        completion_tokens=result.completion_tokens,
    )
