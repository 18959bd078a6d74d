"""Answer prompt assembly, generation clients, and refusal detection."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import yaml

from .corpus import DocumentChunk
from .errors import ConfigError, GenerationTimeoutError, ServiceError
from .services import JsonEndpoint

REFUSAL_ANSWER = "I don't have enough information to answer this question."

DEFAULT_REFUSAL_PHRASES: tuple[str, ...] = (
    "not enough information",
    "i don't have enough information",
    "cannot answer",
    "unable to answer",
)

# Byte-exact answer prompt. Note the whitespace-only second line and the
# trailing space after "Information:".
DEFAULT_TEMPLATE_TEXT = (
    "You are an AI assistant tasked with answering questions based on the provided information.\n"
    "        \n"
    "Information: \n"
    "{context}\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Answer the question based only on the provided information. Keep the answer concise, "
    "limited to 200 tokens. If the information doesn't contain the answer, say "
    f'"{REFUSAL_ANSWER}"\n'
    "\n"
    "Answer:"
)


class PromptStrategy(str, Enum):
    DEFAULT = "default"
    FEW_SHOT = "few_shot"
    COT = "cot"


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.6
    top_p: float = 0.9
    max_answer_tokens: int = 200
    context_size: int = 10
    prompt_strategy: PromptStrategy = PromptStrategy.DEFAULT
    timeout_seconds: float = 120.0

    def __post_init__(self):
        object.__setattr__(self, "prompt_strategy", PromptStrategy(self.prompt_strategy))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_answer_tokens < 1 or self.context_size < 1:
            raise ValueError("max_answer_tokens and context_size must be positive")


@dataclass(frozen=True)
class PromptTemplate:
    strategy: PromptStrategy = PromptStrategy.DEFAULT
    text: str = DEFAULT_TEMPLATE_TEXT
    demonstrations: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "strategy", PromptStrategy(self.strategy))
        object.__setattr__(self, "demonstrations", tuple(tuple(d) for d in self.demonstrations))
        for slot in ("{context}", "{query}"):
            if slot not in self.text:
                raise ConfigError(f"prompt template is missing the {slot} slot")

    def render(self, context: str, query: str) -> str:
        values = {"context": context, "query": query}
        body = re.sub(r"\{(context|query)\}", lambda m: values[m.group(1)], self.text)
        if self.strategy is PromptStrategy.FEW_SHOT and self.demonstrations:
            demos = "".join(f"Question: {q}\nAnswer: {a}\n\n" for q, a in self.demonstrations)
            return "Examples:\n\n" + demos + body
        return body


def load_template(path: str | Path) -> PromptTemplate:
    """Load a template file (YAML or JSON) with keys strategy, text, demonstrations."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or "text" not in data:
        raise ConfigError(f"{path}: template file needs a 'text' field")
    demos = [(d["question"], d["answer"]) for d in data.get("demonstrations", [])]
    return PromptTemplate(data.get("strategy", "default"), data["text"], tuple(demos))


def build_answer_prompt(
    chunks: Sequence[DocumentChunk], query: str, template: PromptTemplate | None = None
) -> str:
    """Render the template with chunk texts (ranked order, blank-line separated)."""
    template = template or PromptTemplate()
    return template.render("\n\n".join(c.text for c in chunks), query)


def detect_refusal(answer: str, phrases: Sequence[str] = DEFAULT_REFUSAL_PHRASES) -> bool:
    if not phrases:
        raise ValueError("refusal phrase list must be non-empty")
    folded = answer.replace("’", "'").casefold()
    return any(p.replace("’", "'").casefold() in folded for p in phrases)


@dataclass(frozen=True)
class GenerationResult:
    answer: str
    is_refusal: bool
    latency_seconds: float
    prompt_chunk_ids: tuple[str, ...] = ()
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        # latency is kept out of the persisted row so reruns are byte-identical
        return {
            "answer": self.answer,
            "is_refusal": self.is_refusal,
            "prompt_chunk_ids": list(self.prompt_chunk_ids),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, row: Mapping, latency_seconds: float = 0.0) -> "GenerationResult":
        return cls(
            answer=row["answer"],
            is_refusal=bool(row["is_refusal"]),
            latency_seconds=latency_seconds,
            prompt_chunk_ids=tuple(row.get("prompt_chunk_ids", ())),
            error=row.get("error"),
        )


class GenerationClient(Protocol):
    identity: str

    def generate(self, prompt: str, *, temperature: float, top_p: float, max_tokens: int) -> str: ...


def _truncate_words(text: str, max_tokens: int) -> str:
    words = text.split()
    return text if len(words) <= max_tokens else " ".join(words[:max_tokens])


def question_from_prompt(prompt: str) -> str | None:
    """The text of the last ``Question:`` line of a rendered prompt."""
    found = None
    for line in prompt.splitlines():
        if line.startswith("Question: "):
            found = line[len("Question: "):]
    return found


@dataclass
class EchoClient:
    """Answers with the prompt's Question line."""

    identity: str = "echo"

    def generate(self, prompt: str, *, temperature: float, top_p: float, max_tokens: int) -> str:
        for line in reversed(prompt.splitlines()):
            if line.startswith("Question: "):
                return _truncate_words(line, max_tokens)
        return ""


@dataclass
class FixedClient:
    text: str = REFUSAL_ANSWER
    identity: str = "fixed"

    def generate(self, prompt: str, *, temperature: float, top_p: float, max_tokens: int) -> str:
        return _truncate_words(self.text, max_tokens)


@dataclass
class GoldAnswerClient:
    """Dataset-aware mock: returns the gold answer of the question in the prompt."""

    answers: Mapping[str, str]
    fallback: str = REFUSAL_ANSWER
    identity: str = "gold-answer"

    def generate(self, prompt: str, *, temperature: float, top_p: float, max_tokens: int) -> str:
        q = question_from_prompt(prompt)
        return _truncate_words(self.answers.get(q, self.fallback), max_tokens)


@dataclass
class HttpGenerationClient:
    """POST {"prompt", "temperature", "top_p", "max_tokens"} -> {"text"}."""

    endpoint: JsonEndpoint
    identity: str = "http-generation"

    def generate(self, prompt: str, *, temperature: float, top_p: float, max_tokens: int) -> str:
        body = self.endpoint.post(
            {"prompt": prompt, "temperature": temperature, "top_p": top_p, "max_tokens": max_tokens}
        )
        text = body.get("text")
        if not isinstance(text, str):
            raise ServiceError(f"malformed generation response: {body!r}")
        return text


def generate_answer(
    client: GenerationClient,
    prompt: str,
    cfg: GenerationConfig | None = None,
    refusal_phrases: Sequence[str] = DEFAULT_REFUSAL_PHRASES,
    prompt_chunk_ids: Sequence[str] = (),
) -> GenerationResult:
    cfg = cfg or GenerationConfig()
    start = time.perf_counter()
    try:
        answer = client.generate(
            prompt, temperature=cfg.temperature, top_p=cfg.top_p, max_tokens=cfg.max_answer_tokens
        )
    except TimeoutError as exc:
        if isinstance(exc, GenerationTimeoutError):
            raise
        raise GenerationTimeoutError(time.perf_counter() - start) from exc
    except ServiceError:
        raise
    except Exception as exc:
        raise ServiceError(f"generation client {getattr(client, 'identity', '?')} failed: {exc}") from exc
    elapsed = time.perf_counter() - start
    if elapsed > cfg.timeout_seconds:
        raise GenerationTimeoutError(elapsed)
    return GenerationResult(
        answer=answer,
        is_refusal=detect_refusal(answer, refusal_phrases),
        latency_seconds=elapsed,
        prompt_chunk_ids=tuple(prompt_chunk_ids),
    )
