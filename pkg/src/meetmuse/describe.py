"""Transcript-to-music-description stage.

A finalized chunk's transcript is spliced into a prompt template and sent to
a text-generation provider; the provider's output is sanitized, truncated to
the word budget, and validated.  Empty transcripts skip the provider entirely
and fall back to a neutral description, so every chunk yields something
playable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from .timeline import Chunk

if TYPE_CHECKING:
    from .providers.base import DescriptionProvider, RetryPolicy

PLACEHOLDER = "{transcript}"

DEFAULT_TEMPLATE_TEXT = (
    "You are generating a prompt for a text-to-music model. Based on the "
    "following conversation excerpt, write one short paragraph (max {N} words) "
    "describing background music that fits the topic and mood. Specify tempo, "
    "style, and instrumentation. Conversation: {transcript}"
)

NEUTRAL_DESCRIPTION = "Calm ambient background music at a slow tempo with soft piano."

_CONTROL_CHARS = re.compile(r"[\x00-\x1f\x7f]")


class TemplateError(ValueError):
    """A template missing or duplicating the transcript placeholder."""


class DescriptionError(Exception):
    """Description generation failed after retries (``description_failed``)."""


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text containing exactly one ``{transcript}`` placeholder."""

    template_text: str
    max_description_words: int = 60

    def validate(self) -> "PromptTemplate":
        count = self.template_text.count(PLACEHOLDER)
        if count != 1:
            raise TemplateError(
                f"template must contain exactly one {PLACEHOLDER} placeholder, found {count}"
            )
        if self.max_description_words <= 0:
            raise TemplateError("max_description_words must be positive")
        return self


def default_template(max_words: int = 60, template_text: str | None = None) -> PromptTemplate:
    """The built-in template with the word budget spliced in, or a custom one."""
    text = template_text if template_text is not None else DEFAULT_TEMPLATE_TEXT
    return PromptTemplate(text.replace("{N}", str(max_words)), max_words).validate()


@dataclass(frozen=True)
class MusicDescription:
    """A validated natural-language music prompt derived from one chunk."""

    source_chunk: int
    text: str
    created_at: float  # session seconds


def render_prompt(template: PromptTemplate, transcript: str) -> str:
    """Substitute the transcript into the template, verbatim, exactly once.

    Single-pass: braces inside the transcript are never re-substituted.
    """
    template.validate()
    return template.template_text.replace(PLACEHOLDER, transcript, 1)


def validate_description(text: str, max_words: int = 60) -> list[str]:
    """All violations of the description contract; empty list means valid."""
    violations = []
    if not text.strip():
        violations.append("empty")
        return violations
    if len(text.split()) > max_words:
        violations.append(f"word limit: {len(text.split())} > {max_words}")
    if "\n" in text or "\r" in text:
        violations.append("multiple paragraphs")
    if _CONTROL_CHARS.search(text):
        violations.append("control characters")
    return violations


def truncate_words(text: str, max_words: int) -> str:
    """Cut at a word boundary when over budget; within-budget text untouched."""
    words = text.split()
    if len(words) <= max_words:
        return text
    return " ".join(words[:max_words])


def sanitize(text: str) -> str:
    """Strip control characters and collapse all whitespace to single spaces."""
    return " ".join(_CONTROL_CHARS.sub(" ", text).split())


def generate_description(
    chunk: Chunk,
    template: PromptTemplate,
    provider: "DescriptionProvider",
    created_at: float = 0.0,
    neutral_fallback: str = NEUTRAL_DESCRIPTION,
    retry: "RetryPolicy | None" = None,
    sleep: Callable[[float], None] = lambda s: None,
) -> MusicDescription:
    """Produce a valid MusicDescription for a finalized chunk.

    Raises DescriptionError only when the provider fails (or keeps returning
    unusable text) after retries; the session layer maps that to its fallback
    policy.
    """
    from .providers.base import ProviderError, RetryPolicy, call_with_retries

    if not chunk.finalized:
        raise ValueError(f"chunk {chunk.index} is not finalized")
    if not chunk.transcript.strip():
        return MusicDescription(chunk.index, neutral_fallback, created_at)

    prompt = render_prompt(template, chunk.transcript)

    def attempt() -> str:
        text = sanitize(provider.complete(prompt))
        if not text:
            raise ProviderError("provider returned no usable text")
        return text

    try:
        text = call_with_retries(attempt, retry or RetryPolicy(), sleep)
    except ProviderError as exc:
        raise DescriptionError(str(exc)) from exc

    text = truncate_words(text, template.max_description_words)
    problems = validate_description(text, template.max_description_words)
    if problems:
        raise DescriptionError(f"provider output invalid: {', '.join(problems)}")
    return MusicDescription(chunk.index, text, created_at)
