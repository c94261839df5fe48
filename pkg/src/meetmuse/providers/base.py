"""Provider protocols, failure types, and the shared retry helper.

Every pipeline stage (speech-to-text, text-to-description, text-to-music)
talks to a provider through one of the small protocols below, so live HTTP
backends and deterministic mocks are interchangeable.  Retries sleep through
an injectable callable: real time in the live service, simulated charge under
the virtual clock.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, TypeVar, runtime_checkable

import numpy as np

from ..ingest import TranscriptFragment

T = TypeVar("T")


class ProviderError(Exception):
    """A retryable provider failure (network, auth, rate limit, bad output)."""


@dataclass(frozen=True)
class RetryPolicy:
    """Retry schedule for one provider call.

    ``retries`` counts re-attempts after the first call; spacing sleeps run
    between attempts; the budget caps total simulated/real time spent, so a
    stage can never eat the whole pipeline deadline.
    """

    retries: int = 2
    spacing_s: float = 5.0
    budget_s: float = 60.0


def call_with_retries(
    fn: Callable[[], T],
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = lambda s: None,
) -> T:
    """Run ``fn`` under the retry policy, re-raising the last ProviderError."""
    spent = 0.0
    last: ProviderError | None = None
    for attempt in range(policy.retries + 1):
        try:
            return fn()
        except ProviderError as exc:
            last = exc
            if attempt >= policy.retries:
                break
            if spent + policy.spacing_s > policy.budget_s:
                break
            sleep(policy.spacing_s)
            spent += policy.spacing_s
    assert last is not None
    raise last


@runtime_checkable
class TranscriptionProvider(Protocol):
    """Speech-to-text over one chunk's audio buffer.

    Fragment time ranges are relative to the start of the submitted buffer;
    the caller re-bases them onto the session timeline.
    """

    provider_id: str

    def transcribe(self, audio: bytes, sample_rate: int) -> list[TranscriptFragment]:
        ...


@runtime_checkable
class DescriptionProvider(Protocol):
    """Free-text completion of a rendered music-description prompt."""

    provider_id: str

    def complete(self, prompt: str) -> str:
        ...


@runtime_checkable
class MusicProvider(Protocol):
    """Text-to-music synthesis returning mono int16 samples at 32 kHz."""

    provider_id: str

    def render(self, description: str, duration_s: float, seed: int) -> np.ndarray:
        ...
