"""Pluggable providers for the transcription, description, and music stages."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .base import (
    DescriptionProvider,
    MusicProvider,
    ProviderError,
    RetryPolicy,
    TranscriptionProvider,
    call_with_retries,
)
from .live import HttpDescriptionProvider, HttpMusicProvider, HttpTranscriptionProvider
from .mock import (
    MockDescriptionProvider,
    MockMusicProvider,
    MockTranscriptionProvider,
    digest_hex,
    mock_root_hz,
)

if TYPE_CHECKING:
    from ..config import ServiceConfig


def providers_for(
    cfg: "ServiceConfig",
) -> tuple[TranscriptionProvider, DescriptionProvider, MusicProvider]:
    """Instantiate the three stage providers a config selects."""
    selection = cfg.providers
    transcription: TranscriptionProvider
    description: DescriptionProvider
    music: MusicProvider
    if selection.transcription == "live":
        transcription = HttpTranscriptionProvider()
    else:
        transcription = MockTranscriptionProvider()
    if selection.description == "live":
        description = HttpDescriptionProvider(temperature=cfg.description_temperature)
    else:
        description = MockDescriptionProvider()
    if selection.music == "live":
        music = HttpMusicProvider()
    else:
        music = MockMusicProvider()
    return transcription, description, music


__all__ = [
    "DescriptionProvider",
    "MusicProvider",
    "ProviderError",
    "RetryPolicy",
    "TranscriptionProvider",
    "call_with_retries",
    "HttpDescriptionProvider",
    "HttpMusicProvider",
    "HttpTranscriptionProvider",
    "MockDescriptionProvider",
    "MockMusicProvider",
    "MockTranscriptionProvider",
    "digest_hex",
    "mock_root_hz",
    "providers_for",
]
