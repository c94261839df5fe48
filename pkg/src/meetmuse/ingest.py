"""Audio-frame ingestion and chunk finalization.

One ``ChunkIngest`` instance holds the per-session ingest state: it accepts
timestamped PCM frames, keeps only the designated speaker, buffers audio into
the open chunk windows, and finalizes a chunk's transcript once its window
has closed.  Frames for a session are processed in arrival order by a single
logical consumer; a closed chunk's buffer is handed off immutably.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from .audio import SPEECH_RATE
from .config import SessionConfig, to_ms
from .timeline import Chunk, chunk_count, chunk_window_ms

if TYPE_CHECKING:  # avoid a circular import; providers depend on this module
    from .providers.base import RetryPolicy, TranscriptionProvider

DROP_FILTERED_SPEAKER = "filtered_speaker"
DROP_SESSION_OVER = "session_over"
DROP_CHUNK_CLOSED = "chunk_closed"


class AudioFormatError(ValueError):
    """Malformed PCM: odd byte count or a sample-rate mismatch."""


@dataclass(frozen=True)
class AudioFrame:
    """A timestamped mono int16 PCM frame from one participant.

    ``session_time`` is the frame's start, in seconds since session start.
    """

    participant_id: str
    session_time: float
    samples: bytes
    sample_rate: int = SPEECH_RATE

    @property
    def duration_s(self) -> float:
        return len(self.samples) / 2 / self.sample_rate


@dataclass(frozen=True)
class TranscriptFragment:
    """One transcribed span: ``[start_s, end_s)`` with its text and speaker."""

    text: str
    start_s: float
    end_s: float
    speaker: str


@dataclass(frozen=True)
class IngestResult:
    accepted: bool
    reason: str | None = None
    chunk_index: int | None = None


class ChunkIngest:
    """Per-session frame buffering and chunk finalization."""

    def __init__(self, cfg: SessionConfig, designated_speaker: str):
        self.cfg = cfg
        self.designated_speaker = designated_speaker
        self._buffers: dict[int, bytearray] = {}
        self._chunks: dict[int, Chunk] = {}

    @property
    def finalized_chunks(self) -> dict[int, Chunk]:
        return dict(self._chunks)

    def buffer_bytes(self, chunk_index: int) -> int:
        return len(self._buffers.get(chunk_index, b""))

    def ingest_frame(self, frame: AudioFrame) -> IngestResult:
        """Buffer a frame into the chunk containing its start time.

        Frames from any participant other than the designated speaker are
        dropped (``filtered_speaker``); frames stamped at or past the session
        limit are dropped (``session_over``); frames arriving after their
        chunk was already finalized are dropped (``chunk_closed``).
        """
        if frame.sample_rate != SPEECH_RATE:
            raise AudioFormatError(
                f"frame rate {frame.sample_rate} Hz != session rate {SPEECH_RATE} Hz"
            )
        if len(frame.samples) % 2:
            raise AudioFormatError(f"odd PCM byte count {len(frame.samples)}")
        t_ms = to_ms(frame.session_time)
        if t_ms < 0 or t_ms >= self.cfg.limit_ms:
            return IngestResult(False, DROP_SESSION_OVER)
        if frame.participant_id != self.designated_speaker:
            return IngestResult(False, DROP_FILTERED_SPEAKER)
        index = t_ms // self.cfg.chunk_ms
        if index in self._chunks:
            return IngestResult(False, DROP_CHUNK_CLOSED, index)
        self._buffers.setdefault(index, bytearray()).extend(frame.samples)
        return IngestResult(True, None, index)

    def close_chunk(
        self,
        index: int,
        provider: "TranscriptionProvider",
        retry: "RetryPolicy | None" = None,
        sleep: Callable[[float], None] = lambda s: None,
        on_failure: Callable[[Exception], None] | None = None,
        transcript_override: str | None = None,
    ) -> Chunk:
        """Finalize chunk ``index``, transcribing its buffered audio.

        Always finalizes: an empty buffer yields an empty transcript, and a
        provider that keeps failing after retries degrades to an empty
        transcript (reported through ``on_failure``) rather than stalling the
        pipeline.  ``transcript_override`` short-circuits transcription for
        replay runs that carry text instead of audio.
        """
        from .providers.base import ProviderError, RetryPolicy, call_with_retries

        if index < 0 or index >= chunk_count(self.cfg):
            raise ValueError(f"chunk index {index} outside session")
        if index in self._chunks:
            raise ValueError(f"chunk {index} is already finalized")
        start_ms, end_ms = chunk_window_ms(index, self.cfg)
        buffer = bytes(self._buffers.pop(index, b""))

        if transcript_override is not None:
            transcript = transcript_override
        elif not buffer:
            transcript = ""
        else:
            try:
                fragments = call_with_retries(
                    lambda: provider.transcribe(buffer, SPEECH_RATE),
                    retry or RetryPolicy(),
                    sleep,
                )
                transcript = assemble_transcript(fragments, self.designated_speaker)
            except ProviderError as exc:
                transcript = ""
                if on_failure is not None:
                    on_failure(exc)

        chunk = Chunk(index, start_ms, end_ms, transcript, finalized=True)
        self._chunks[index] = chunk
        return chunk


def assemble_transcript(fragments: list[TranscriptFragment], speaker: str) -> str:
    """Order fragments by start time and join their text with single spaces.

    Fragments attributed to any other speaker never reach the transcript,
    whatever the provider returned.
    """
    kept = [f for f in fragments if f.speaker == speaker and f.text.strip()]
    kept.sort(key=lambda f: f.start_s)
    return " ".join(f.text.strip() for f in kept)
