"""Session event log: append-only, one JSON object per line.

The first line is a config-snapshot header (the only place wall-clock time
appears); every following line is one event with a monotonically increasing
``seq``.  Two runs of the same scripted session differ only in the header's
timestamp field.  ``reconstruct_audibility`` rebuilds what was audible when
from the log alone, which is how fallback continuity is audited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable

from .config import SessionConfig

SESSION_STARTED = "session_started"
CHUNK_CLOSED = "chunk_closed"
TRANSCRIPTION_DONE = "transcription_done"
TRANSCRIPTION_FAILED = "transcription_failed"
DESCRIPTION_DONE = "description_done"
DESCRIPTION_FAILED = "description_failed"
CLIP_DONE = "clip_done"
SYNTHESIS_FAILED = "synthesis_failed"
SEGMENT_STARTED = "segment_started"
FALLBACK_APPLIED = "fallback_applied"
VOLUME_CHANGED = "volume_changed"
SURVEY_SUBMITTED = "survey_submitted"
SESSION_ENDED = "session_ended"

EVENT_KINDS = frozenset(
    {
        SESSION_STARTED,
        CHUNK_CLOSED,
        TRANSCRIPTION_DONE,
        TRANSCRIPTION_FAILED,
        DESCRIPTION_DONE,
        DESCRIPTION_FAILED,
        CLIP_DONE,
        SYNTHESIS_FAILED,
        SEGMENT_STARTED,
        FALLBACK_APPLIED,
        VOLUME_CHANGED,
        SURVEY_SUBMITTED,
        SESSION_ENDED,
    }
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    t_ms: int
    kind: str
    payload: dict

    @property
    def t_s(self) -> float:
        return self.t_ms / 1000.0

    def to_json(self) -> str:
        obj = {"seq": self.seq, "t": self.t_s, "kind": self.kind, "payload": self.payload}
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)


class EventLog:
    """In-memory event sequence with an optional append-only JSONL sink."""

    def __init__(self, session_id: str, config: SessionConfig, sink: IO[str] | None = None):
        self.session_id = session_id
        self.config = config
        self.events: list[SessionEvent] = []
        self._seq = 0
        self._last_t_ms = 0
        self._sink = sink
        self._header = {
            "header": True,
            "session_id": session_id,
            "config": config.to_dict(),
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        if self._sink is not None:
            self._sink.write(json.dumps(self._header, ensure_ascii=False, sort_keys=True) + "\n")
            self._sink.flush()

    @property
    def last_t_ms(self) -> int:
        return self._last_t_ms

    def emit(self, t_ms: int, kind: str, payload: dict | None = None) -> SessionEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if t_ms < self._last_t_ms:
            raise ValueError(
                f"event {kind} at {t_ms}ms would violate time ordering "
                f"(last event at {self._last_t_ms}ms)"
            )
        event = SessionEvent(self._seq, t_ms, kind, payload or {})
        self._seq += 1
        self._last_t_ms = t_ms
        self.events.append(event)
        if self._sink is not None:
            self._sink.write(event.to_json() + "\n")
            self._sink.flush()
        return event

    def to_jsonl(self) -> str:
        lines = [json.dumps(self._header, ensure_ascii=False, sort_keys=True)]
        lines.extend(e.to_json() for e in self.events)
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def read_jsonl(text: str) -> tuple[dict, list[SessionEvent]]:
    """Parse an exported log back into its header and events."""
    header: dict = {}
    events: list[SessionEvent] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("header"):
            header = obj
            continue
        events.append(
            SessionEvent(obj["seq"], round(obj["t"] * 1000), obj["kind"], obj["payload"])
        )
    return header, events


@dataclass(frozen=True)
class AudibleSpan:
    """One contiguous stretch of the session with a single audible source."""

    start_ms: int
    end_ms: int
    clip_id: str | None  # None means explicit silence
    segment_index: int
    fallback: bool


def reconstruct_audibility(
    events: Iterable[SessionEvent], cfg: SessionConfig
) -> list[AudibleSpan]:
    """Rebuild the audible timeline over the music window from a session log.

    Each ``segment_started`` span plays its own clip; each ``fallback_applied``
    span extends the previous span's clip (or silence when there is none).
    """
    starts = [
        e for e in events if e.kind in (SEGMENT_STARTED, FALLBACK_APPLIED)
    ]
    starts.sort(key=lambda e: (e.t_ms, e.seq))
    ends = [e.t_ms for e in starts[1:]] + [cfg.limit_ms]
    spans: list[AudibleSpan] = []
    previous_clip: str | None = None
    for event, end_ms in zip(starts, ends):
        if event.kind == SEGMENT_STARTED:
            clip_id = event.payload.get("clip_id")
            fallback = False
        else:
            clip_id = previous_clip
            fallback = True
        spans.append(
            AudibleSpan(
                start_ms=event.t_ms,
                end_ms=end_ms,
                clip_id=clip_id,
                segment_index=event.payload.get("segment_index", -1),
                fallback=fallback,
            )
        )
        previous_clip = clip_id
    return spans


def audibility_problems(events: Iterable[SessionEvent], cfg: SessionConfig) -> list[str]:
    """Gap/overlap audit of the audible timeline over [lag*D, session_limit).

    Returns human-readable problems; an empty list certifies that every
    instant of the music window has exactly one audible source.
    """
    spans = reconstruct_audibility(events, cfg)
    problems = []
    expected_start = cfg.lag_chunks * cfg.chunk_ms
    if not spans:
        return [f"no audible spans; expected coverage from {expected_start}ms"]
    cursor = expected_start
    for span in spans:
        if span.start_ms > cursor:
            problems.append(f"gap [{cursor}, {span.start_ms})ms")
        elif span.start_ms < cursor:
            problems.append(f"overlap at {span.start_ms}ms (previous span ran to {cursor}ms)")
        if span.end_ms <= span.start_ms:
            problems.append(f"empty span at {span.start_ms}ms")
        cursor = span.end_ms
    if cursor != cfg.limit_ms:
        problems.append(f"coverage ends at {cursor}ms, expected {cfg.limit_ms}ms")
    return problems
