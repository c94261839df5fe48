"""Chunk grid, playback schedule, and loop arithmetic.

This is the single source of truth for when things happen in a session:
which transcript window owns an instant, which earlier window feeds the music
playing now, and how a short clip tiles a playback window.  Everything here is
a pure function of its arguments.

Windows are half-open ``[start, end)``: an instant on a boundary belongs to
the later window.  Public operations accept session time in seconds but all
internal arithmetic is integer milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import SessionConfig, to_ms


class RangeError(ValueError):
    """A session time or window length outside its legal range."""


@dataclass(frozen=True)
class Chunk:
    """One fixed-duration transcript window.

    The final chunk of a session may be shorter than ``chunk_duration`` when
    the session limit cuts it off.  ``transcript`` is immutable once
    ``finalized`` is set; a silent window finalizes with an empty transcript.
    """

    index: int
    start_ms: int
    end_ms: int
    transcript: str = ""
    finalized: bool = False

    @property
    def start_s(self) -> float:
        return self.start_ms / 1000.0

    @property
    def end_s(self) -> float:
        return self.end_ms / 1000.0

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms

    def finalize(self, transcript: str) -> "Chunk":
        if self.finalized:
            raise ValueError(f"chunk {self.index} is already finalized")
        return replace(self, transcript=transcript, finalized=True)


@dataclass(frozen=True)
class PlaybackSegment:
    """One scheduled window during which one clip plays looped.

    ``segment_index`` 0 is the first audible piece; ``source_chunk`` is the
    transcript window whose speech produced this segment's music, always
    ``lag_chunks`` windows earlier.  ``truncated`` marks a segment whose final
    loop is partial or whose window was cut at the session limit.
    """

    segment_index: int
    start_ms: int
    end_ms: int
    source_chunk: int
    loop_count: int
    truncated: bool

    @property
    def start_s(self) -> float:
        return self.start_ms / 1000.0

    @property
    def end_s(self) -> float:
        return self.end_ms / 1000.0

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms


def chunk_count(cfg: SessionConfig) -> int:
    """Number of chunk windows in the session, counting a truncated last one."""
    return -(-cfg.limit_ms // cfg.chunk_ms)


def chunk_window_ms(index: int, cfg: SessionConfig) -> tuple[int, int]:
    """Half-open window of chunk ``index``, truncated at the session limit."""
    if index < 0 or index >= chunk_count(cfg):
        raise RangeError(f"chunk index {index} outside session (0..{chunk_count(cfg) - 1})")
    start = index * cfg.chunk_ms
    return start, min(start + cfg.chunk_ms, cfg.limit_ms)


def chunk_index_at(t: float, cfg: SessionConfig) -> int:
    """Index of the chunk window containing session time ``t`` (seconds)."""
    t_ms = to_ms(t)
    if t_ms < 0 or t_ms >= cfg.limit_ms:
        raise RangeError(f"session time {t}s outside [0, {cfg.session_limit}s)")
    return t_ms // cfg.chunk_ms


def source_chunk_for(t: float, cfg: SessionConfig) -> int | None:
    """Chunk whose transcript feeds the music audible at ``t``.

    Returns None during the silent intro, i.e. while the chunk index at ``t``
    is still below ``lag_chunks``.
    """
    source = chunk_index_at(t, cfg) - cfg.lag_chunks
    return source if source >= 0 else None


def expand_loops_ms(window_length_ms: int, cfg: SessionConfig) -> tuple[int, int]:
    """Loop count and final (possibly partial) loop length for a window, in ms.

    Guarantees ``(loop_count - 1) * clip + final == window_length`` exactly and
    ``0 < final <= clip``.
    """
    if window_length_ms <= 0:
        raise RangeError(f"window length must be positive, got {window_length_ms}ms")
    loop_count = -(-window_length_ms // cfg.clip_ms)
    final = window_length_ms - (loop_count - 1) * cfg.clip_ms
    return loop_count, final


def expand_loops(window_length: float, cfg: SessionConfig) -> tuple[int, float]:
    """Same as :func:`expand_loops_ms` with the window and result in seconds."""
    loop_count, final_ms = expand_loops_ms(to_ms(window_length), cfg)
    return loop_count, final_ms / 1000.0


def build_schedule(cfg: SessionConfig) -> list[PlaybackSegment]:
    """The session's full playback schedule.

    One segment per chunk window from ``lag_chunks`` through the last; the
    segments are contiguous and cover ``[lag_chunks * chunk_duration,
    session_limit)`` exactly, the last one truncated at the limit.
    """
    cfg.validate()
    segments = []
    for k in range(cfg.lag_chunks, chunk_count(cfg)):
        start, end = chunk_window_ms(k, cfg)
        loop_count, final_ms = expand_loops_ms(end - start, cfg)
        segments.append(
            PlaybackSegment(
                segment_index=k - cfg.lag_chunks,
                start_ms=start,
                end_ms=end,
                source_chunk=k - cfg.lag_chunks,
                loop_count=loop_count,
                truncated=(end - start < cfg.chunk_ms) or (final_ms != cfg.clip_ms),
            )
        )
    return segments


def segment_at(t: float, cfg: SessionConfig) -> PlaybackSegment | None:
    """The playback segment whose window contains ``t``, None in the intro."""
    t_ms = to_ms(t)
    if t_ms < 0 or t_ms >= cfg.limit_ms:
        raise RangeError(f"session time {t}s outside [0, {cfg.session_limit}s)")
    if t_ms < cfg.lag_chunks * cfg.chunk_ms:
        return None
    for segment in build_schedule(cfg):
        if segment.start_ms <= t_ms < segment.end_ms:
            return segment
    return None
