"""Session orchestration: lifecycle, pipeline scheduling, deadlines, pushes.

``SessionRunner`` drives one session as a discrete-event loop over an
injected clock: chunk windows close on the grid, each closed source chunk
runs transcribe, describe, synthesize, and the resulting clip becomes audible
at its scheduled segment start only if it was ready by then; otherwise the
previous clip is extended (``fallback_applied``), or silence continues when
there is no previous clip.  Under the virtual clock the pipeline runs inline
and charges simulated time, so a 20-minute session completes in milliseconds
with an exact, replayable event log.  Under the real clock the loop blocks
between actions and pipelines run on worker threads.

``SessionManager`` holds many sessions for the network layer: token join,
survey storage, and log export.
"""

from __future__ import annotations

import hashlib
import heapq
import secrets
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, IO

from . import events as ev
from .audio import wav_bytes
from .clock import RealClock, SimElapsed, StageTimings, VirtualClock
from .config import ConfigError, ServiceConfig, to_ms
from .describe import (
    NEUTRAL_DESCRIPTION,
    DescriptionError,
    MusicDescription,
    PromptTemplate,
    default_template,
    generate_description,
)
from .events import EventLog
from .ingest import AudioFrame, ChunkIngest, IngestResult
from .protocol import (
    Message,
    MusicSegmentMessage,
    NowPlaying,
    SessionEnded,
    SessionState,
)
from .providers.base import (
    DescriptionProvider,
    MusicProvider,
    RetryPolicy,
    TranscriptionProvider,
)
from .survey import SurveyStore, parse_survey, validate_survey
from .synth import ClipCache, MusicClip, SynthesisError, generate_clip
from .timeline import PlaybackSegment, build_schedule, chunk_count, chunk_window_ms

ROLE_INTERVIEWER = "interviewer"
ROLE_INTERVIEWEE = "interviewee"
ROLES = (ROLE_INTERVIEWER, ROLE_INTERVIEWEE)

# Heap tiebreak at equal times: stage-completion events land before the
# window actions that depend on them (a clip finishing exactly at its
# segment start still makes the deadline), and session end goes last.
_PRI_EMIT = 0
_PRI_CLOSE = 1
_PRI_SEGMENT = 2
_PRI_END = 3

REASON_COMPLETED = "completed"
REASON_ABORTED = "aborted"

PushFn = Callable[[str, Message], None]


def derive_seed(session_id: str, chunk_index: int) -> int:
    """Stable per-chunk synthesis seed: same session and chunk, same seed."""
    digest = hashlib.sha256(f"{session_id}:{chunk_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class PipelineOutcome:
    """What one chunk's pipeline produced and when it was ready."""

    chunk_index: int
    ready_at_ms: int
    description: MusicDescription | None = None
    clip: MusicClip | None = None
    failed_stage: str | None = None  # "description" | "synthesis"
    error: str | None = None
    # (t_ms, kind, payload) recorded by real-mode workers for the loop to emit
    pending_events: list[tuple[int, str, dict]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.clip is not None


class SessionRunner:
    """Discrete-event engine for one session."""

    def __init__(
        self,
        session_id: str,
        cfg: ServiceConfig,
        transcription: TranscriptionProvider,
        description: DescriptionProvider,
        music: MusicProvider,
        clock: VirtualClock | RealClock | None = None,
        cache: ClipCache | None = None,
        log_sink: IO[str] | None = None,
        push: PushFn | None = None,
        timings: StageTimings | None = None,
        retry: RetryPolicy | None = None,
        scripted_transcripts: dict[int, str] | None = None,
    ):
        cfg.validate()
        self.session_id = session_id
        self.cfg = cfg
        self.session = cfg.session
        self.transcription = transcription
        self.description_provider = description
        self.music = music
        self.clock = clock if clock is not None else VirtualClock()
        self.virtual = isinstance(self.clock, VirtualClock)
        self.cache = cache
        self.push = push or (lambda role, message: None)
        self.timings = timings or StageTimings()
        self.retry = retry or RetryPolicy()
        self.scripted_transcripts = scripted_transcripts
        self.template: PromptTemplate = default_template(
            cfg.max_description_words, cfg.template_text
        )
        self.neutral = cfg.neutral_description or NEUTRAL_DESCRIPTION

        self.log = EventLog(session_id, cfg.session, sink=log_sink)
        self.ingest = ChunkIngest(cfg.session, designated_speaker=ROLE_INTERVIEWEE)
        self.schedule: list[PlaybackSegment] = build_schedule(cfg.session)
        self._source_count = len(self.schedule)

        self.started = False
        self.ended = False
        self.end_reason: str | None = None
        self.ended_at_ms: int | None = None
        self.segments_started = 0
        self.fallbacks = 0
        self.volume: dict[str, int] = {}
        self._outcomes: dict[int, PipelineOutcome] = {}
        self._audible_clip: MusicClip | None = None
        self._audible_description: str | None = None
        self._current: tuple[PlaybackSegment, bool] | None = None  # (segment, fallback)

        self._heap: list[tuple[int, int, int, str, object]] = []
        self._push_seq = 0
        self._executor: ThreadPoolExecutor | None = None
        self._results_lock = threading.Lock()

        for k in range(chunk_count(self.session)):
            _, end_ms = chunk_window_ms(k, self.session)
            self._defer(end_ms, _PRI_CLOSE, "close", k)
        for segment in self.schedule:
            self._defer(segment.start_ms, _PRI_SEGMENT, "segment", segment)
        self._defer(self.session.limit_ms, _PRI_END, "end", None)

    # -- scheduling ------------------------------------------------------

    def _defer(self, t_ms: int, priority: int, kind: str, data: object) -> None:
        self._push_seq += 1
        heapq.heappush(self._heap, (t_ms, priority, self._push_seq, kind, data))

    def start(self) -> None:
        """Begin the session clock; call once when all participants joined."""
        if self.started:
            return
        self.started = True
        if isinstance(self.clock, RealClock):
            self.clock.start()
            self._executor = ThreadPoolExecutor(max_workers=4)
        self.log.emit(0, ev.SESSION_STARTED, {"roles": list(ROLES)})

    def run(self, until_s: float | None = None) -> None:
        """Process scheduled actions up to ``until_s`` (default: session end).

        Under the virtual clock this returns immediately with the whole span
        simulated; under the real clock it blocks while the session plays out
        and is meant to run on a dedicated thread.
        """
        if not self.started:
            raise RuntimeError("session has not started")
        until_ms = self.session.limit_ms if until_s is None else to_ms(until_s)
        while self._heap and not self.ended:
            t_ms, _, _, kind, data = self._heap[0]
            if t_ms > until_ms:
                break
            heapq.heappop(self._heap)
            self.clock.advance_to_ms(t_ms)
            self._drain_worker_events()
            if kind == "emit":
                event_kind, payload = data  # type: ignore[misc]
                self.log.emit(t_ms, event_kind, payload)
            elif kind == "close":
                self._close_chunk(int(data), t_ms)  # type: ignore[arg-type]
            elif kind == "segment":
                self._start_segment(data, t_ms)  # type: ignore[arg-type]
            elif kind == "end":
                self._end(REASON_COMPLETED, t_ms)
        if not self.ended and until_ms > self.clock.now_ms():
            self.clock.advance_to_ms(until_ms)

    def abort(self, reason: str = REASON_ABORTED) -> None:
        """Terminate now: emit ``session_ended`` and drop all pending work."""
        if self.ended:
            return
        self._drain_worker_events()
        self._end(reason, self.clock.now_ms())

    def _end(self, reason: str, t_ms: int) -> None:
        self.ended = True
        self.end_reason = reason
        self.ended_at_ms = t_ms
        self._heap.clear()
        if self._executor is not None:
            self._executor.shutdown(wait=False, cancel_futures=True)
        self.log.emit(
            t_ms,
            ev.SESSION_ENDED,
            {
                "reason": reason,
                "segments_started": self.segments_started,
                "fallbacks": self.fallbacks,
            },
        )
        message = SessionEnded(reason=reason, segment_count=self.piece_count())
        for role in ROLES:
            self.push(role, message)

    # -- inputs ----------------------------------------------------------

    def post_frame(self, frame: AudioFrame) -> IngestResult:
        if self.ended:
            return IngestResult(False, "session_over")
        return self.ingest.ingest_frame(frame)

    def set_volume(self, role: str, volume: int) -> bool:
        """Record a client volume change; playback gain stays client-side."""
        if not self.started or self.ended:
            return False
        if not isinstance(volume, int) or not 0 <= volume <= 100:
            return False
        self.volume[role] = volume
        t_ms = max(self.clock.now_ms(), self.log.last_t_ms)
        self.log.emit(t_ms, ev.VOLUME_CHANGED, {"role": role, "volume": volume})
        return True

    # -- chunk close and pipeline ----------------------------------------

    def _close_chunk(self, k: int, t_ms: int) -> None:
        override = None
        if self.scripted_transcripts is not None:
            override = self.scripted_transcripts.get(k, "")

        if self.virtual:
            self._run_pipeline_virtual(k, t_ms, override)
        else:
            self._close_chunk_real(k, t_ms, override)

    def _run_pipeline_virtual(self, k: int, t_ms: int, override: str | None) -> None:
        """Close chunk ``k`` and run its pipeline inline, charging sim time."""
        sim = SimElapsed()
        start_ms, end_ms = chunk_window_ms(k, self.session)
        buffered = self.ingest.buffer_bytes(k)
        self.log.emit(
            t_ms,
            ev.CHUNK_CLOSED,
            {
                "chunk_index": k,
                "window_start_s": start_ms / 1000.0,
                "window_end_s": end_ms / 1000.0,
                "buffered_bytes": buffered,
            },
        )

        transcribing = bool(override) if override is not None else buffered > 0
        if transcribing:
            sim.charge(self.timings.for_transcribe(k))
        failures: list[str] = []
        chunk = self.ingest.close_chunk(
            k,
            self.transcription,
            retry=self.retry,
            sleep=sim.charge,
            on_failure=lambda exc: failures.append(str(exc)),
            transcript_override=override,
        )
        if failures:
            self._defer(
                t_ms + sim.ms,
                _PRI_EMIT,
                "emit",
                (ev.TRANSCRIPTION_FAILED, {"chunk_index": k, "error": failures[-1]}),
            )
        else:
            self._defer(
                t_ms + sim.ms,
                _PRI_EMIT,
                "emit",
                (
                    ev.TRANSCRIPTION_DONE,
                    {"chunk_index": k, "transcript": chunk.transcript, "elapsed_s": sim.seconds},
                ),
            )

        if k >= self._source_count:
            return  # no segment consumes this chunk; transcript only

        if chunk.transcript.strip():
            sim.charge(self.timings.for_describe(k))
        outcome = PipelineOutcome(chunk_index=k, ready_at_ms=t_ms + sim.ms)
        try:
            description = generate_description(
                chunk,
                self.template,
                self.description_provider,
                created_at=(t_ms + sim.ms) / 1000.0,
                neutral_fallback=self.neutral,
                retry=self.retry,
                sleep=sim.charge,
            )
        except DescriptionError as exc:
            outcome.failed_stage = "description"
            outcome.error = str(exc)
            outcome.ready_at_ms = t_ms + sim.ms
            self._outcomes[k] = outcome
            self._defer(
                t_ms + sim.ms,
                _PRI_EMIT,
                "emit",
                (ev.DESCRIPTION_FAILED, {"chunk_index": k, "error": str(exc)}),
            )
            return
        outcome.description = description
        self._defer(
            t_ms + sim.ms,
            _PRI_EMIT,
            "emit",
            (
                ev.DESCRIPTION_DONE,
                {"chunk_index": k, "text": description.text, "elapsed_s": sim.seconds},
            ),
        )

        sim.charge(self.timings.for_synthesize(k))
        seed = derive_seed(self.session_id, k)
        try:
            clip = generate_clip(
                description,
                self.music,
                seed,
                self.session,
                cache=self.cache,
                target_peak_dbfs=self.cfg.loudness_target_dbfs,
                retry=self.retry,
                sleep=sim.charge,
            )
        except SynthesisError as exc:
            outcome.failed_stage = "synthesis"
            outcome.error = str(exc)
            outcome.ready_at_ms = t_ms + sim.ms
            self._outcomes[k] = outcome
            self._defer(
                t_ms + sim.ms,
                _PRI_EMIT,
                "emit",
                (ev.SYNTHESIS_FAILED, {"chunk_index": k, "error": str(exc)}),
            )
            return
        outcome.clip = clip
        outcome.ready_at_ms = t_ms + sim.ms
        self._outcomes[k] = outcome
        self._defer(
            t_ms + sim.ms,
            _PRI_EMIT,
            "emit",
            (
                ev.CLIP_DONE,
                {
                    "chunk_index": k,
                    "clip_id": clip.clip_id,
                    "seed": seed,
                    "elapsed_s": sim.seconds,
                },
            ),
        )

    def _close_chunk_real(self, k: int, t_ms: int, override: str | None) -> None:
        """Close chunk ``k`` and hand its pipeline to a worker thread."""
        start_ms, end_ms = chunk_window_ms(k, self.session)
        self.log.emit(
            t_ms,
            ev.CHUNK_CLOSED,
            {
                "chunk_index": k,
                "window_start_s": start_ms / 1000.0,
                "window_end_s": end_ms / 1000.0,
                "buffered_bytes": self.ingest.buffer_bytes(k),
            },
        )
        failures: list[str] = []
        chunk = self.ingest.close_chunk(
            k,
            self.transcription,
            retry=self.retry,
            sleep=self.clock.sleep,
            on_failure=lambda exc: failures.append(str(exc)),
            transcript_override=override,
        )
        outcome = PipelineOutcome(chunk_index=k, ready_at_ms=self.clock.now_ms())
        if failures:
            outcome.pending_events.append(
                (self.clock.now_ms(), ev.TRANSCRIPTION_FAILED, {"chunk_index": k, "error": failures[-1]})
            )
        else:
            outcome.pending_events.append(
                (
                    self.clock.now_ms(),
                    ev.TRANSCRIPTION_DONE,
                    {"chunk_index": k, "transcript": chunk.transcript, "elapsed_s": 0.0},
                )
            )
        with self._results_lock:
            self._outcomes[k] = outcome
        if k >= self._source_count:
            return
        assert self._executor is not None
        self._executor.submit(self._pipeline_worker, k, chunk, outcome)

    def _pipeline_worker(self, k: int, chunk, outcome: PipelineOutcome) -> None:
        try:
            description = generate_description(
                chunk,
                self.template,
                self.description_provider,
                created_at=self.clock.now_ms() / 1000.0,
                neutral_fallback=self.neutral,
                retry=self.retry,
                sleep=self.clock.sleep,
            )
        except DescriptionError as exc:
            with self._results_lock:
                outcome.failed_stage = "description"
                outcome.error = str(exc)
                outcome.ready_at_ms = self.clock.now_ms()
                outcome.pending_events.append(
                    (outcome.ready_at_ms, ev.DESCRIPTION_FAILED, {"chunk_index": k, "error": str(exc)})
                )
            return
        with self._results_lock:
            outcome.description = description
            outcome.pending_events.append(
                (
                    self.clock.now_ms(),
                    ev.DESCRIPTION_DONE,
                    {"chunk_index": k, "text": description.text, "elapsed_s": 0.0},
                )
            )
        seed = derive_seed(self.session_id, k)
        try:
            clip = generate_clip(
                description,
                self.music,
                seed,
                self.session,
                cache=self.cache,
                target_peak_dbfs=self.cfg.loudness_target_dbfs,
                retry=self.retry,
                sleep=self.clock.sleep,
            )
        except SynthesisError as exc:
            with self._results_lock:
                outcome.failed_stage = "synthesis"
                outcome.error = str(exc)
                outcome.ready_at_ms = self.clock.now_ms()
                outcome.pending_events.append(
                    (outcome.ready_at_ms, ev.SYNTHESIS_FAILED, {"chunk_index": k, "error": str(exc)})
                )
            return
        with self._results_lock:
            outcome.clip = clip
            outcome.ready_at_ms = self.clock.now_ms()
            outcome.pending_events.append(
                (
                    outcome.ready_at_ms,
                    ev.CLIP_DONE,
                    {"chunk_index": k, "clip_id": clip.clip_id, "seed": seed, "elapsed_s": 0.0},
                )
            )

    def _drain_worker_events(self) -> None:
        """Emit stage events recorded by real-mode workers, oldest first.

        Timestamps are clamped to the log's last emitted time so a result
        that raced a scheduled action cannot break log ordering.
        """
        if self.virtual:
            return
        with self._results_lock:
            pending: list[tuple[int, str, dict]] = []
            for outcome in self._outcomes.values():
                pending.extend(outcome.pending_events)
                outcome.pending_events = []
        for t_ms, kind, payload in sorted(pending, key=lambda item: item[0]):
            self.log.emit(max(t_ms, self.log.last_t_ms), kind, payload)

    # -- segment start and fallbacks --------------------------------------

    def _start_segment(self, segment: PlaybackSegment, t_ms: int) -> None:
        with self._results_lock:
            outcome = self._outcomes.get(segment.source_chunk)
        ready = (
            outcome is not None
            and outcome.ok
            and outcome.ready_at_ms <= segment.start_ms
        )
        if ready:
            assert outcome is not None and outcome.clip is not None
            self._audible_clip = outcome.clip
            self._audible_description = (
                outcome.description.text if outcome.description else None
            )
            self._current = (segment, False)
            self.segments_started += 1
            self.log.emit(
                t_ms,
                ev.SEGMENT_STARTED,
                {
                    "segment_index": segment.segment_index,
                    "source_chunk": segment.source_chunk,
                    "clip_id": outcome.clip.clip_id,
                    "description": self._audible_description,
                    "loop_count": segment.loop_count,
                    "truncated": segment.truncated,
                    "window_start_s": segment.start_s,
                    "window_end_s": segment.end_s,
                    "ready_at_s": outcome.ready_at_ms / 1000.0,
                },
            )
            self._push_playback(segment, fallback=False, offset_s=0.0)
            return

        # Deadline missed or stage failed: keep the previous clip audible,
        # or stay silent when this is the first segment.
        if outcome is None or not outcome.ok:
            reason = f"{outcome.failed_stage}_failed" if outcome else "pipeline_missing"
        else:
            reason = "deadline_missed"
        self.fallbacks += 1
        self._current = (segment, True)
        self.log.emit(
            t_ms,
            ev.FALLBACK_APPLIED,
            {
                "segment_index": segment.segment_index,
                "source_chunk": segment.source_chunk,
                "reason": reason,
                "extends_clip_id": self._audible_clip.clip_id if self._audible_clip else None,
                "window_start_s": segment.start_s,
                "window_end_s": segment.end_s,
            },
        )
        self._push_playback(segment, fallback=True, offset_s=0.0)

    def _push_playback(
        self, segment: PlaybackSegment, fallback: bool, offset_s: float, only_role: str | None = None
    ) -> None:
        """Send now_playing to every role, the clip itself to audible roles."""
        if self.ended:
            return
        now_playing = NowPlaying(
            segment_index=segment.segment_index,
            source_chunk=segment.source_chunk,
            description=self._audible_description,
            window_start_s=segment.start_s,
            window_end_s=segment.end_s,
            fallback=fallback,
        )
        roles = ROLES if only_role is None else (only_role,)
        for role in roles:
            self.push(role, now_playing)
        if self._audible_clip is None:
            return  # silence: nothing to play
        clip = self._audible_clip
        message = MusicSegmentMessage(
            segment_index=segment.segment_index,
            source_chunk=segment.source_chunk,
            clip_id=clip.clip_id,
            loop_count=segment.loop_count,
            crossfade_ms=self.session.crossfade_ms,
            window_start_s=segment.start_s,
            window_end_s=segment.end_s,
            offset_s=offset_s,
            fallback=fallback,
            wav=wav_bytes(clip.samples, clip.sample_rate),
        )
        for role in roles:
            if role in self.cfg.audible_roles:
                self.push(role, message)

    # -- queries -----------------------------------------------------------

    def state(self) -> str:
        if self.ended:
            return "ended"
        return "active" if self.started else "waiting"

    def outcome_for(self, chunk_index: int) -> PipelineOutcome | None:
        with self._results_lock:
            return self._outcomes.get(chunk_index)

    def piece_count(self) -> int:
        """Segments whose windows opened before the session ended.

        This is the number of rows a survey must cover: all scheduled
        segments for a completed session, fewer for an aborted one.
        """
        end = self.ended_at_ms if self.ended_at_ms is not None else self.session.limit_ms
        return sum(1 for s in self.schedule if s.start_ms < end)

    def session_state_message(self, roles_joined: tuple[str, ...]) -> SessionState:
        return SessionState(
            state=self.state(),
            session_time_s=self.clock.now_ms() / 1000.0,
            roles_joined=roles_joined,
            segment_count=len(self.schedule),
            config=self.session.to_dict(),
        )

    def resume(self, role: str) -> None:
        """Re-send the currently audible segment to one reconnecting client.

        The clip is redelivered with ``offset_s`` locating the client inside
        the segment window, so playback aligns mid-loop.
        """
        if self.ended or self._current is None:
            return
        segment, fallback = self._current
        now_ms = self.clock.now_ms()
        if not segment.start_ms <= now_ms < segment.end_ms:
            return
        offset_s = (now_ms - segment.start_ms) / 1000.0
        self._push_playback(segment, fallback=fallback, offset_s=offset_s, only_role=role)


@dataclass
class SessionHandle:
    """One registered session plus its join bookkeeping."""

    session_id: str
    runner: SessionRunner
    tokens: dict[str, str]  # role -> token
    joined: set[str] = field(default_factory=set)
    survey_store: SurveyStore | None = None
    log_file: IO[str] | None = None
    run_thread: threading.Thread | None = None


class SessionManager:
    """Registry of sessions for the network layer: create, join, survey, log."""

    def __init__(
        self,
        cfg: ServiceConfig,
        provider_factory: Callable[[ServiceConfig], tuple[TranscriptionProvider, DescriptionProvider, MusicProvider]],
        push: Callable[[str, str, Message], None] | None = None,
        timings: StageTimings | None = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.provider_factory = provider_factory
        self.push = push or (lambda session_id, role, message: None)
        self.timings = timings
        self.sessions: dict[str, SessionHandle] = {}
        self._by_token: dict[str, tuple[str, str]] = {}  # token -> (session_id, role)
        self._lock = threading.Lock()

    def create_session(
        self,
        session_overrides: dict | None = None,
        persist: bool = True,
    ) -> SessionHandle:
        """Register a session; raises ConfigError with all violations.

        With ``persist`` the event log streams to ``<log_dir>/<id>.jsonl``
        and surveys append to ``<log_dir>/<id>.survey.jsonl``.
        """
        cfg = self.cfg
        if session_overrides:
            session = type(cfg.session).from_dict({**cfg.session.to_dict(), **session_overrides})
            cfg = type(cfg).from_dict({**cfg.to_dict(), "session": session.to_dict()})
        cfg.validate()
        session_id = "s-" + secrets.token_urlsafe(8)
        log_file: IO[str] | None = None
        survey_store: SurveyStore | None = SurveyStore()
        if persist:
            log_dir = Path(cfg.log_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            log_file = open(log_dir / f"{session_id}.jsonl", "w", encoding="utf-8")
            survey_store = SurveyStore(log_dir / f"{session_id}.survey.jsonl")
        transcription, description, music = self.provider_factory(cfg)
        clock = RealClock() if cfg.clock == "real" else VirtualClock()
        runner = SessionRunner(
            session_id,
            cfg,
            transcription,
            description,
            music,
            clock=clock,
            cache=ClipCache(cfg.cache_dir),
            log_sink=log_file,
            push=lambda role, message: self.push(session_id, role, message),
            timings=self.timings,
        )
        handle = SessionHandle(
            session_id=session_id,
            runner=runner,
            tokens={role: secrets.token_urlsafe(16) for role in ROLES},
            survey_store=survey_store,
            log_file=log_file,
        )
        with self._lock:
            self.sessions[session_id] = handle
            for role, token in handle.tokens.items():
                self._by_token[token] = (session_id, role)
        return handle

    def get(self, session_id: str) -> SessionHandle | None:
        with self._lock:
            return self.sessions.get(session_id)

    def resolve_token(self, token: str) -> tuple[SessionHandle, str] | None:
        with self._lock:
            hit = self._by_token.get(token)
            if hit is None:
                return None
            return self.sessions[hit[0]], hit[1]

    def join(self, token: str) -> tuple[SessionHandle, str] | None:
        """Join by token; when the second role arrives the session starts."""
        hit = self.resolve_token(token)
        if hit is None:
            return None
        handle, role = hit
        start_now = False
        with self._lock:
            handle.joined.add(role)
            if set(handle.joined) >= set(ROLES) and not handle.runner.started:
                start_now = True
        if start_now:
            handle.runner.start()
        return handle, role

    def submit_survey(
        self, session_id: str, participant: str, payload: dict
    ) -> tuple[bool, list[str]]:
        """Validate and store one participant's survey; last submission wins."""
        handle = self.get(session_id)
        if handle is None:
            return False, ["unknown session"]
        runner = handle.runner
        if not runner.ended:
            return False, ["session has not ended"]
        violations = validate_survey(payload, runner.piece_count())
        if violations:
            return False, violations
        if handle.survey_store is not None:
            handle.survey_store.submit(participant, parse_survey(payload))
        runner.log.emit(
            runner.ended_at_ms or runner.session.limit_ms,
            ev.SURVEY_SUBMITTED,
            {"participant": participant, "piece_count": runner.piece_count()},
        )
        return True, []

    def export_session_log(self, session_id: str) -> str | None:
        handle = self.get(session_id)
        if handle is None:
            return None
        return handle.runner.log.to_jsonl()
