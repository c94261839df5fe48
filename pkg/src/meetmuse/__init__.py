"""meetmuse: live meeting transcripts turned into looped background music.

Speech is chunked into fixed windows; each window's transcript becomes a
music description, the description becomes a short clip, and the clip plays
looped during a later window on a fixed-lag schedule.  The package contains
the pure timeline arithmetic, the pipeline stages with pluggable providers,
a deadline-enforcing session orchestrator with an event log, a WebSocket
server, and a deterministic replay CLI.
"""

from .config import ConfigError, ProviderSelection, ServiceConfig, SessionConfig
from .describe import (
    MusicDescription,
    PromptTemplate,
    default_template,
    generate_description,
    render_prompt,
    validate_description,
)
from .events import EventLog, SessionEvent, audibility_problems, reconstruct_audibility
from .ingest import AudioFrame, ChunkIngest, TranscriptFragment, assemble_transcript
from .session import SessionManager, SessionRunner, derive_seed
from .survey import SurveyResponse, SurveyStore, parse_survey, validate_survey
from .synth import ClipCache, MusicClip, assemble_loop, generate_clip, normalize_loudness
from .timeline import (
    Chunk,
    PlaybackSegment,
    build_schedule,
    chunk_index_at,
    expand_loops,
    source_chunk_for,
)

__all__ = [
    "AudioFrame",
    "Chunk",
    "ChunkIngest",
    "ClipCache",
    "ConfigError",
    "EventLog",
    "MusicClip",
    "MusicDescription",
    "PlaybackSegment",
    "PromptTemplate",
    "ProviderSelection",
    "ServiceConfig",
    "SessionConfig",
    "SessionEvent",
    "SessionManager",
    "SessionRunner",
    "SurveyResponse",
    "SurveyStore",
    "TranscriptFragment",
    "assemble_loop",
    "assemble_transcript",
    "audibility_problems",
    "build_schedule",
    "chunk_index_at",
    "default_template",
    "derive_seed",
    "expand_loops",
    "generate_clip",
    "generate_description",
    "normalize_loudness",
    "parse_survey",
    "reconstruct_audibility",
    "render_prompt",
    "source_chunk_for",
    "validate_description",
    "validate_survey",
]

__version__ = "0.1.0"
