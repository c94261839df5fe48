"""Session wire protocol.

Message-framed and bidirectional.  Control messages travel as JSON text with
a ``type`` field; the two audio-bearing messages (``audio_frame`` up,
``music_segment`` down) travel as binary frames: a 4-byte big-endian header
length, a UTF-8 JSON header, then the raw payload bytes.  Every message
round-trips losslessly through ``encode``/``decode``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

# Audio frames are capped at 2 seconds of 16 kHz mono int16.
MAX_AUDIO_FRAME_BYTES = 2 * 16000 * 2

_HEADER_LEN = struct.Struct(">I")


class ProtocolError(ValueError):
    """A frame that cannot be parsed or violates a protocol limit."""


@dataclass(frozen=True)
class Join:
    token: str
    type: str = field(default="join", init=False)


@dataclass(frozen=True)
class SetVolume:
    volume: int  # 0-100
    type: str = field(default="set_volume", init=False)


@dataclass(frozen=True)
class SubmitSurvey:
    survey: dict
    type: str = field(default="submit_survey", init=False)


@dataclass(frozen=True)
class SurveyAck:
    status: str  # "stored" | "rejected"
    violations: tuple[str, ...] = ()
    type: str = field(default="survey_ack", init=False)


@dataclass(frozen=True)
class SessionState:
    state: str  # "waiting" | "active" | "ended"
    session_time_s: float
    roles_joined: tuple[str, ...]
    segment_count: int
    config: dict
    type: str = field(default="session_state", init=False)


@dataclass(frozen=True)
class NowPlaying:
    segment_index: int
    source_chunk: int
    description: str | None
    window_start_s: float
    window_end_s: float
    fallback: bool
    type: str = field(default="now_playing", init=False)


@dataclass(frozen=True)
class SessionEnded:
    reason: str
    segment_count: int
    type: str = field(default="session_ended", init=False)


@dataclass(frozen=True)
class ErrorMessage:
    code: str
    message: str
    type: str = field(default="error", init=False)


@dataclass(frozen=True)
class AudioFrameMessage:
    """Binary: one PCM frame from the client microphone."""

    t_s: float
    sample_rate: int
    pcm: bytes
    type: str = field(default="audio_frame", init=False)


@dataclass(frozen=True)
class MusicSegmentMessage:
    """Binary: one clip plus the loop parameters the client plays it with."""

    segment_index: int
    source_chunk: int
    clip_id: str
    loop_count: int
    crossfade_ms: int
    window_start_s: float
    window_end_s: float
    offset_s: float
    fallback: bool
    wav: bytes
    type: str = field(default="music_segment", init=False)


Message = (
    Join
    | SetVolume
    | SubmitSurvey
    | SurveyAck
    | SessionState
    | NowPlaying
    | SessionEnded
    | ErrorMessage
    | AudioFrameMessage
    | MusicSegmentMessage
)

_TEXT_TYPES = {
    "join": Join,
    "set_volume": SetVolume,
    "submit_survey": SubmitSurvey,
    "survey_ack": SurveyAck,
    "session_state": SessionState,
    "now_playing": NowPlaying,
    "session_ended": SessionEnded,
    "error": ErrorMessage,
}

_BINARY_TYPES = {"audio_frame", "music_segment"}


def encode(message: Message) -> str | bytes:
    """Wire form of a message: JSON text, or a binary frame for audio."""
    if isinstance(message, AudioFrameMessage):
        if len(message.pcm) > MAX_AUDIO_FRAME_BYTES:
            raise ProtocolError(
                f"audio frame of {len(message.pcm)} bytes exceeds cap {MAX_AUDIO_FRAME_BYTES}"
            )
        header = {
            "type": "audio_frame",
            "t_s": message.t_s,
            "sample_rate": message.sample_rate,
        }
        return _pack_binary(header, message.pcm)
    if isinstance(message, MusicSegmentMessage):
        header = {
            "type": "music_segment",
            "segment_index": message.segment_index,
            "source_chunk": message.source_chunk,
            "clip_id": message.clip_id,
            "loop_count": message.loop_count,
            "crossfade_ms": message.crossfade_ms,
            "window_start_s": message.window_start_s,
            "window_end_s": message.window_end_s,
            "offset_s": message.offset_s,
            "fallback": message.fallback,
        }
        return _pack_binary(header, message.wav)

    obj = {"type": message.type}
    for name, value in vars(message).items():
        if name == "type":
            continue
        obj[name] = list(value) if isinstance(value, tuple) else value
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def decode(data: str | bytes) -> Message:
    """Parse a wire frame back into its message."""
    if isinstance(data, (bytes, bytearray)):
        return _unpack_binary(bytes(data))
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProtocolError("message must be an object with a 'type' field")
    kind = obj.pop("type")
    cls = _TEXT_TYPES.get(kind)
    if cls is None:
        if kind in _BINARY_TYPES:
            raise ProtocolError(f"{kind} must arrive as a binary frame")
        raise ProtocolError(f"unknown message type {kind!r}")
    try:
        if cls is SurveyAck and "violations" in obj:
            obj["violations"] = tuple(obj["violations"])
        if cls is SessionState and "roles_joined" in obj:
            obj["roles_joined"] = tuple(obj["roles_joined"])
        return cls(**obj)
    except TypeError as exc:
        raise ProtocolError(f"bad fields for {kind}: {exc}") from exc


def _pack_binary(header: dict, payload: bytes) -> bytes:
    head = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    return _HEADER_LEN.pack(len(head)) + head + payload


def _unpack_binary(data: bytes) -> Message:
    if len(data) < _HEADER_LEN.size:
        raise ProtocolError("binary frame shorter than its length prefix")
    (head_len,) = _HEADER_LEN.unpack_from(data)
    if len(data) < _HEADER_LEN.size + head_len:
        raise ProtocolError("binary frame truncated before header end")
    try:
        header = json.loads(data[_HEADER_LEN.size : _HEADER_LEN.size + head_len])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"binary header is not valid JSON: {exc}") from exc
    payload = data[_HEADER_LEN.size + head_len :]
    kind = header.get("type")
    if kind == "audio_frame":
        if len(payload) > MAX_AUDIO_FRAME_BYTES:
            raise ProtocolError(
                f"audio frame of {len(payload)} bytes exceeds cap {MAX_AUDIO_FRAME_BYTES}"
            )
        try:
            return AudioFrameMessage(
                t_s=float(header["t_s"]),
                sample_rate=int(header["sample_rate"]),
                pcm=payload,
            )
        except KeyError as exc:
            raise ProtocolError(f"audio_frame header missing {exc}") from exc
    if kind == "music_segment":
        try:
            return MusicSegmentMessage(
                segment_index=int(header["segment_index"]),
                source_chunk=int(header["source_chunk"]),
                clip_id=str(header["clip_id"]),
                loop_count=int(header["loop_count"]),
                crossfade_ms=int(header["crossfade_ms"]),
                window_start_s=float(header["window_start_s"]),
                window_end_s=float(header["window_end_s"]),
                offset_s=float(header["offset_s"]),
                fallback=bool(header["fallback"]),
                wav=payload,
            )
        except KeyError as exc:
            raise ProtocolError(f"music_segment header missing {exc}") from exc
    raise ProtocolError(f"unknown binary message type {kind!r}")
