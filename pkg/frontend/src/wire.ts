/**
 * Session wire protocol, the client side.
 *
 * Control messages travel as JSON text with a `type` field; the two
 * audio-bearing messages (`audio_frame` up, `music_segment` down) travel as
 * binary frames: a 4-byte big-endian header length, a UTF-8 JSON header,
 * then the raw payload bytes.  This module mirrors the server codec exactly,
 * and every message round-trips losslessly through encode/decode.
 */

// Audio frames are capped at 2 seconds of 16 kHz mono int16.
export const MAX_AUDIO_FRAME_BYTES = 2 * 16000 * 2;

const HEADER_LEN_BYTES = 4;

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

export interface Join {
  type: "join";
  token: string;
}

export interface SetVolume {
  type: "set_volume";
  volume: number; // 0-100
}

export interface SurveyPiecePayload {
  segment_index: number;
  relax: number;
  concentrate: number;
  like: number;
}

export interface SurveyPayload {
  per_piece: SurveyPiecePayload[];
  volume_rating: number;
  transition_comfort: number;
}

export interface SubmitSurvey {
  type: "submit_survey";
  survey: SurveyPayload;
}

export interface SurveyAck {
  type: "survey_ack";
  status: "stored" | "rejected";
  violations: string[];
}

export interface SessionState {
  type: "session_state";
  state: "waiting" | "active" | "ended";
  session_time_s: number;
  roles_joined: string[];
  segment_count: number;
  config: Record<string, unknown>;
}

export interface NowPlaying {
  type: "now_playing";
  segment_index: number;
  source_chunk: number;
  description: string | null;
  window_start_s: number;
  window_end_s: number;
  fallback: boolean;
}

export interface SessionEnded {
  type: "session_ended";
  reason: string;
  segment_count: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export interface AudioFrameMessage {
  type: "audio_frame";
  t_s: number;
  sample_rate: number;
  pcm: Uint8Array;
}

export interface MusicSegmentMessage {
  type: "music_segment";
  segment_index: number;
  source_chunk: number;
  clip_id: string;
  loop_count: number;
  crossfade_ms: number;
  window_start_s: number;
  window_end_s: number;
  offset_s: number;
  fallback: boolean;
  wav: Uint8Array;
}

export type Message =
  | Join
  | SetVolume
  | SubmitSurvey
  | SurveyAck
  | SessionState
  | NowPlaying
  | SessionEnded
  | ErrorMessage
  | AudioFrameMessage
  | MusicSegmentMessage;

const TEXT_FIELDS: Record<string, string[]> = {
  join: ["token"],
  set_volume: ["volume"],
  submit_survey: ["survey"],
  survey_ack: ["status"],
  session_state: ["state", "session_time_s", "roles_joined", "segment_count", "config"],
  now_playing: [
    "segment_index",
    "source_chunk",
    "description",
    "window_start_s",
    "window_end_s",
    "fallback",
  ],
  session_ended: ["reason", "segment_count"],
  error: ["code", "message"],
};

const BINARY_TYPES = new Set(["audio_frame", "music_segment"]);

const utf8Encoder = new TextEncoder();
const utf8Decoder = new TextDecoder("utf-8", { fatal: true });

/** Wire form of a message: JSON text, or a binary frame for audio. */
export function encode(message: Message): string | Uint8Array {
  if (message.type === "audio_frame") {
    if (message.pcm.byteLength > MAX_AUDIO_FRAME_BYTES) {
      throw new ProtocolError(
        `audio frame of ${message.pcm.byteLength} bytes exceeds cap ${MAX_AUDIO_FRAME_BYTES}`,
      );
    }
    return packBinary(
      { type: "audio_frame", t_s: message.t_s, sample_rate: message.sample_rate },
      message.pcm,
    );
  }
  if (message.type === "music_segment") {
    const { wav, ...header } = message;
    return packBinary(header as Record<string, unknown>, wav);
  }
  return JSON.stringify(message);
}

/** Parse a wire frame back into its message. */
export function decode(data: string | ArrayBuffer | Uint8Array): Message {
  if (typeof data !== "string") {
    const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
    return unpackBinary(bytes);
  }
  let obj: unknown;
  try {
    obj = JSON.parse(data);
  } catch (exc) {
    throw new ProtocolError(`not valid JSON: ${String(exc)}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj) || !("type" in obj)) {
    throw new ProtocolError("message must be an object with a 'type' field");
  }
  const record = obj as Record<string, unknown>;
  const kind = String(record.type);
  const fields = TEXT_FIELDS[kind];
  if (fields === undefined) {
    if (BINARY_TYPES.has(kind)) {
      throw new ProtocolError(`${kind} must arrive as a binary frame`);
    }
    throw new ProtocolError(`unknown message type '${kind}'`);
  }
  for (const field of fields) {
    if (!(field in record)) {
      throw new ProtocolError(`bad fields for ${kind}: missing ${field}`);
    }
  }
  if (kind === "survey_ack" && !("violations" in record)) {
    record.violations = [];
  }
  return record as unknown as Message;
}

function packBinary(header: Record<string, unknown>, payload: Uint8Array): Uint8Array {
  const head = utf8Encoder.encode(JSON.stringify(header));
  const frame = new Uint8Array(HEADER_LEN_BYTES + head.byteLength + payload.byteLength);
  new DataView(frame.buffer).setUint32(0, head.byteLength, false);
  frame.set(head, HEADER_LEN_BYTES);
  frame.set(payload, HEADER_LEN_BYTES + head.byteLength);
  return frame;
}

function unpackBinary(data: Uint8Array): Message {
  if (data.byteLength < HEADER_LEN_BYTES) {
    throw new ProtocolError("binary frame shorter than its length prefix");
  }
  const headLen = new DataView(data.buffer, data.byteOffset, data.byteLength).getUint32(0, false);
  if (data.byteLength < HEADER_LEN_BYTES + headLen) {
    throw new ProtocolError("binary frame truncated before header end");
  }
  let header: Record<string, unknown>;
  try {
    const text = utf8Decoder.decode(data.subarray(HEADER_LEN_BYTES, HEADER_LEN_BYTES + headLen));
    header = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`binary header is not valid JSON: ${String(exc)}`);
  }
  const payload = data.slice(HEADER_LEN_BYTES + headLen);
  const kind = header.type;
  if (kind === "audio_frame") {
    if (payload.byteLength > MAX_AUDIO_FRAME_BYTES) {
      throw new ProtocolError(
        `audio frame of ${payload.byteLength} bytes exceeds cap ${MAX_AUDIO_FRAME_BYTES}`,
      );
    }
    for (const field of ["t_s", "sample_rate"]) {
      if (!(field in header)) throw new ProtocolError(`audio_frame header missing '${field}'`);
    }
    return {
      type: "audio_frame",
      t_s: Number(header.t_s),
      sample_rate: Number(header.sample_rate),
      pcm: payload,
    };
  }
  if (kind === "music_segment") {
    const fields = [
      "segment_index",
      "source_chunk",
      "clip_id",
      "loop_count",
      "crossfade_ms",
      "window_start_s",
      "window_end_s",
      "offset_s",
      "fallback",
    ];
    for (const field of fields) {
      if (!(field in header)) throw new ProtocolError(`music_segment header missing '${field}'`);
    }
    return {
      type: "music_segment",
      segment_index: Number(header.segment_index),
      source_chunk: Number(header.source_chunk),
      clip_id: String(header.clip_id),
      loop_count: Number(header.loop_count),
      crossfade_ms: Number(header.crossfade_ms),
      window_start_s: Number(header.window_start_s),
      window_end_s: Number(header.window_end_s),
      offset_s: Number(header.offset_s),
      fallback: Boolean(header.fallback),
      wav: payload,
    };
  }
  throw new ProtocolError(`unknown binary message type '${String(kind)}'`);
}
