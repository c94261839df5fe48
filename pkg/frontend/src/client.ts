/**
 * Session client: joins over the websocket, keeps a state snapshot for the
 * UI, schedules pushed music segments into an audio sink, and submits the
 * end-of-session survey.
 *
 * The transport is injected so browsers use the native WebSocket and tests
 * use the ws package or a scripted fake.  All message handling is
 * synchronous and never blocks audio callbacks; scheduling is delegated to
 * the sink.  When the socket drops before the session has ended the client
 * reconnects with backoff and re-joins; the server then redelivers the
 * current segment with a playback offset, which also serves as the recovery
 * path for a clip that failed to decode.
 */

import type { AudioSink } from "./audioSink";
import { buildLoopPlan, LoopPlan, LoopPlanError } from "./loopScheduler";
import { decodeWav, WavError } from "./wav";
import {
  AudioFrameMessage,
  decode,
  encode,
  ErrorMessage,
  Message,
  MusicSegmentMessage,
  NowPlaying,
  ProtocolError,
  SurveyAck,
} from "./wire";
import { SurveyDraft, toPayload, validateDraft } from "./survey";

export interface SocketLike {
  binaryType: string;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string | ArrayBuffer | Uint8Array }) => void) | null;
  onclose: ((event: { code: number }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  send(data: string | Uint8Array): void;
  close(): void;
}

export type TransportFactory = (url: string) => SocketLike;

export type ClientPhase =
  | "idle"
  | "connecting"
  | "joining"
  | "waiting"
  | "active"
  | "ended"
  | "failed";

export interface ReceivedSegment {
  segmentIndex: number;
  sourceChunk: number;
  clipId: string;
  loopCount: number;
  crossfadeMs: number;
  windowStartS: number;
  windowEndS: number;
  offsetS: number;
  fallback: boolean;
  clipDurationS: number;
  plan: LoopPlan;
}

export interface ClientState {
  phase: ClientPhase;
  sessionTimeS: number;
  rolesJoined: string[];
  segmentCount: number;
  nowPlaying: NowPlaying | null;
  descriptionLatencyMs: number | null;
  volume: number; // 0-100
  surveyAck: SurveyAck | null;
  endedReason: string | null;
  lastError: ErrorMessage | null;
  segments: ReceivedSegment[];
  reconnects: number;
}

export interface SessionClientOptions {
  url: string;
  token: string;
  sink: AudioSink;
  transport?: TransportFactory;
  onChange?: (state: ClientState) => void;
  reconnect?: boolean;
  reconnectDelayMs?: number;
  maxReconnectDelayMs?: number;
  nowMs?: () => number;
}

const FATAL_ERROR_CODES = new Set(["invalid_token", "join_required"]);

function defaultTransport(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

function defaultNowMs(): number {
  return typeof performance !== "undefined" ? performance.now() : Date.now();
}

export class SessionClient {
  private readonly opts: Required<
    Pick<SessionClientOptions, "reconnect" | "reconnectDelayMs" | "maxReconnectDelayMs">
  > &
    SessionClientOptions;
  private socket: SocketLike | null = null;
  private socketOpen = false;
  private closedByUs = false;
  private retryAttempt = 0;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private outbox: (string | Uint8Array)[] = [];
  private readonly segments = new Map<number, ReceivedSegment>();
  private clockBase: { sessionS: number; sinkS: number } | null = null;

  private phase: ClientPhase = "idle";
  private sessionTimeS = 0;
  private rolesJoined: string[] = [];
  private segmentCount = 0;
  private nowPlaying: NowPlaying | null = null;
  private descriptionLatencyMs: number | null = null;
  private volume = 100;
  private surveyAck: SurveyAck | null = null;
  private endedReason: string | null = null;
  private lastError: ErrorMessage | null = null;
  private reconnects = 0;

  constructor(options: SessionClientOptions) {
    this.opts = {
      reconnect: true,
      reconnectDelayMs: 250,
      maxReconnectDelayMs: 4000,
      ...options,
    };
  }

  state(): ClientState {
    return {
      phase: this.phase,
      sessionTimeS: this.sessionTimeS,
      rolesJoined: [...this.rolesJoined],
      segmentCount: this.segmentCount,
      nowPlaying: this.nowPlaying,
      descriptionLatencyMs: this.descriptionLatencyMs,
      volume: this.volume,
      surveyAck: this.surveyAck,
      endedReason: this.endedReason,
      lastError: this.lastError,
      segments: [...this.segments.values()].sort((a, b) => a.segmentIndex - b.segmentIndex),
      reconnects: this.reconnects,
    };
  }

  connect(): void {
    if (this.socket !== null) return;
    this.closedByUs = false;
    this.phase = "connecting";
    this.publish();
    const transport = this.opts.transport ?? defaultTransport;
    const socket = transport(this.opts.url);
    socket.binaryType = "arraybuffer";
    this.socket = socket;
    socket.onopen = () => {
      this.socketOpen = true;
      this.phase = "joining";
      socket.send(encode({ type: "join", token: this.opts.token }) as string);
      for (const queued of this.outbox.splice(0)) socket.send(queued);
      this.publish();
    };
    socket.onmessage = (event) => this.handleFrame(event.data);
    socket.onerror = () => {
      // the close handler owns recovery
    };
    socket.onclose = () => {
      this.socket = null;
      this.socketOpen = false;
      if (this.closedByUs || this.phase === "ended" || this.phase === "failed") return;
      this.scheduleReconnect();
    };
  }

  close(): void {
    this.closedByUs = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.socketOpen = false;
  }

  /** Local gain plus a set_volume notification so the server logs it. */
  setVolume(volume: number): void {
    this.volume = Math.max(0, Math.min(100, Math.round(volume)));
    this.opts.sink.setGain(this.volume / 100);
    this.sendOrQueue(encode({ type: "set_volume", volume: this.volume }));
    this.publish();
  }

  /** Upload one microphone frame (interviewee role only). */
  sendAudio(frame: AudioFrameMessage): void {
    this.sendOrQueue(encode(frame));
  }

  /**
   * Validate and submit a survey draft; returns the local violations and
   * sends nothing unless the draft is clean.  The server's verdict arrives
   * as a survey_ack in the state.
   */
  submitSurvey(draft: SurveyDraft): string[] {
    const violations = validateDraft(draft);
    if (violations.length > 0) return violations;
    this.sendOrQueue(encode({ type: "submit_survey", survey: toPayload(draft) }));
    return [];
  }

  private sendOrQueue(data: string | Uint8Array): void {
    if (this.socket !== null && this.socketOpen) {
      this.socket.send(data);
    } else {
      this.outbox.push(data);
    }
  }

  private scheduleReconnect(): void {
    if (!this.opts.reconnect) {
      this.phase = "failed";
      this.publish();
      return;
    }
    const delay = Math.min(
      this.opts.reconnectDelayMs * 2 ** this.retryAttempt,
      this.opts.maxReconnectDelayMs,
    );
    this.retryAttempt += 1;
    this.phase = "connecting";
    this.publish();
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      this.reconnects += 1;
      this.connect();
    }, delay);
  }

  private handleFrame(data: string | ArrayBuffer | Uint8Array): void {
    const receivedAtMs = (this.opts.nowMs ?? defaultNowMs)();
    let message: Message;
    try {
      message = decode(data);
    } catch (exc) {
      if (exc instanceof ProtocolError) {
        this.lastError = { type: "error", code: "client_decode", message: exc.message };
        this.publish();
        return;
      }
      throw exc;
    }
    this.handleMessage(message, receivedAtMs);
  }

  private handleMessage(message: Message, receivedAtMs: number): void {
    switch (message.type) {
      case "session_state": {
        this.sessionTimeS = message.session_time_s;
        this.rolesJoined = message.roles_joined;
        this.segmentCount = message.segment_count;
        this.clockBase = { sessionS: message.session_time_s, sinkS: this.opts.sink.currentTimeS() };
        if (message.state === "waiting") this.phase = "waiting";
        else if (message.state === "active") this.phase = "active";
        else this.markEnded(this.endedReason ?? "ended");
        this.retryAttempt = 0;
        break;
      }
      case "now_playing": {
        this.nowPlaying = message;
        this.descriptionLatencyMs = Math.max(0, (this.opts.nowMs ?? defaultNowMs)() - receivedAtMs);
        break;
      }
      case "music_segment": {
        this.handleSegment(message);
        break;
      }
      case "session_ended": {
        this.segmentCount = message.segment_count;
        this.markEnded(message.reason);
        break;
      }
      case "survey_ack": {
        this.surveyAck = message;
        break;
      }
      case "error": {
        this.lastError = message;
        if (FATAL_ERROR_CODES.has(message.code)) {
          this.phase = "failed";
          this.closedByUs = true;
          this.socket?.close();
        }
        break;
      }
      default: {
        // join / set_volume / submit_survey / audio_frame never arrive here
        this.lastError = {
          type: "error",
          code: "client_unexpected",
          message: `unexpected ${message.type} from server`,
        };
      }
    }
    this.publish();
  }

  private handleSegment(message: MusicSegmentMessage): void {
    let plan: LoopPlan;
    let clipDurationS: number;
    try {
      const clip = decodeWav(message.wav);
      clipDurationS = clip.durationS;
      plan = buildLoopPlan({
        windowStartS: message.window_start_s,
        windowEndS: message.window_end_s,
        loopCount: message.loop_count,
        crossfadeMs: message.crossfade_ms,
        offsetS: message.offset_s,
        clipDurationS,
      });
      const entries = [...plan.previews, ...plan.loops].sort((a, b) => a.startS - b.startS);
      for (const entry of entries) {
        this.opts.sink.schedule({
          samples: clip.samples,
          sampleRate: clip.sampleRate,
          whenS: this.sinkTimeFor(message.window_start_s + entry.startS),
          sourceOffsetS: entry.sourceOffsetS,
          durationS: entry.endS - entry.startS,
          fadeInS: entry.fadeInS,
          fadeOutS: entry.fadeOutS,
        });
      }
    } catch (exc) {
      if (exc instanceof WavError || exc instanceof LoopPlanError) {
        // undecodable segment: surface it and reconnect so the server
        // redelivers the current segment at the right offset
        this.lastError = { type: "error", code: "client_decode", message: exc.message };
        this.socket?.close();
        return;
      }
      throw exc;
    }
    this.segments.set(message.segment_index, {
      segmentIndex: message.segment_index,
      sourceChunk: message.source_chunk,
      clipId: message.clip_id,
      loopCount: message.loop_count,
      crossfadeMs: message.crossfade_ms,
      windowStartS: message.window_start_s,
      windowEndS: message.window_end_s,
      offsetS: message.offset_s,
      fallback: message.fallback,
      clipDurationS,
      plan,
    });
  }

  private markEnded(reason: string): void {
    this.phase = "ended";
    this.endedReason = reason;
  }

  private sinkTimeFor(sessionS: number): number {
    const base = this.clockBase ?? { sessionS: 0, sinkS: this.opts.sink.currentTimeS() };
    return base.sinkS + (sessionS - base.sessionS);
  }

  private publish(): void {
    this.opts.onChange?.(this.state());
  }
}
