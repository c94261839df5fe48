/**
 * Audio output abstraction.
 *
 * The session client plans playback in seconds and hands each scheduled
 * entry to a sink; the WebAudio implementation drives real speakers, while
 * tests substitute a recording sink.  Fades are equal-power so crossfades
 * hold constant perceived loudness.
 */

export interface ScheduleRequest {
  samples: Float32Array;
  sampleRate: number;
  whenS: number; // sink-clock time to start at
  sourceOffsetS: number; // read position within samples
  durationS: number;
  fadeInS: number;
  fadeOutS: number;
}

export interface AudioSink {
  currentTimeS(): number;
  schedule(request: ScheduleRequest): void;
  setGain(value: number): void; // 0..1 master volume
  stopAll(): void;
}

const FADE_CURVE_POINTS = 32;

function equalPowerCurve(rising: boolean): Float32Array {
  const curve = new Float32Array(FADE_CURVE_POINTS);
  for (let i = 0; i < FADE_CURVE_POINTS; i++) {
    const phase = (i / (FADE_CURVE_POINTS - 1)) * (Math.PI / 2);
    curve[i] = rising ? Math.sin(phase) : Math.cos(phase);
  }
  return curve;
}

const FADE_IN_CURVE = equalPowerCurve(true);
const FADE_OUT_CURVE = equalPowerCurve(false);

/** Platform audio graph sink; requires a browser AudioContext. */
export class WebAudioSink implements AudioSink {
  private readonly context: AudioContext;
  private readonly master: GainNode;
  private readonly active = new Set<AudioBufferSourceNode>();

  constructor(context?: AudioContext) {
    this.context = context ?? new AudioContext();
    this.master = this.context.createGain();
    this.master.connect(this.context.destination);
  }

  currentTimeS(): number {
    return this.context.currentTime;
  }

  schedule(request: ScheduleRequest): void {
    let { whenS, sourceOffsetS, durationS } = request;
    const now = this.context.currentTime;
    if (whenS < now) {
      // late arrival: skip the part that already elapsed
      const late = now - whenS;
      if (late >= durationS) return;
      whenS = now;
      sourceOffsetS += late;
      durationS -= late;
    }
    const buffer = this.context.createBuffer(1, request.samples.length, request.sampleRate);
    buffer.getChannelData(0).set(request.samples);

    const source = this.context.createBufferSource();
    source.buffer = buffer;
    const envelope = this.context.createGain();
    source.connect(envelope);
    envelope.connect(this.master);

    if (request.fadeInS > 0) {
      envelope.gain.setValueAtTime(0, whenS);
      envelope.gain.setValueCurveAtTime(FADE_IN_CURVE, whenS, request.fadeInS);
    }
    if (request.fadeOutS > 0 && durationS > request.fadeOutS) {
      envelope.gain.setValueCurveAtTime(
        FADE_OUT_CURVE,
        whenS + durationS - request.fadeOutS,
        request.fadeOutS,
      );
    }
    source.start(whenS, sourceOffsetS, durationS);
    this.active.add(source);
    source.onended = () => this.active.delete(source);
  }

  setGain(value: number): void {
    this.master.gain.setTargetAtTime(Math.max(0, Math.min(1, value)), this.context.currentTime, 0.01);
  }

  stopAll(): void {
    for (const source of this.active) {
      try {
        source.stop();
      } catch {
        // already stopped
      }
    }
    this.active.clear();
  }
}

/** Sink that only records what would have played; used by tests and tooling. */
export class RecordingSink implements AudioSink {
  readonly scheduled: ScheduleRequest[] = [];
  readonly gains: number[] = [];
  private timeS = 0;

  currentTimeS(): number {
    return this.timeS;
  }

  advance(byS: number): void {
    this.timeS += byS;
  }

  schedule(request: ScheduleRequest): void {
    this.scheduled.push(request);
  }

  setGain(value: number): void {
    this.gains.push(value);
  }

  stopAll(): void {
    this.scheduled.length = 0;
  }
}
