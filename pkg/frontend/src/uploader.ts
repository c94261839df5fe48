/**
 * Microphone frame uploader.
 *
 * Accepts float sample blocks at whatever rate the capture path produces,
 * resamples to the session's canonical 16 kHz mono int16, and emits
 * fixed-size audio_frame messages stamped with the session time their first
 * sample belongs to.  Only the interviewee role runs one of these; the
 * interviewer connects audio-free.
 */

import type { AudioFrameMessage } from "./wire";
import { MAX_AUDIO_FRAME_BYTES } from "./wire";
import { floatToPcm16, resampleLinear } from "./wav";

export const UPLOAD_SAMPLE_RATE = 16000;
const DEFAULT_FRAME_S = 1.0;

export class FrameUploader {
  private readonly frameSamples: number;
  private pending: Float32Array = new Float32Array(0);
  private emittedSamples = 0;

  constructor(
    private readonly send: (frame: AudioFrameMessage) => void,
    private readonly baseTimeS = 0,
    frameS = DEFAULT_FRAME_S,
  ) {
    this.frameSamples = Math.round(frameS * UPLOAD_SAMPLE_RATE);
    if (this.frameSamples <= 0) {
      throw new Error(`frame length ${frameS}s is too short`);
    }
    if (this.frameSamples * 2 > MAX_AUDIO_FRAME_BYTES) {
      throw new Error(`frame length ${frameS}s exceeds the audio frame cap`);
    }
  }

  /** Session time the next emitted frame will be stamped with. */
  nextFrameTimeS(): number {
    return this.baseTimeS + this.emittedSamples / UPLOAD_SAMPLE_RATE;
  }

  push(samples: Float32Array, sourceRate: number): void {
    const resampled = resampleLinear(samples, sourceRate, UPLOAD_SAMPLE_RATE);
    const merged = new Float32Array(this.pending.length + resampled.length);
    merged.set(this.pending, 0);
    merged.set(resampled, this.pending.length);
    this.pending = merged;
    while (this.pending.length >= this.frameSamples) {
      this.emit(this.pending.subarray(0, this.frameSamples));
      this.pending = this.pending.slice(this.frameSamples);
    }
  }

  /** Send whatever remains buffered as a final short frame. */
  flush(): void {
    if (this.pending.length > 0) {
      this.emit(this.pending);
      this.pending = new Float32Array(0);
    }
  }

  private emit(samples: Float32Array): void {
    this.send({
      type: "audio_frame",
      t_s: this.nextFrameTimeS(),
      sample_rate: UPLOAD_SAMPLE_RATE,
      pcm: floatToPcm16(samples),
    });
    this.emittedSamples += samples.length;
  }
}
