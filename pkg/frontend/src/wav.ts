/** Minimal PCM16 mono WAV decoding plus the resampling the uploader needs. */

export class WavError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "WavError";
  }
}

export interface DecodedClip {
  sampleRate: number;
  samples: Float32Array; // mono, in [-1, 1]
  durationS: number;
}

/** Decode a PCM16 mono WAV file into float samples. */
export function decodeWav(bytes: Uint8Array): DecodedClip {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (bytes.byteLength < 12 || tag(bytes, 0) !== "RIFF" || tag(bytes, 8) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE file");
  }
  let sampleRate = 0;
  let channels = 0;
  let bitsPerSample = 0;
  let data: Uint8Array | null = null;

  let at = 12;
  while (at + 8 <= bytes.byteLength) {
    const chunkId = tag(bytes, at);
    const chunkSize = view.getUint32(at + 4, true);
    const body = at + 8;
    if (chunkId === "fmt ") {
      if (chunkSize < 16) throw new WavError("fmt chunk too short");
      const format = view.getUint16(body, true);
      if (format !== 1) throw new WavError(`only PCM supported, got format ${format}`);
      channels = view.getUint16(body + 2, true);
      sampleRate = view.getUint32(body + 4, true);
      bitsPerSample = view.getUint16(body + 14, true);
    } else if (chunkId === "data") {
      data = bytes.subarray(body, body + chunkSize);
    }
    at = body + chunkSize + (chunkSize % 2); // chunks are word-aligned
  }

  if (sampleRate === 0) throw new WavError("missing fmt chunk");
  if (data === null) throw new WavError("missing data chunk");
  if (channels !== 1) throw new WavError(`only mono supported, got ${channels} channels`);
  if (bitsPerSample !== 16) throw new WavError(`only 16-bit PCM supported, got ${bitsPerSample}`);
  if (data.byteLength % 2 !== 0) throw new WavError("data chunk has an odd byte length");

  const count = data.byteLength / 2;
  const pcm = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const samples = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    samples[i] = pcm.getInt16(i * 2, true) / 32768;
  }
  return { sampleRate, samples, durationS: count / sampleRate };
}

/** Linear-interpolation resample; identity when the rates already match. */
export function resampleLinear(
  samples: Float32Array,
  fromRate: number,
  toRate: number,
): Float32Array {
  if (fromRate <= 0 || toRate <= 0) throw new WavError("sample rates must be positive");
  if (fromRate === toRate) return samples.slice();
  if (samples.length === 0) return new Float32Array(0);
  const outLength = Math.max(1, Math.round((samples.length * toRate) / fromRate));
  const out = new Float32Array(outLength);
  const step = fromRate / toRate;
  for (let i = 0; i < outLength; i++) {
    const pos = i * step;
    const i0 = Math.min(Math.floor(pos), samples.length - 1);
    const i1 = Math.min(i0 + 1, samples.length - 1);
    const frac = pos - i0;
    out[i] = samples[i0] * (1 - frac) + samples[i1] * frac;
  }
  return out;
}

/** Float samples to little-endian int16 PCM bytes, clamped to full scale. */
export function floatToPcm16(samples: Float32Array): Uint8Array {
  const out = new Uint8Array(samples.length * 2);
  const view = new DataView(out.buffer);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    view.setInt16(i * 2, Math.round(clamped * 32767), true);
  }
  return out;
}

function tag(bytes: Uint8Array, at: number): string {
  return String.fromCharCode(bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]);
}
