import { describe, expect, it } from "vitest";
import { decodeWav, floatToPcm16, resampleLinear, WavError } from "../src/wav";
import { makeWav, sine } from "./helpers";

describe("decodeWav", () => {
  it("recovers samples, rate, and duration", () => {
    const samples = sine(0.5, 32000);
    const clip = decodeWav(makeWav(samples, 32000));
    expect(clip.sampleRate).toBe(32000);
    expect(clip.samples.length).toBe(16000);
    expect(clip.durationS).toBeCloseTo(0.5, 9);
    for (let i = 0; i < clip.samples.length; i += 997) {
      expect(clip.samples[i]).toBeCloseTo(samples[i], 3);
    }
  });

  it("tolerates extra chunks before the data chunk", () => {
    const plain = makeWav(sine(0.01, 16000), 16000);
    const listBody = new TextEncoder().encode("INFOsoftmeetmuse");
    const padded = new Uint8Array(plain.byteLength + 8 + listBody.length);
    padded.set(plain.subarray(0, 36), 0); // header + fmt
    const view = new DataView(padded.buffer);
    let at = 36;
    padded.set(new TextEncoder().encode("LIST"), at);
    view.setUint32(at + 4, listBody.length, true);
    padded.set(listBody, at + 8);
    at += 8 + listBody.length;
    padded.set(plain.subarray(36), at); // original data chunk
    view.setUint32(4, padded.byteLength - 8, true);
    const clip = decodeWav(padded);
    expect(clip.sampleRate).toBe(16000);
    expect(clip.samples.length).toBe(160);
  });

  it("rejects non-WAV bytes", () => {
    expect(() => decodeWav(new TextEncoder().encode("ID3\x03rubbish"))).toThrow(WavError);
    expect(() => decodeWav(new Uint8Array(4))).toThrow(/RIFF/);
  });

  it("rejects stereo and non-16-bit files", () => {
    const mono = makeWav(sine(0.01, 16000), 16000);
    const stereo = mono.slice();
    new DataView(stereo.buffer).setUint16(22, 2, true);
    expect(() => decodeWav(stereo)).toThrow(/only mono/);

    const eightBit = mono.slice();
    new DataView(eightBit.buffer).setUint16(34, 8, true);
    expect(() => decodeWav(eightBit)).toThrow(/only 16-bit/);
  });
});

describe("resampleLinear", () => {
  it("is identity at matching rates", () => {
    const samples = sine(0.1, 16000);
    const out = resampleLinear(samples, 16000, 16000);
    expect(out).not.toBe(samples);
    expect(Array.from(out)).toEqual(Array.from(samples));
  });

  it("halves the length from 32 kHz to 16 kHz", () => {
    const out = resampleLinear(new Float32Array(3200), 32000, 16000);
    expect(out.length).toBe(1600);
  });

  it("triples a 16 kHz ramp to 48 kHz and preserves its shape", () => {
    const ramp = Float32Array.from({ length: 161 }, (_, i) => i / 160);
    const out = resampleLinear(ramp, 16000, 48000);
    expect(out.length).toBe(483);
    expect(out[0]).toBeCloseTo(0, 6);
    for (let i = 1; i < out.length; i++) {
      expect(out[i]).toBeGreaterThanOrEqual(out[i - 1] - 1e-6);
    }
  });
});

describe("floatToPcm16", () => {
  it("round-trips through decodeWav within quantization error", () => {
    const samples = sine(0.02, 16000, 440, 0.5);
    const bytes = floatToPcm16(samples);
    expect(bytes.byteLength).toBe(samples.length * 2);
    const view = new DataView(bytes.buffer);
    for (let i = 0; i < samples.length; i += 13) {
      expect(view.getInt16(i * 2, true) / 32767).toBeCloseTo(samples[i], 3);
    }
  });

  it("clamps out-of-range floats to full scale", () => {
    const bytes = floatToPcm16(Float32Array.from([2.0, -2.0]));
    const view = new DataView(bytes.buffer);
    expect(view.getInt16(0, true)).toBe(32767);
    expect(view.getInt16(2, true)).toBe(-32767);
  });
});
