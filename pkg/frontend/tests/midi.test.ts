import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { decodeBase64, parseMidi } from "../src/midi.js";

interface MelodyFixture {
  melody_midi: string;
  total_steps: number;
  tempo_bpm: number;
  melody_notes: { pitch: number; onset: number; duration: number; velocity: number }[];
}

const fixture: MelodyFixture = JSON.parse(
  readFileSync(new URL("./fixtures/melody.json", import.meta.url), "utf-8"));

describe("midi reader", () => {
  it("recovers the backend's note set from the fixture file", () => {
    const parsed = parseMidi(decodeBase64(fixture.melody_midi));
    expect(parsed.totalSteps).toBe(fixture.total_steps);
    expect(parsed.tempoBpm).toBeCloseTo(fixture.tempo_bpm, 6);
    expect(parsed.trackNames).toContain("MELODY");
    const melodyNotes = new Set(fixture.melody_notes.map(
      (n) => `${n.pitch}@${n.onset}+${n.duration}v${n.velocity}`));
    const parsedKeys = new Set(parsed.notes.map(
      (n) => `${n.pitch}@${n.onset}+${n.duration}v${n.velocity}`));
    for (const key of melodyNotes) {
      expect(parsedKeys.has(key), `missing ${key}`).toBe(true);
    }
  });

  it("rejects non-MIDI bytes", () => {
    expect(() => parseMidi(new Uint8Array([1, 2, 3, 4, 5])))
      .toThrow(/not a MIDI file/);
  });

  it("handles a hand-built single-note file", () => {
    // MThd (format 0, 1 track, division 480) + one C4 quarter note at 120 bpm
    const bytes = new Uint8Array([
      0x4d, 0x54, 0x68, 0x64, 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0,
      0x4d, 0x54, 0x72, 0x6b, 0, 0, 0, 20,
      0, 0xff, 0x51, 3, 0x07, 0xa1, 0x20,
      0, 0x90, 60, 90,
      0x83, 0x60, 0x80, 60, 0,
      0, 0xff, 0x2f, 0,
    ]);
    const parsed = parseMidi(bytes);
    expect(parsed.notes).toEqual([{ pitch: 60, onset: 0, duration: 4, velocity: 90 }]);
    expect(parsed.tempoBpm).toBeCloseTo(120, 6);
    expect(parsed.totalSteps).toBe(16);
  });
});
