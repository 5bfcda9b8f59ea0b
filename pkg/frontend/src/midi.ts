/**
 * Minimal Standard MIDI File reader for piano-roll display: extracts note
 * rectangles quantized to the 16th-note grid.  Only what the viewer needs;
 * writing stays server-side.
 */

import type { NoteRect } from "./types.js";

class Reader {
  pos = 0;
  constructor(private data: Uint8Array) {}

  u8(): number {
    if (this.pos >= this.data.length) throw new Error("unexpected end of MIDI data");
    return this.data[this.pos++];
  }

  u16(): number { return (this.u8() << 8) | this.u8(); }

  u32(): number { return this.u16() * 0x10000 + this.u16(); }

  bytes(n: number): Uint8Array {
    const out = this.data.slice(this.pos, this.pos + n);
    if (out.length < n) throw new Error("unexpected end of MIDI data");
    this.pos += n;
    return out;
  }

  varlen(): number {
    let value = 0;
    for (let i = 0; i < 4; i++) {
      const b = this.u8();
      value = (value << 7) | (b & 0x7f);
      if (!(b & 0x80)) return value;
    }
    throw new Error("bad variable-length quantity");
  }
}

export interface ParsedMidi {
  notes: NoteRect[];
  totalSteps: number;
  tempoBpm: number;
  trackNames: string[];
}

export function decodeBase64(b64: string): Uint8Array {
  const bin = atob(b64);  // global in browsers and Node >= 16
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Parse a format 0/1 SMF into quantized note rectangles. */
export function parseMidi(data: Uint8Array): ParsedMidi {
  const r = new Reader(data);
  const magic = String.fromCharCode(...r.bytes(4));
  if (magic !== "MThd") throw new Error(`not a MIDI file (got ${magic})`);
  const headerLen = r.u32();
  const format = r.u16();
  const nTracks = r.u16();
  const division = r.u16();
  if (format > 1) throw new Error(`unsupported MIDI format ${format}`);
  if (division & 0x8000) throw new Error("SMPTE division unsupported");
  r.bytes(headerLen - 6);

  const ticksPerStep = division / 4;
  const notes: NoteRect[] = [];
  const trackNames: string[] = [];
  let tempoBpm = 120;
  let tempoSeen = false;

  for (let t = 0; t < nTracks; t++) {
    const chunk = String.fromCharCode(...r.bytes(4));
    if (chunk !== "MTrk") throw new Error(`expected MTrk, got ${chunk}`);
    const length = r.u32();
    const end = r.pos + length;
    let tick = 0;
    let running = 0;
    const open = new Map<number, { tick: number; velocity: number }>();

    const close = (key: number, pitch: number) => {
      const started = open.get(key);
      if (started === undefined) return;
      open.delete(key);
      const onset = Math.round(started.tick / ticksPerStep);
      const offset = Math.round(tick / ticksPerStep);
      notes.push({
        pitch,
        onset,
        duration: Math.max(1, offset - onset),
        velocity: started.velocity,
      });
    };

    while (r.pos < end) {
      tick += r.varlen();
      let status = r.u8();
      if (status < 0x80) {
        r.pos--;
        status = running;
      } else if (status < 0xf0) {
        running = status;
      }
      const kind = status & 0xf0;
      const chan = status & 0x0f;
      if (kind === 0x90) {
        const pitch = r.u8();
        const vel = r.u8();
        const key = chan * 128 + pitch;
        if (vel === 0) close(key, pitch);
        else {
          close(key, pitch);
          open.set(key, { tick, velocity: vel });
        }
      } else if (kind === 0x80) {
        const pitch = r.u8();
        r.u8();
        close(chan * 128 + pitch, pitch);
      } else if (kind === 0xa0 || kind === 0xb0 || kind === 0xe0) {
        r.bytes(2);
      } else if (kind === 0xc0 || kind === 0xd0) {
        r.bytes(1);
      } else if (status === 0xff) {
        const metaType = r.u8();
        const len = r.varlen();
        const payload = r.bytes(len);
        if (metaType === 0x51 && len === 3 && !tempoSeen) {
          const us = (payload[0] << 16) | (payload[1] << 8) | payload[2];
          tempoBpm = 60e6 / us;
          tempoSeen = true;
        } else if (metaType === 0x03) {
          trackNames.push(String.fromCharCode(...payload).trim());
        } else if (metaType === 0x2f) {
          break;
        }
      } else if (status === 0xf0 || status === 0xf7) {
        r.bytes(r.varlen());
      } else {
        throw new Error(`unsupported status byte 0x${status.toString(16)}`);
      }
    }
    r.pos = end;
  }

  const last = notes.reduce((m, n) => Math.max(m, n.onset + n.duration), 0);
  const totalSteps = Math.ceil(last / 16) * 16;
  notes.sort((a, b) => a.onset - b.onset || a.pitch - b.pitch);
  return { notes, totalSteps, tempoBpm, trackNames };
}
