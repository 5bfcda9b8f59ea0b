/**
 * Client-side playback: schedules one oscillator per note on a WebAudio
 * context, with a moving playhead synchronized to the bar axis and a
 * per-channel mute (melody vs accompaniment).  The audio context is
 * injected so tests can drive a fake clock.
 */

import type { NoteRect } from "./types.js";

export interface AudioContextLike {
  currentTime: number;
  destination: unknown;
  createOscillator(): OscillatorLike;
  createGain(): GainLike;
}

export interface OscillatorLike {
  type: string;
  frequency: { value: number };
  connect(node: unknown): void;
  start(when: number): void;
  stop(when: number): void;
}

export interface GainLike {
  gain: { value: number; setValueAtTime(v: number, t: number): void };
  connect(node: unknown): void;
}

export const midiToHz = (pitch: number) => 440 * Math.pow(2, (pitch - 69) / 12);

export interface Channel {
  name: string;
  notes: NoteRect[];
  muted: boolean;
}

export class Player {
  channels: Channel[] = [];
  private startedAt: number | null = null;
  private startStep = 0;
  private scheduled: OscillatorLike[] = [];

  constructor(private ctx: AudioContextLike, private tempoBpm = 120) {}

  get secondsPerStep(): number {
    return 60 / (this.tempoBpm * 4);
  }

  addChannel(name: string, notes: NoteRect[]): Channel {
    const channel = { name, notes, muted: false };
    this.channels.push(channel);
    return channel;
  }

  setMuted(name: string, muted: boolean): void {
    for (const c of this.channels) if (c.name === name) c.muted = muted;
  }

  get playing(): boolean {
    return this.startedAt !== null;
  }

  /** Current playhead position in 16th steps. */
  position(): number {
    if (this.startedAt === null) return this.startStep;
    return this.startStep + (this.ctx.currentTime - this.startedAt) / this.secondsPerStep;
  }

  /** Start (or restart) playback at a given step. */
  play(fromStep?: number): void {
    this.stop();
    this.startStep = fromStep ?? this.startStep;
    this.startedAt = this.ctx.currentTime;
    for (const channel of this.channels) {
      if (channel.muted) continue;
      for (const note of channel.notes) {
        if (note.onset + note.duration <= this.startStep) continue;
        const begin = Math.max(0, (note.onset - this.startStep) * this.secondsPerStep);
        const length = note.duration * this.secondsPerStep;
        const osc = this.ctx.createOscillator();
        const gain = this.ctx.createGain();
        osc.type = "triangle";
        osc.frequency.value = midiToHz(note.pitch);
        gain.gain.value = (note.velocity / 127) * 0.2;
        osc.connect(gain);
        gain.connect(this.ctx.destination);
        osc.start(this.ctx.currentTime + begin);
        osc.stop(this.ctx.currentTime + begin + length);
        this.scheduled.push(osc);
      }
    }
  }

  pause(): void {
    if (this.startedAt === null) return;
    this.startStep = this.position();
    this.stopScheduled();
    this.startedAt = null;
  }

  stop(): void {
    this.stopScheduled();
    this.startedAt = null;
  }

  seek(step: number): void {
    const wasPlaying = this.playing;
    this.startStep = step;
    if (wasPlaying) this.play(step);
  }

  private stopScheduled(): void {
    for (const osc of this.scheduled) {
      try {
        osc.stop(this.ctx.currentTime);
      } catch {
        // already stopped
      }
    }
    this.scheduled = [];
  }
}
