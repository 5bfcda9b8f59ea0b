/**
 * Piano-roll and curve-overlay geometry, kept free of canvas state so it is
 * testable headless.  The render() helpers take a CanvasRenderingContext2D
 * (or any object with the same surface) and draw rectangles/polylines.
 */

import type { CurveJSON, NoteRect, TranspositionBadge } from "./types.js";

export interface Viewport {
  width: number;
  height: number;
  totalSteps: number;
  pitchLo: number;
  pitchHi: number;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function noteRect(note: NoteRect, vp: Viewport): Rect {
  const stepW = vp.width / vp.totalSteps;
  const pitchH = vp.height / (vp.pitchHi - vp.pitchLo + 1);
  return {
    x: note.onset * stepW,
    y: (vp.pitchHi - note.pitch) * pitchH,
    w: note.duration * stepW,
    h: pitchH,
  };
}

export function pitchBounds(notes: NoteRect[], pad = 3): [number, number] {
  if (notes.length === 0) return [48, 72];
  let lo = 127, hi = 0;
  for (const n of notes) {
    lo = Math.min(lo, n.pitch);
    hi = Math.max(hi, n.pitch);
  }
  return [Math.max(0, lo - pad), Math.min(127, hi + pad)];
}

/** Polyline pixel coordinates for a curve over the shared bar axis. */
export function curvePolyline(curve: CurveJSON, vp: Viewport): [number, number][] {
  const stepW = vp.width / vp.totalSteps;
  return curve.samples.map(([step, value]) =>
    [step * stepW, (1 - value) * vp.height] as [number, number]);
}

export function barLines(vp: Viewport, stepsPerBar = 16): number[] {
  const xs: number[] = [];
  for (let s = 0; s <= vp.totalSteps; s += stepsPerBar) {
    xs.push((s * vp.width) / vp.totalSteps);
  }
  return xs;
}

type Ctx2D = Pick<CanvasRenderingContext2D,
  "fillRect" | "strokeRect" | "beginPath" | "moveTo" | "lineTo" | "stroke"> &
  { fillStyle: string | CanvasGradient | CanvasPattern;
    strokeStyle: string | CanvasGradient | CanvasPattern; lineWidth: number };

export function drawRoll(ctx: Ctx2D, notes: NoteRect[], vp: Viewport,
                         color = "#2f6fb2"): void {
  ctx.fillStyle = color;
  for (const n of notes) {
    const r = noteRect(n, vp);
    ctx.fillRect(r.x, r.y, Math.max(1, r.w - 1), Math.max(1, r.h - 1));
  }
}

export function drawCurve(ctx: Ctx2D, curve: CurveJSON, vp: Viewport,
                          color: string, width = 2): void {
  const line = curvePolyline(curve, vp);
  if (line.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(line[0][0], line[0][1]);
  for (const [x, y] of line.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();
}

/** Badge labels for shifted bars, e.g. "bar 3: +2". */
export function badgeLabels(badges: TranspositionBadge[]): string[] {
  return badges.filter((b) => b.selected)
    .map((b) => `bar ${b.bar}: ${b.shift > 0 ? "+" : ""}${b.shift}`);
}
