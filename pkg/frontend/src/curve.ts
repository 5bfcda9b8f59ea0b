/**
 * Curve editor state: draggable control points over the melody's bar axis.
 *
 * Control points are (step, value) pairs kept strictly increasing in time
 * (monotone-in-time); values clamp to [0, 1].  Export samples the control
 * polyline once per bar boundary plus the endpoints, which is what the
 * service receives.
 */

import type { CurveJSON, CurveKind, ValidityReport } from "./types.js";
import { validateCurve } from "./validity.js";

export interface ControlPoint {
  step: number;
  value: number;
}

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

export class CurveEditorState {
  readonly kind: CurveKind;
  readonly horizon: number;
  readonly stepsPerBar: number;
  points: ControlPoint[];

  constructor(kind: CurveKind, horizon: number, stepsPerBar = 16,
              initialValue = 0.5) {
    if (horizon < 2) throw new Error("horizon must span at least 2 steps");
    this.kind = kind;
    this.horizon = horizon;
    this.stepsPerBar = stepsPerBar;
    this.points = [
      { step: 0, value: initialValue },
      { step: horizon - 1, value: initialValue },
    ];
  }

  /** Insert a point, clamping value and keeping steps strictly increasing. */
  addPoint(step: number, value: number): ControlPoint {
    const p = {
      step: clamp(Math.round(step), 0, this.horizon - 1),
      value: clamp(value, 0, 1),
    };
    const existing = this.points.findIndex((q) => q.step === p.step);
    if (existing >= 0) {
      this.points[existing] = p;
      return p;
    }
    this.points.push(p);
    this.points.sort((a, b) => a.step - b.step);
    return p;
  }

  /** Drag point `index` to a new location; time stays monotone. */
  movePoint(index: number, step: number, value: number): ControlPoint {
    if (index < 0 || index >= this.points.length) {
      throw new Error(`no control point ${index}`);
    }
    const lo = index === 0 ? 0 : this.points[index - 1].step + 1;
    const hi = index === this.points.length - 1
      ? this.horizon - 1
      : this.points[index + 1].step - 1;
    const endpoint = index === 0 || index === this.points.length - 1;
    this.points[index] = {
      step: endpoint ? this.points[index].step : clamp(Math.round(step), lo, hi),
      value: clamp(value, 0, 1),
    };
    return this.points[index];
  }

  /** Delete an interior point; endpoints are fixed anchors. */
  deletePoint(index: number): void {
    if (index === 0 || index === this.points.length - 1) return;
    this.points.splice(index, 1);
  }

  /** Piecewise-linear value of the control polyline at an arbitrary step. */
  valueAt(step: number): number {
    const pts = this.points;
    if (step <= pts[0].step) return pts[0].value;
    for (let i = 0; i + 1 < pts.length; i++) {
      const a = pts[i], b = pts[i + 1];
      if (step <= b.step) {
        const t = (step - a.step) / (b.step - a.step);
        return a.value + t * (b.value - a.value);
      }
    }
    return pts[pts.length - 1].value;
  }

  /** Export for the service: one sample per bar boundary plus the end anchor. */
  toCurveJSON(): CurveJSON {
    const samples: [number, number][] = [];
    for (let step = 0; step < this.horizon; step += this.stepsPerBar) {
      samples.push([step, this.valueAt(step)]);
    }
    const last = this.horizon - 1;
    if (samples[samples.length - 1][0] !== last) {
      samples.push([last, this.valueAt(last)]);
    }
    return { kind: this.kind, horizon: this.horizon, samples };
  }

  /** Live validity badge for the editor; gates the submit button. */
  validity(): ValidityReport {
    return validateCurve(this.toCurveJSON());
  }
}

/** Canonical serialization: stable field order, numbers as-is. */
export function serializeCurve(curve: CurveJSON): string {
  return JSON.stringify({
    kind: curve.kind,
    horizon: curve.horizon,
    samples: curve.samples,
  });
}

export function parseCurve(text: string): CurveJSON {
  const raw = JSON.parse(text) as CurveJSON;
  if (raw.kind !== "valence" && raw.kind !== "arousal") {
    throw new Error(`bad curve kind: ${String(raw.kind)}`);
  }
  if (!Array.isArray(raw.samples) || raw.samples.length < 2) {
    throw new Error("curve needs at least 2 samples");
  }
  let prev = -Infinity;
  for (const [step, value] of raw.samples) {
    if (step <= prev) throw new Error("sample steps must be strictly increasing");
    if (value < 0 || value > 1) throw new Error("sample values must lie in [0, 1]");
    prev = step;
  }
  return { kind: raw.kind, horizon: raw.horizon, samples: raw.samples.map(
    ([s, v]) => [s, v] as [number, number]) };
}
