/**
 * Client-side mirror of the server's curve gate so the submit button can
 * react instantly.  The math must agree with the service verdict: exact
 * piecewise-linear variance of the sampled curve, and interior extreme
 * points counted as strict sign changes of the discrete derivative with
 * flat runs merged.  Thresholds: variance > 0.15, at most 5 extrema.
 */

import type { CurveJSON, ValidityReport } from "./types.js";

export const MIN_CURVE_VARIANCE = 0.15;
export const MAX_EXTREME_POINTS = 5;

export function curveVariance(samples: [number, number][]): number {
  if (samples.length < 2) return 0;
  let span = 0;
  let weighted = 0;
  for (let i = 0; i + 1 < samples.length; i++) {
    const dt = samples[i + 1][0] - samples[i][0];
    span += dt;
    weighted += ((samples[i][1] + samples[i + 1][1]) / 2) * dt;
  }
  if (span === 0) return 0;
  const mean = weighted / span;
  let integral = 0;
  for (let i = 0; i + 1 < samples.length; i++) {
    const dt = samples[i + 1][0] - samples[i][0];
    const a = samples[i][1] - mean;
    const b = samples[i + 1][1] - mean;
    // exact integral of the squared linear segment: dt/3 * (a^2 + ab + b^2)
    integral += ((a * a + a * b + b * b) / 3) * dt;
  }
  return integral / span;
}

export function countExtremePoints(samples: [number, number][]): number {
  const signs: number[] = [];
  for (let i = 0; i + 1 < samples.length; i++) {
    const d = samples[i + 1][1] - samples[i][1];
    if (d !== 0) signs.push(Math.sign(d)); // plateau merging: zeros drop out
  }
  let count = 0;
  for (let i = 1; i < signs.length; i++) {
    if (signs[i] !== signs[i - 1]) count++;
  }
  return count;
}

export function validateCurve(curve: CurveJSON): ValidityReport {
  const variance = curveVariance(curve.samples);
  const extremePointCount = countExtremePoints(curve.samples);
  const reasons: string[] = [];
  if (variance <= MIN_CURVE_VARIANCE) reasons.push("flatness");
  if (extremePointCount > MAX_EXTREME_POINTS) reasons.push("too many extreme points");
  return { variance, extremePointCount, valid: reasons.length === 0, reasons };
}
