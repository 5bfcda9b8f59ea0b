import { describe, expect, it } from "vitest";

import { CurveEditorState, parseCurve, serializeCurve } from "../src/curve.js";

describe("curve editor state", () => {
  it("starts with two anchored endpoints", () => {
    const ed = new CurveEditorState("valence", 128);
    expect(ed.points).toEqual([
      { step: 0, value: 0.5 },
      { step: 127, value: 0.5 },
    ]);
  });

  it("clamps dragged values into [0, 1]", () => {
    const ed = new CurveEditorState("valence", 64);
    const p = ed.addPoint(30, 1.7);
    expect(p.value).toBe(1);
    ed.movePoint(1, 30, -0.4);
    expect(ed.points[1].value).toBe(0);
  });

  it("keeps control points strictly monotone in time", () => {
    const ed = new CurveEditorState("arousal", 64);
    ed.addPoint(20, 0.8);
    ed.addPoint(40, 0.2);
    ed.movePoint(2, 5, 0.3); // cannot cross its left neighbour at 20
    expect(ed.points[2].step).toBe(21);
    ed.movePoint(1, 60, 0.9); // cannot cross its right neighbour either
    expect(ed.points[1].step).toBe(20);
  });

  it("replaces a point dropped on an occupied step", () => {
    const ed = new CurveEditorState("valence", 64);
    ed.addPoint(10, 0.2);
    ed.addPoint(10, 0.9);
    expect(ed.points.filter((p) => p.step === 10)).toHaveLength(1);
    expect(ed.valueAt(10)).toBe(0.9);
  });

  it("endpoints cannot be deleted", () => {
    const ed = new CurveEditorState("valence", 64);
    ed.addPoint(10, 0.2);
    ed.deletePoint(0);
    ed.deletePoint(ed.points.length - 1);
    expect(ed.points).toHaveLength(3);
    ed.deletePoint(1);
    expect(ed.points).toHaveLength(2);
  });

  it("exports one sample per bar plus the end anchor", () => {
    const ed = new CurveEditorState("valence", 64, 16);
    const curve = ed.toCurveJSON();
    expect(curve.samples.map(([s]) => s)).toEqual([0, 16, 32, 48, 63]);
    expect(curve.horizon).toBe(64);
  });

  it("flat editor state is not submittable; adding swing fixes it", () => {
    const ed = new CurveEditorState("valence", 128);
    expect(ed.validity().valid).toBe(false);
    expect(ed.validity().reasons).toContain("flatness");
    // a square shape dwells at the extremes, clearing the variance gate
    // (a plain triangle peaks too briefly: variance A^2/3 stays below 0.15)
    ed.movePoint(0, 0, 0.02);
    ed.addPoint(2, 0.98);
    ed.addPoint(62, 0.98);
    ed.addPoint(66, 0.02);
    ed.movePoint(ed.points.length - 1, 127, 0.02);
    expect(ed.validity().valid).toBe(true);
  });

  it("a sixth interior peak disables submission", () => {
    const ed = new CurveEditorState("arousal", 256);
    ed.movePoint(0, 0, 0.05);
    ed.movePoint(1, 255, 0.05);
    for (let k = 0; k < 6; k++) {
      ed.addPoint(16 + k * 32, 0.95);
      ed.addPoint(32 + k * 32, 0.05);
    }
    const report = ed.validity();
    expect(report.extremePointCount).toBeGreaterThan(5);
    expect(report.valid).toBe(false);
  });
});

describe("curve JSON round trip", () => {
  it("serialization is bit-exact through parse/serialize", () => {
    const texts = [
      '{"kind":"valence","horizon":128,"samples":[[0,0.5],[63,0.25],[127,1]]}',
      '{"kind":"arousal","horizon":32,"samples":[[0,0],[31,0.8999999999999999]]}',
    ];
    for (const text of texts) {
      const once = serializeCurve(parseCurve(text));
      expect(once).toBe(text);
      expect(serializeCurve(parseCurve(once))).toBe(once);
    }
  });

  it("editor exports survive a round trip exactly", () => {
    const ed = new CurveEditorState("valence", 96);
    ed.addPoint(17, 0.123456789);
    ed.addPoint(55, 0.987654321);
    const exported = ed.toCurveJSON();
    const back = parseCurve(serializeCurve(exported));
    expect(back).toEqual(exported);
  });

  it("rejects malformed curves", () => {
    expect(() => parseCurve('{"kind":"mood","horizon":4,"samples":[[0,0],[1,1]]}'))
      .toThrow(/kind/);
    expect(() => parseCurve('{"kind":"valence","horizon":4,"samples":[[0,0]]}'))
      .toThrow(/2 samples/);
    expect(() => parseCurve('{"kind":"valence","horizon":4,"samples":[[1,0],[1,1]]}'))
      .toThrow(/increasing/);
    expect(() => parseCurve('{"kind":"valence","horizon":4,"samples":[[0,0],[1,2]]}'))
      .toThrow(/\[0, 1\]/);
  });
});
