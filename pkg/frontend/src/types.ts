/** Wire types for the /v1 generation service. */

export type CurveKind = "valence" | "arousal";

/** The curve JSON contract shared with the CLI and service. */
export interface CurveJSON {
  kind: CurveKind;
  horizon: number;
  samples: [number, number][];
}

export interface ValidityReport {
  variance: number;
  extremePointCount: number;
  valid: boolean;
  reasons: string[];
}

export interface GenerationRequest {
  melody_midi: string;
  chords?: string;
  valence_curve: CurveJSON;
  arousal_curve: CurveJSON;
  temperature: number;
  seed: number;
  apply_rules: boolean;
}

export interface TranspositionBadge {
  bar: number;
  shift: number;
  similarity: number;
  selected: boolean;
}

export interface CorrelationInfo {
  valence_r: number | null;
  arousal_r: number | null;
  valence_basis: string | null;
  arousal_basis: string | null;
  error: string | null;
}

export interface GenerationResult {
  accompaniment_midi: string;
  measured_flow: { valence: CurveJSON; arousal: CurveJSON };
  correlation: CorrelationInfo;
  transpositions: TranspositionBadge[];
  model_version: string;
}

export interface NoteRect {
  pitch: number;
  onset: number;
  duration: number;
  velocity: number;
}
