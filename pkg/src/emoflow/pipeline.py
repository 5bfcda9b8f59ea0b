"""End-to-end generation: encode conditioned inputs, decode, correct, measure.

The user supplies a melody TrackSet (with chord annotations) plus valence and
arousal curves.  Per 2-bar segment the curves are injected into the encoder
inputs: chord chroma columns are scaled by the requested valence level (on
the quality-weight scale) and the melody's onset grid is mass-scaled per bar
so its quantized arousal matches the requested level.  After decoding, the
rule constraint re-aligns stray bars to the annotated chords, and the
finished accompaniment is measured back through the same quantizers to
report how well the flow was honored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import emotion, evaluation, rules, score_io
from .emotion import EmotionCurve
from .score_io import ChromaSequence, PianoRoll, TrackSet
from .trainer import melody_beat_chroma
from .vamodel import VAModel, roll_from_decoding

DEFAULT_VELOCITY = 100


class PipelineError(ValueError):
    pass


@dataclass
class GenerationOutput:
    accompaniment: PianoRoll
    measured_valence: EmotionCurve
    measured_arousal: EmotionCurve
    correlation: evaluation.CorrelationReport | None
    correlation_error: str | None
    transpositions: list[rules.TranspositionDecision]
    attention: np.ndarray | None = None
    pre_constraint: PianoRoll | None = None


def detect_chords(roll: PianoRoll,
                  steps_per_column: int = score_io.STEPS_PER_QUARTER) -> ChromaSequence:
    """Per-beat chord detection by template matching over all roots and qualities."""
    active = roll.binarized()
    beats = roll.num_steps // steps_per_column
    chroma = np.zeros((score_io.NUM_PITCH_CLASSES, beats))
    root = np.zeros(beats, dtype=np.int64)
    templates = [(q, emotion._QUALITY_TEMPLATES[q]) for q in emotion.CHORD_QUALITY_WEIGHTS]
    for b in range(beats):
        window = active[:, b * steps_per_column:(b + 1) * steps_per_column]
        profile = np.zeros(score_io.NUM_PITCH_CLASSES)
        for p in np.flatnonzero(window.any(axis=1)):
            profile[p % score_io.NUM_PITCH_CLASSES] += 1.0
        if not profile.any():
            continue
        best, best_root, best_quality = -np.inf, 0, "maj"
        for r in range(score_io.NUM_PITCH_CLASSES):
            rotated = np.roll(profile, -r)
            for quality, template in templates:
                score = float(rotated @ template) / (
                    np.linalg.norm(rotated) * np.linalg.norm(template))
                if score > best + 1e-12:
                    best, best_root, best_quality = score, r, quality
        for interval in score_io.CHORD_TEMPLATES[best_quality]:
            chroma[(best_root + interval) % score_io.NUM_PITCH_CLASSES, b] = 1.0
        root[b] = best_root
    return ChromaSequence(chroma, root)


def _rescale_to_steps(curve: EmotionCurve, factor: int) -> EmotionCurve:
    samples = [(s * factor, v) for s, v in curve.samples]
    return EmotionCurve(curve.kind, samples, curve.horizon * factor)


def measure_flow(roll: PianoRoll) -> tuple[EmotionCurve, EmotionCurve]:
    """Measured (valence, arousal) curves of a finished accompaniment.

    Arousal comes straight from the occupancy-tensor quantizer per bar.
    Valence detects a chord per beat from the generated notes, then runs the
    standard root-normalize -> weight -> quantize path per 8-beat window.
    """
    arousal = emotion.quantize_arousal(emotion.arousal_map(roll), roll.steps_per_bar)

    chords = detect_chords(roll)
    window = emotion.VALENCE_WINDOW
    beats = chords.num_steps
    samples: list[tuple[int, float]] = []
    for start in range(0, beats - beats % window, window):
        sl = slice(start, start + window)
        piece = ChromaSequence(chords.chroma[:, sl], chords.root[sl])
        vseq = emotion.valence_map(score_io.normalize_root(piece))
        part = emotion.quantize_valence(vseq)
        for s, v in part.samples:
            step = (start + s) * score_io.STEPS_PER_QUARTER
            if samples and samples[-1][0] >= step:
                continue
            samples.append((step, v))
    if not samples:
        samples = [(0, emotion.NO_CHORD_VALENCE)]
    if len(samples) == 1:
        samples.append((max(roll.num_steps - 1, samples[0][0] + 1), samples[0][1]))
    valence = EmotionCurve("valence", samples, roll.num_steps)
    return valence, arousal


def _segment_valence_input(seg: TrackSet, curve: EmotionCurve, seg_start: int,
                           weights=emotion.CHORD_QUALITY_WEIGHTS) -> np.ndarray:
    """Chord chroma columns scaled by the requested valence (on the weight scale)."""
    beat_chords = score_io.downsample_chroma(seg.chords)
    normalized = score_io.normalize_root(beat_chords)
    lo, hi = min(weights.values()), max(weights.values())
    out = np.zeros_like(normalized.chroma)
    for b in range(normalized.num_steps):
        col = normalized.chroma[:, b]
        if not col.any():
            continue
        level = float(curve.values_at(seg_start + b * score_io.STEPS_PER_QUARTER))
        out[:, b] = (col / col.max()) * (lo + level * (hi - lo))
    return out


def _segment_arousal_input(seg: TrackSet, curve: EmotionCurve,
                           seg_start: int) -> np.ndarray:
    """Melody onset grid, mass-scaled per bar to hit the requested arousal level."""
    grid = emotion.arousal_features(emotion.arousal_map(seg.melody))
    spb = seg.bars.steps_per_bar
    for b in range(seg.num_steps // spb):
        sl = slice(b * spb, (b + 1) * spb)
        mass = grid[:, sl].sum()
        if mass == 0:
            continue
        level = float(curve.values_at(seg_start + b * spb))
        wanted = level * emotion.AROUSAL_MASS_RATE * spb
        grid[:, sl] *= wanted / mass
    return grid


def _bar_chroma(chords: ChromaSequence, lo: int, hi: int) -> np.ndarray:
    return chords.chroma[:, lo:hi].max(axis=1)


def generate(model: VAModel, ts: TrackSet, valence_curve: EmotionCurve,
             arousal_curve: EmotionCurve, temperature: float = 0.0, seed: int = 0,
             apply_rules: bool = True,
             policy: rules.TranspositionPolicy | None = None) -> GenerationOutput:
    """Run the full pipeline on one song; deterministic for fixed inputs + seed."""
    if not ts.chords.has_chord().any():
        raise PipelineError("chord annotations are required for generation")
    segments = score_io.segment(ts)
    if not segments:
        raise PipelineError("melody is shorter than one 2-bar segment")

    generator = torch.Generator().manual_seed(seed)
    model.eval()
    parts = []
    attention = None
    with torch.no_grad():
        for idx, seg in enumerate(segments):
            seg_start = idx * seg.num_steps
            v_in = torch.as_tensor(
                _segment_valence_input(seg, valence_curve, seg_start),
                dtype=torch.float32).unsqueeze(0)
            a_in = torch.as_tensor(
                _segment_arousal_input(seg, arousal_curve, seg_start),
                dtype=torch.float32).unsqueeze(0)
            cond = torch.as_tensor(
                melody_beat_chroma(seg.melody, emotion.VALENCE_WINDOW),
                dtype=torch.float32).unsqueeze(0)
            z_v = model.encode_valence(v_in).sample(temperature, generator)
            z_a = model.encode_arousal(a_in).sample(temperature, generator)
            out = model.decode(z_a, z_v, cond)
            parts.append(roll_from_decoding(out.piano, velocity=DEFAULT_VELOCITY,
                                            steps_per_bar=seg.bars.steps_per_bar))
            attention = out.piano.attention[0].detach().cpu().numpy()

    grid = np.concatenate([p.grid for p in parts], axis=1)
    if grid.shape[1] < ts.num_steps:  # trailing odd bars stay silent
        pad = np.zeros((score_io.NUM_PITCHES, ts.num_steps - grid.shape[1]), dtype=grid.dtype)
        grid = np.concatenate([grid, pad], axis=1)
    roll = PianoRoll(grid, role="accompaniment", steps_per_bar=ts.bars.steps_per_bar)

    pre_constraint = roll
    decisions: list[rules.TranspositionDecision] = []
    if apply_rules:
        spb = ts.bars.steps_per_bar
        annotated = [_bar_chroma(ts.chords, b * spb, (b + 1) * spb)
                     for b in range(roll.num_steps // spb)]
        bars = score_io.BarStructure.from_time_signature(roll.num_steps,
                                                         ts.bars.time_signature)
        decisions = rules.decide_transpositions(roll, bars, annotated, policy)
        roll = rules.apply_constraint(roll, decisions)

    measured_valence, measured_arousal = measure_flow(roll)
    correlation, corr_error = None, None
    try:
        correlation = evaluation.flow_correlation(
            valence_curve, arousal_curve, measured_valence, measured_arousal)
    except evaluation.UndefinedCorrelationError as exc:
        corr_error = str(exc)

    return GenerationOutput(roll, measured_valence, measured_arousal, correlation,
                            corr_error, decisions, attention, pre_constraint)
