"""Music-theory rule constraint: per-bar transposition against annotated chords.

For each bar the generated notes collapse to a unit pitch-class histogram,
which is compared against the annotated chord's chroma under all 12 circular
transpositions.  Bars whose best rotation beats the untransposed cosine by a
policy margin get pitch-shifted, pulling the generated harmony back toward
the annotation without touching rhythm or dynamics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .score_io import (
    NUM_PITCH_CLASSES,
    BarStructure,
    NoteEvent,
    PianoRoll,
)


@dataclass
class TranspositionDecision:
    """Outcome of the per-bar chord comparison."""

    bar_index: int
    best_shift: int            # semitones in [-6, +5]
    similarity: float          # cosine at best_shift
    selected: bool = False
    baseline_similarity: float = 0.0  # cosine at shift 0, for the gain policy

    def __post_init__(self):
        self.bar_index = int(self.bar_index)
        self.best_shift = int(self.best_shift)
        self.similarity = float(self.similarity)
        self.baseline_similarity = float(self.baseline_similarity)
        self.selected = bool(self.selected)
        if self.best_shift == 0:
            self.selected = False

    @property
    def gain(self) -> float:
        return self.similarity - self.baseline_similarity

    def to_dict(self) -> dict:
        return {
            "bar": self.bar_index,
            "shift": self.best_shift,
            "similarity": self.similarity,
            "selected": self.selected,
        }


@dataclass
class TranspositionPolicy:
    """Which bars get shifted: top quartile of similarity gain, floor 0.1."""

    min_gain: float = 0.1
    gain_quantile: float = 0.75


def chord_of_generated(roll: PianoRoll, bars: BarStructure, i: int) -> np.ndarray:
    """Unit pitch-class histogram of the notes whose onset falls in bar ``i``."""
    lo, hi = bars.bar_bounds(i, roll.num_steps)
    hist = np.zeros(NUM_PITCH_CLASSES)
    for n in roll.to_notes():
        if lo <= n.onset < hi:
            hist[n.pitch_class] += 1.0
    norm = np.linalg.norm(hist)
    return hist / norm if norm > 0 else hist


def _signed_shift(k: int) -> int:
    # shortest path around the pitch-class circle: 0..11 -> -6..+5
    return k - NUM_PITCH_CLASSES if k >= 6 else k


def delta_c(c_pre: np.ndarray, c_gen: np.ndarray, bar_index: int = 0,
            rotation_search: bool = True) -> TranspositionDecision:
    """Best transposition of the generated chroma toward the annotated one.

    Evaluates the cosine between ``c_pre`` and each of the 12 circular
    rotations of ``c_gen``; the argmax rotation (ties preferring no shift,
    then the smallest absolute shift) becomes the decision.  With
    ``rotation_search=False`` only the literal untransposed cosine is
    reported (shift 0).
    """
    c_pre = np.asarray(c_pre, dtype=np.float64)
    c_gen = np.asarray(c_gen, dtype=np.float64)
    if (c_pre < 0).any() or (c_gen < 0).any():
        raise ValueError("chroma vectors must be nonnegative")
    pre_norm, gen_norm = np.linalg.norm(c_pre), np.linalg.norm(c_gen)
    if pre_norm == 0 or gen_norm == 0:
        return TranspositionDecision(bar_index, 0, 0.0, False, 0.0)

    def cosine(k: int) -> float:
        return float(c_pre @ np.roll(c_gen, k)) / (pre_norm * gen_norm)

    baseline = cosine(0)
    if not rotation_search:
        return TranspositionDecision(bar_index, 0, baseline, False, baseline)

    best_shift, best = 0, baseline
    for k in range(NUM_PITCH_CLASSES):
        shift = _signed_shift(k)
        score = cosine(k)
        if score > best + 1e-12:
            best_shift, best = shift, score
        elif abs(score - best) <= 1e-12 and (abs(shift), shift) < (abs(best_shift), best_shift):
            best_shift = shift
    return TranspositionDecision(bar_index, best_shift, best, False, baseline)


def decide_transpositions(roll: PianoRoll, bars: BarStructure,
                          annotated: list[np.ndarray],
                          policy: TranspositionPolicy | None = None,
                          ) -> list[TranspositionDecision]:
    """Per-bar delta_c decisions with the selection policy applied."""
    if len(annotated) != bars.num_bars:
        raise ValueError(f"need one annotated chroma per bar "
                         f"({bars.num_bars}), got {len(annotated)}")
    decisions = [
        delta_c(annotated[i], chord_of_generated(roll, bars, i), bar_index=i)
        for i in range(bars.num_bars)
    ]
    return select_bars(decisions, policy or TranspositionPolicy())


def select_bars(decisions: list[TranspositionDecision],
                policy: TranspositionPolicy) -> list[TranspositionDecision]:
    gains = [d.gain for d in decisions if d.best_shift != 0]
    threshold = policy.min_gain
    if gains:
        threshold = max(threshold, float(np.quantile(gains, policy.gain_quantile)))
    for d in decisions:
        d.selected = bool(d.best_shift != 0 and d.gain >= threshold)
    return decisions


def apply_constraint(roll: PianoRoll, decisions: list[TranspositionDecision],
                     policy: TranspositionPolicy | None = None) -> PianoRoll:
    """Pitch-shift the notes of the selected bars; other bars pass through.

    A note belongs to the bar of its onset and shifts whole, so only
    pitches change: note count, onsets, durations, and velocities are all
    preserved.  Shifted pitches clamp at the MIDI range [0, 127].
    """
    if policy is not None:
        decisions = select_bars(decisions, policy)
    by_bar = {d.bar_index: d for d in decisions}
    spb = roll.steps_per_bar
    num_bars = roll.num_steps // spb
    missing = [i for i in range(num_bars) if i not in by_bar]
    if missing:
        raise ValueError(f"decisions must cover all bars; missing {missing}")

    shifted = []
    for n in roll.to_notes():
        d = by_bar[n.onset // spb]
        if d.selected and d.best_shift:
            pitch = int(np.clip(n.pitch + d.best_shift, 0, 127))
            n = NoteEvent(pitch, n.onset, n.duration, n.velocity)
        shifted.append(n)
    out = PianoRoll.from_notes(shifted, roll.num_steps, role=roll.role,
                               steps_per_bar=spb)
    return out


def decisions_to_json(decisions: list[TranspositionDecision]) -> str:
    return json.dumps([d.to_dict() for d in decisions], indent=2)
