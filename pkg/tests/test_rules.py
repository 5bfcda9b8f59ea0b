import json

import numpy as np
import pytest

from conftest import random_roll
from emoflow import rules
from emoflow.rules import (
    TranspositionDecision,
    TranspositionPolicy,
    apply_constraint,
    chord_of_generated,
    decisions_to_json,
    delta_c,
    select_bars,
)
from emoflow.score_io import BarStructure, NoteEvent, PianoRoll


def chroma(pcs) -> np.ndarray:
    v = np.zeros(12)
    v[list(pcs)] = 1.0
    return v


def in_bar_roll(rng: np.random.Generator, bars: int = 2,
                notes_per_bar: int = 5) -> PianoRoll:
    """Fuzzed roll whose notes stay inside their bar and can never fuse.

    Distinct velocities and one onset per (bar, pitch) keep the note set
    unambiguous under rasterization, so count preservation is testable.
    """
    events = []
    velocities = iter(rng.permutation(np.arange(1, 128)))
    for bar in range(bars):
        pitches = rng.choice(np.arange(20, 108), size=notes_per_bar, replace=False)
        for pitch in pitches:
            onset = bar * 16 + int(rng.integers(0, 12))
            duration = int(rng.integers(1, 16 - (onset % 16) + 1))
            events.append(NoteEvent(int(pitch), onset, duration, int(next(velocities))))
    return PianoRoll.from_notes(events, bars * 16)


C_MAJOR = chroma([0, 4, 7])
D_MAJOR = chroma([2, 6, 9])


class TestChordOfGenerated:
    def test_silent_bar_zero_vector(self):
        roll = PianoRoll(np.zeros((128, 32), dtype=np.int16))
        bars = BarStructure([0, 16])
        assert not chord_of_generated(roll, bars, 0).any()

    def test_triad_bar_unit_vector(self):
        notes = [NoteEvent(60, 0, 2, 80), NoteEvent(64, 2, 2, 80), NoteEvent(67, 4, 2, 80)]
        roll = PianoRoll.from_notes(notes, 32)
        hist = chord_of_generated(roll, BarStructure([0, 16]), 0)
        assert np.linalg.norm(hist) == pytest.approx(1.0)
        assert list(np.flatnonzero(hist)) == [0, 4, 7]

    def test_octave_doubling_folds(self):
        notes = [NoteEvent(48, 0, 2, 80), NoteEvent(60, 0, 2, 80), NoteEvent(72, 0, 2, 80)]
        hist = chord_of_generated(PianoRoll.from_notes(notes, 16), BarStructure([0]), 0)
        assert list(np.flatnonzero(hist)) == [0]
        assert hist[0] == pytest.approx(1.0)

    def test_bar_out_of_range(self):
        roll = PianoRoll(np.zeros((128, 16), dtype=np.int16))
        with pytest.raises(IndexError):
            chord_of_generated(roll, BarStructure([0]), 3)


class TestDeltaC:
    def test_identical_chromas(self):
        d = delta_c(C_MAJOR, C_MAJOR)
        assert d.best_shift == 0 and d.similarity == pytest.approx(1.0)
        assert not d.selected

    def test_d_major_against_c_major(self):
        d = delta_c(C_MAJOR, D_MAJOR)
        assert d.best_shift == -2
        assert d.similarity == pytest.approx(1.0)

    def test_zero_vectors(self):
        d = delta_c(np.zeros(12), np.zeros(12))
        assert d.best_shift == 0 and d.similarity == 0.0 and not d.selected

    def test_negative_chroma_rejected(self):
        with pytest.raises(ValueError):
            delta_c(-C_MAJOR, D_MAJOR)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a, b = rng.random(12), rng.random(12)
            base = delta_c(a, b)
            k = int(rng.integers(0, 12))
            rotated = delta_c(np.roll(a, k), np.roll(b, k))
            assert rotated.best_shift == base.best_shift
            assert rotated.similarity == pytest.approx(base.similarity, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a, b = rng.random(12), rng.random(12)
            base = delta_c(a, b)
            scaled = delta_c(a * float(rng.uniform(0.1, 50)),
                             b * float(rng.uniform(0.1, 50)))
            assert scaled.best_shift == base.best_shift
            assert scaled.similarity == pytest.approx(base.similarity, abs=1e-9)

    def test_matches_brute_force_argmax(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b = rng.random(12), rng.random(12)
            d = delta_c(a, b)
            best = max(
                float(a @ np.roll(b, k)) / (np.linalg.norm(a) * np.linalg.norm(b))
                for k in range(12))
            assert d.similarity == pytest.approx(best, abs=1e-12)

    def test_shift_range(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            d = delta_c(rng.random(12), rng.random(12))
            assert -6 <= d.best_shift <= 5

    def test_literal_reading_flag(self):
        d = delta_c(C_MAJOR, D_MAJOR, rotation_search=False)
        assert d.best_shift == 0
        assert d.similarity == pytest.approx(float(C_MAJOR @ D_MAJOR) / 3.0)

    def test_zero_shift_never_selected(self):
        d = TranspositionDecision(0, 0, 1.0, selected=True)
        assert not d.selected


class TestApplyConstraint:
    def _decisions(self, roll, shifts, selected=None):
        n = roll.num_steps // roll.steps_per_bar
        out = []
        for i in range(n):
            shift = shifts.get(i, 0) if isinstance(shifts, dict) else shifts[i]
            d = TranspositionDecision(i, shift, 1.0, baseline_similarity=0.0)
            d.selected = shift != 0 if selected is None else selected[i]
            out.append(d)
        return out

    def test_all_zero_shifts_identity(self):
        rng = np.random.default_rng(4)
        roll = random_roll(rng, steps=64)
        out = apply_constraint(roll, self._decisions(roll, {}))
        assert np.array_equal(out.grid, roll.grid)

    def test_single_bar_shift(self):
        roll = PianoRoll.from_notes(
            [NoteEvent(60, 0, 4, 90), NoteEvent(62, 16, 4, 70)], 32)
        out = apply_constraint(roll, self._decisions(roll, {0: 2}))
        assert out.grid[62, 0] == 90 and not out.grid[60, 0]
        assert out.grid[62, 16] == 70  # other bar untouched

    def test_preserves_everything_but_pitch(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            roll = in_bar_roll(rng, bars=4)
            shifts = {i: int(rng.integers(-6, 6)) for i in range(4)}
            out = apply_constraint(roll, self._decisions(roll, shifts))
            a, b = roll.to_notes(), out.to_notes()
            assert len(a) == len(b)
            assert sorted((n.onset, n.duration, n.velocity) for n in a) \
                == sorted((n.onset, n.duration, n.velocity) for n in b)

    def test_note_crossing_bar_shifts_whole(self):
        # a note belongs to its onset's bar; its tail moves with it
        roll = PianoRoll.from_notes([NoteEvent(60, 14, 4, 90)], 32)
        out = apply_constraint(roll, self._decisions(roll, {0: 2}))
        assert out.to_notes() == [NoteEvent(62, 14, 4, 90)]

    def test_consistency_oracle(self):
        # measuring delta_c on the shifted bar reproduces the decision similarity
        rng = np.random.default_rng(6)
        for _ in range(25):
            roll = random_roll(rng, steps=32, pitch_lo=20, pitch_hi=100, notes=10)
            bars = BarStructure([0, 16])
            c_pre = np.roll(chord_of_generated(roll, bars, 0), int(rng.integers(0, 12)))
            if not c_pre.any():
                continue
            d = rules.delta_c(c_pre, chord_of_generated(roll, bars, 0), bar_index=0)
            d.selected = d.best_shift != 0
            shifted = apply_constraint(roll, [d, TranspositionDecision(1, 0, 1.0)])
            after = rules.delta_c(c_pre, chord_of_generated(shifted, bars, 0))
            assert after.similarity == pytest.approx(d.similarity, abs=1e-9)

    def test_idempotent_under_re_decision(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            roll = random_roll(rng, steps=32, pitch_lo=20, pitch_hi=100, notes=12)
            bars = BarStructure([0, 16])
            annotated = [np.roll(chord_of_generated(roll, bars, i), 3) for i in range(2)]
            first = rules.decide_transpositions(roll, bars, annotated,
                                                TranspositionPolicy(min_gain=0.0,
                                                                    gain_quantile=0.0))
            once = apply_constraint(roll, first)
            second = rules.decide_transpositions(once, bars, annotated,
                                                 TranspositionPolicy(min_gain=0.0,
                                                                     gain_quantile=0.0))
            assert all(d.best_shift == 0 for d in second)
            twice = apply_constraint(once, second)
            assert np.array_equal(twice.grid, once.grid)

    def test_requires_full_coverage(self):
        roll = PianoRoll(np.zeros((128, 32), dtype=np.int16))
        with pytest.raises(ValueError, match="missing"):
            apply_constraint(roll, [TranspositionDecision(0, 0, 1.0)])


class TestPolicy:
    def test_top_quartile_with_floor(self):
        decisions = [TranspositionDecision(i, 1, 0.9, baseline_similarity=b)
                     for i, b in enumerate([0.88, 0.7, 0.5, 0.3])]
        select_bars(decisions, TranspositionPolicy(min_gain=0.1, gain_quantile=0.75))
        # gains: 0.02, 0.2, 0.4, 0.6 -> only the top quartile (0.6) selected
        assert [d.selected for d in decisions] == [False, False, False, True]

    def test_floor_blocks_small_gains(self):
        decisions = [TranspositionDecision(0, 2, 0.55, baseline_similarity=0.5)]
        select_bars(decisions, TranspositionPolicy(min_gain=0.1, gain_quantile=0.0))
        assert not decisions[0].selected

    def test_json_export_schema(self):
        decisions = [TranspositionDecision(0, -2, 0.75, baseline_similarity=0.3)]
        decisions[0].selected = True
        rows = json.loads(decisions_to_json(decisions))
        assert rows == [{"bar": 0, "shift": -2, "similarity": 0.75, "selected": True}]
