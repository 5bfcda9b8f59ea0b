"""Regenerate the frontend test fixtures from the backend implementation.

Run from the frontend directory (or anywhere): needs the emoflow package
importable.  Emits:
  tests/fixtures/curves.json   50 curves + the server-side gate verdicts
  tests/fixtures/melody.json   a 4-segment demo song: MIDI (base64), chords,
                               note set, and stub-checkpoint metadata
"""

import base64
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

import torch  # noqa: E402

from emoflow import emotion, score_io  # noqa: E402
from synthdata import chord_annotation_text, concat_track_sets, four_contrast_segments  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def random_curves(count: int = 50, seed: int = 2025) -> list[dict]:
    rng = np.random.default_rng(seed)
    fixtures = []
    for i in range(count):
        horizon = int(rng.integers(32, 257))
        kind = "valence" if i % 2 == 0 else "arousal"
        style = i % 5
        if style == 0:      # flat-ish: rejected for flatness
            steps = np.sort(rng.choice(np.arange(horizon),
                                       size=int(rng.integers(2, 9)), replace=False))
            values = np.full(len(steps), float(rng.uniform(0.2, 0.8)))
            values += rng.normal(0, 0.02, len(steps))
        elif style == 1:    # dense big sinusoid: usually valid
            steps = np.arange(0, horizon, 4)
            values = 0.5 + float(rng.uniform(0.58, 0.75)) * np.sin(
                2 * np.pi * steps / horizon + rng.uniform(0, 6.28))
        elif style == 2:    # square zigzag: valid iff few enough extrema
            n = int(rng.integers(4, 16))
            steps = np.linspace(0, horizon - 1, n).astype(int)
            values = np.where(np.arange(n) % 2 == 0, 0.03, 0.97)
        elif style == 3:    # ramp: variance of a line never clears the gate
            steps = np.sort(rng.choice(np.arange(horizon),
                                       size=int(rng.integers(2, 9)), replace=False))
            values = np.linspace(rng.uniform(0, 0.3), rng.uniform(0.7, 1.0), len(steps))
        else:               # random walk: either way
            steps = np.sort(rng.choice(np.arange(horizon),
                                       size=int(rng.integers(4, 17)), replace=False))
            values = np.clip(0.5 + np.cumsum(rng.normal(0, 0.35, len(steps))), 0, 1)
        values = np.clip(values, 0.0, 1.0)
        steps = np.unique(steps)
        values = values[:len(steps)]
        curve = emotion.EmotionCurve(kind, list(zip(map(int, steps),
                                                    map(float, values))), horizon)
        report = emotion.validate_curve(curve)
        fixtures.append({
            "curve": json.loads(curve.to_json()),
            "verdict": {
                "variance": report.variance,
                "extreme_point_count": report.extreme_point_count,
                "valid": report.valid,
                "reasons": report.reasons,
            },
        })
    return fixtures


def melody_fixture() -> dict:
    song = concat_track_sets(four_contrast_segments())
    midi = score_io.write_track_set(song)
    melody_notes = [
        {"pitch": n.pitch, "onset": n.onset, "duration": n.duration,
         "velocity": n.velocity}
        for n in song.melody.to_notes()
    ]
    return {
        "melody_midi": base64.b64encode(midi).decode("ascii"),
        "chords": chord_annotation_text(song),
        "total_steps": song.num_steps,
        "tempo_bpm": song.tempo_bpm,
        "melody_notes": melody_notes,
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "curves.json").write_text(json.dumps(random_curves(), indent=1))
    (OUT / "melody.json").write_text(json.dumps(melody_fixture(), indent=1))
    torch.manual_seed(0)
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
