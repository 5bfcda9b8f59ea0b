"""Valence/arousal feature extraction and emotion-curve handling.

Two directions live here.  Music -> emotion: the valence mapping over
root-normalized chroma, the arousal mapping into the pitch/time/duration/
density occupancy tensor, and the quantizers that collapse both into scalar
curves.  Curve plumbing: validation (variance + extreme-point gate),
resampling, and the JSON wire format shared with the CLI, service, and UI.

Chord-quality valence weights
-----------------------------
The per-quality weight table drives the valence mapping.  Values are scalars
in [0, 1], ordered maj > sus > min > dim; the diminished weight is kept
strictly positive so a diminished chord stays distinguishable from a
no-chord (all-zero) column:

    maj   1.00    maj7  0.95    sus4  0.80    sus2  0.75    7     0.65
    min7  0.50    min   0.40    aug   0.20    dim   0.05

Quantized valence rescales by the table's min/max, so editing the table
keeps curves spanning [0, 1].  No-chord columns read as neutral 0.5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .score_io import (
    CHORD_TEMPLATES,
    NUM_PITCH_CLASSES,
    NUM_PITCHES,
    ChromaSequence,
    DimensionError,
    PianoRoll,
)

VALENCE_WINDOW = 8    # beats per 2-bar segment
AROUSAL_WINDOW = 32   # 16th steps per 2-bar segment
DURATION_BUCKETS = 16
DENSITY_BUCKETS = 8
AROUSAL_MASS_RATE = 5.0  # the 1/(5*T) quantization constant

NO_CHORD_VALENCE = 0.5
MIN_CURVE_VARIANCE = 0.15
MAX_EXTREME_POINTS = 5

CHORD_QUALITY_WEIGHTS = {
    "maj": 1.00,
    "maj7": 0.95,
    "sus4": 0.80,
    "sus2": 0.75,
    "7": 0.65,
    "min7": 0.50,
    "min": 0.40,
    "aug": 0.20,
    "dim": 0.05,
}

_QUALITY_TEMPLATES = {
    q: np.array([1.0 if pc in intervals else 0.0 for pc in range(NUM_PITCH_CLASSES)])
    for q, intervals in CHORD_TEMPLATES.items()
}


class ContractViolation(ValueError):
    """An input violates a stated precondition (e.g. chroma not root-normalized)."""


@dataclass
class EmotionCurve:
    """Time-indexed scalar emotion series: (step, value) samples over a horizon."""

    kind: str
    samples: list[tuple[int, float]]
    horizon: int

    def __post_init__(self):
        if self.kind not in ("valence", "arousal"):
            raise ValueError(f"curve kind must be valence|arousal, got {self.kind!r}")
        if len(self.samples) < 2:
            raise ValueError("an emotion curve needs at least 2 samples")
        self.samples = [(int(s), float(v)) for s, v in self.samples]
        steps = [s for s, _ in self.samples]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("sample steps must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for _, v in self.samples):
            raise ValueError("sample values must lie in [0, 1]")
        if self.horizon <= steps[-1]:
            self.horizon = steps[-1] + 1

    @property
    def steps(self) -> np.ndarray:
        return np.array([s for s, _ in self.samples], dtype=np.float64)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples], dtype=np.float64)

    def values_at(self, steps) -> np.ndarray:
        """Piecewise-linear interpolation; flat extension beyond the sample range."""
        return np.interp(np.asarray(steps, dtype=np.float64), self.steps, self.values)

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "horizon": self.horizon,
            "samples": [[s, v] for s, v in self.samples],
        })

    @classmethod
    def from_json(cls, text: str | bytes) -> "EmotionCurve":
        obj = json.loads(text)
        return cls(kind=obj["kind"], samples=[tuple(p) for p in obj["samples"]],
                   horizon=int(obj["horizon"]))


@dataclass
class ArousalTensor:
    """128 x T x 16 x 8 occupancy tensor: pitch, time, duration bucket, density bucket."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        wanted = (NUM_PITCHES, self.data.shape[1], DURATION_BUCKETS, DENSITY_BUCKETS)
        if self.data.ndim != 4 or self.data.shape != wanted:
            raise DimensionError(
                f"arousal tensor must be 128 x T x 16 x 8, got {self.data.shape}")
        if (self.data < 0).any():
            raise ValueError("arousal tensor must be nonnegative")

    @property
    def num_steps(self) -> int:
        return self.data.shape[1]


@dataclass
class ValenceSequence:
    """12 x T chroma-weighted valence features (one column per beat)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != NUM_PITCH_CLASSES:
            raise DimensionError(f"valence sequence must be 12 x T, got {self.values.shape}")

    @property
    def num_steps(self) -> int:
        return self.values.shape[1]


@dataclass
class CurveValidityReport:
    variance: float
    extreme_point_count: int
    valid: bool
    reasons: list[str] = field(default_factory=list)


def match_chord_quality(column: np.ndarray,
                        weights: dict[str, float] = CHORD_QUALITY_WEIGHTS) -> str:
    """Nearest quality template (cosine) for a root-normalized chroma column."""
    best, best_score = None, -np.inf
    norm = np.linalg.norm(column)
    for quality in weights:
        template = _QUALITY_TEMPLATES[quality]
        score = float(column @ template) / (norm * np.linalg.norm(template))
        if score > best_score + 1e-12:
            best, best_score = quality, score
    return best


def valence_map(c_bar: ChromaSequence,
                weights: dict[str, float] = CHORD_QUALITY_WEIGHTS) -> ValenceSequence:
    """Map root-normalized chroma columns to quality-weighted valence columns.

    Each chord column becomes its unit-peak chroma scaled by the weight of
    its matched quality, so the column maximum reads back as the scalar
    valence of the chord.  Input must already be root-normalized.
    """
    if c_bar.num_steps != VALENCE_WINDOW:
        raise DimensionError(
            f"valence window must be {VALENCE_WINDOW} beats, got {c_bar.num_steps}")
    mask = c_bar.has_chord()
    if (c_bar.root[mask] != 0).any():
        raise ContractViolation("chroma is not root-normalized (root != C on a chord column)")
    out = np.zeros_like(c_bar.chroma)
    for t in np.flatnonzero(mask):
        col = c_bar.chroma[:, t]
        quality = match_chord_quality(col, weights)
        out[:, t] = (col / col.max()) * weights[quality]
    return ValenceSequence(out)


def arousal_map(merged: PianoRoll) -> ArousalTensor:
    """Group the merged roll's notes into the pitch/time/duration/density tensor.

    Every note contributes one unit at (pitch, onset step, duration bucket,
    density bucket); durations clamp at 16 steps and simultaneous-onset
    counts clamp at 8 levels, as forced by the fixed tensor shape.
    """
    notes = merged.to_notes()
    data = np.zeros((NUM_PITCHES, merged.num_steps, DURATION_BUCKETS, DENSITY_BUCKETS))
    onset_counts: dict[int, int] = {}
    for n in notes:
        onset_counts[n.onset] = onset_counts.get(n.onset, 0) + 1
    for n in notes:
        d_bucket = min(n.duration, DURATION_BUCKETS) - 1
        density = min(onset_counts[n.onset], DENSITY_BUCKETS) - 1
        data[n.pitch, n.onset, d_bucket, density] += 1.0
    return ArousalTensor(data)


def arousal_features(a: ArousalTensor) -> np.ndarray:
    """Collapse duration/density axes into the 128 x T grid the encoder consumes."""
    return a.data.sum(axis=(2, 3))


def _anchored(samples: list[tuple[int, float]], horizon: int) -> list[tuple[int, float]]:
    # curves need >= 2 samples; anchor the right edge with the final value
    if len(samples) == 1 or samples[-1][0] < horizon - 1:
        samples = samples + [(horizon - 1, samples[-1][1])]
    return samples


def quantize_arousal(a: ArousalTensor, steps_per_bar: int = 16) -> EmotionCurve:
    """Collapse the arousal tensor to a per-bar curve: window mass / (5 * window width).

    Values clamp to [0, 1] so measured curves are comparable to user input.
    """
    total = a.num_steps
    window = min(steps_per_bar, total)
    starts = list(range(0, total, window))
    samples = []
    for lo in starts:
        hi = min(lo + window, total)
        mass = float(a.data[:, lo:hi].sum())
        value = mass / (AROUSAL_MASS_RATE * (hi - lo))
        samples.append((lo, float(np.clip(value, 0.0, 1.0))))
    return EmotionCurve("arousal", _anchored(samples, total), total)


def _column_score(column: np.ndarray, lo: float, hi: float) -> float:
    if not column.any():
        return NO_CHORD_VALENCE
    raw = float(column.max())
    if hi <= lo:
        return float(np.clip(raw, 0.0, 1.0))
    return float(np.clip((raw - lo) / (hi - lo), 0.0, 1.0))


def quantize_valence(v: ValenceSequence,
                     weights: dict[str, float] = CHORD_QUALITY_WEIGHTS) -> EmotionCurve:
    """Collapse valence columns to a curve: one sample per chord span.

    Per-column scores are the quality weights rescaled by the weight table's
    bounds; no-chord columns sit at the neutral 0.5.
    """
    lo, hi = min(weights.values()), max(weights.values())
    total = v.num_steps
    scores = [_column_score(v.values[:, t], lo, hi) for t in range(total)]
    samples = []
    for t in range(total):
        new_span = t == 0 or not np.array_equal(v.values[:, t], v.values[:, t - 1])
        if new_span:
            samples.append((t, scores[t]))
    return EmotionCurve("valence", _anchored(samples, total), total)


def validate_curve(c: EmotionCurve) -> CurveValidityReport:
    """Gate a curve on ebb-and-flow: time-averaged variance and extreme-point count.

    Variance is the exact piecewise-linear form of (1/T) * integral of
    (X - mean)^2 dt, which makes the verdict invariant to uniform scaling of
    the time axis.  Interior extrema are strict sign changes of the discrete
    derivative; flat runs merge and count once; endpoints are excluded.
    """
    variance = curve_variance(c)
    extrema = count_extreme_points(c)
    reasons = []
    if variance <= MIN_CURVE_VARIANCE:
        reasons.append("flatness")
    if extrema > MAX_EXTREME_POINTS:
        reasons.append("too many extreme points")
    return CurveValidityReport(variance, extrema, not reasons, reasons)


def curve_variance(c: EmotionCurve) -> float:
    t, x = c.steps, c.values
    dt = np.diff(t)
    span = float(dt.sum())
    if span == 0.0:
        return 0.0
    mean = float(((x[:-1] + x[1:]) / 2.0 * dt).sum() / span)
    a, b = x[:-1] - mean, x[1:] - mean
    # exact integral of a linear segment squared: dt/3 * (a^2 + ab + b^2)
    return float(((a * a + a * b + b * b) / 3.0 * dt).sum() / span)


def count_extreme_points(c: EmotionCurve) -> int:
    signs = np.sign(np.diff(c.values))
    signs = signs[signs != 0]  # plateau merging: flat runs collapse
    if len(signs) < 2:
        return 0
    return int((signs[1:] != signs[:-1]).sum())


def resample_curve(c: EmotionCurve, target_steps: int) -> EmotionCurve:
    """Linearly resample onto an even grid of ``target_steps`` points.

    Endpoint steps and values are preserved; coincident rounded steps
    deduplicate.
    """
    if target_steps < 2:
        raise ValueError("target_steps must be >= 2")
    first, last = c.samples[0][0], c.samples[-1][0]
    positions = np.linspace(first, last, target_steps)
    steps = np.round(positions).astype(int)
    samples = []
    for s in steps:
        if samples and samples[-1][0] == s:
            continue
        samples.append((int(s), float(c.values_at(s))))
    return EmotionCurve(c.kind, samples, c.horizon)
