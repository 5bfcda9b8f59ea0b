"""Quantitative evaluation: emotion-flow correlation, FS/FSPC metrics, reports.

The emotion-flow comparison measures the generated accompaniment back through
the same quantizers the pipeline uses on input, resamples onto the input
curve's grid, and reports Pearson r per emotion kind, stratified by
High/Low Input Basis (input curve mean above/below 0.5).  FS counts
cell-wise F1 over the binarized 128 x T grids; FSPC folds the 128 pitches
to 12 pitch classes first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emotion import EmotionCurve
from .score_io import NUM_PITCH_CLASSES, DimensionError, PianoRoll

HIB_THRESHOLD = 0.5


class UndefinedCorrelationError(ValueError):
    """Pearson r is undefined: one of the series has zero variance."""


@dataclass
class MuteScores:
    fs: float
    fspc: float
    precision: float
    recall: float
    pc_precision: float
    pc_recall: float
    vacuous: bool = False  # both grids empty: F1 defined as 1.0, flagged


@dataclass
class CorrelationReport:
    valence_r: float
    arousal_r: float
    valence_basis: str  # HIB | LIB
    arousal_basis: str


@dataclass
class EvalRow:
    """Per-song evaluation record feeding the aggregate report."""

    song: str
    correlation: CorrelationReport | None = None
    error: str | None = None
    input_valence: EmotionCurve | None = None
    input_arousal: EmotionCurve | None = None
    measured_valence: EmotionCurve | None = None
    measured_arousal: EmotionCurve | None = None
    mute: MuteScores | None = None


def pearson(x, y) -> float:
    """Standard Pearson correlation; rejects series without variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"series must be equal-length 1-D, got {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise DimensionError("need at least 2 points for a correlation")
    dx, dy = x - x.mean(), y - y.mean()
    vx, vy = float(dx @ dx), float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(dx @ dy) / np.sqrt(vx * vy)


def basis_label(curve: EmotionCurve) -> str:
    """High/Low Input Basis: whether the input curve's level sits above 0.5."""
    return "HIB" if curve.values.mean() > HIB_THRESHOLD else "LIB"


def flow_correlation(input_valence: EmotionCurve, input_arousal: EmotionCurve,
                     measured_valence: EmotionCurve, measured_arousal: EmotionCurve,
                     ) -> CorrelationReport:
    """Pearson r between requested and measured flows, on the input grids."""
    v_r = pearson(input_valence.values,
                  measured_valence.values_at(input_valence.steps))
    a_r = pearson(input_arousal.values,
                  measured_arousal.values_at(input_arousal.steps))
    return CorrelationReport(v_r, a_r, basis_label(input_valence),
                             basis_label(input_arousal))


def _binary_f1(pred: np.ndarray, ref: np.ndarray) -> tuple[float, float, float, bool]:
    tp = float(np.logical_and(pred, ref).sum())
    fp = float(np.logical_and(pred, ~ref).sum())
    fn = float(np.logical_and(~pred, ref).sum())
    if tp + fp + fn == 0.0:
        return 1.0, 1.0, 1.0, True  # vacuous perfect match
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return f1, precision, recall, False


def _check_same_length(pred: PianoRoll, ref: PianoRoll):
    if pred.num_steps != ref.num_steps:
        raise DimensionError(
            f"rolls must share T ({pred.num_steps} vs {ref.num_steps})")


def mute_fs(pred: PianoRoll, ref: PianoRoll) -> float:
    """Cell-wise F1 over the binarized 128 x T grids (texture accuracy)."""
    _check_same_length(pred, ref)
    f1, _, _, _ = _binary_f1(pred.binarized(), ref.binarized())
    return f1


def mute_fspc(pred: PianoRoll, ref: PianoRoll) -> float:
    """F1 after folding pitches to 12 pitch classes (harmony accuracy)."""
    _check_same_length(pred, ref)
    f1, _, _, _ = _binary_f1(_fold_pitch_classes(pred), _fold_pitch_classes(ref))
    return f1


def mute_scores(pred: PianoRoll, ref: PianoRoll) -> MuteScores:
    _check_same_length(pred, ref)
    fs, p, r, vac1 = _binary_f1(pred.binarized(), ref.binarized())
    fspc, pcp, pcr, vac2 = _binary_f1(_fold_pitch_classes(pred), _fold_pitch_classes(ref))
    return MuteScores(fs, fspc, p, r, pcp, pcr, vacuous=vac1 and vac2)


def _fold_pitch_classes(roll: PianoRoll) -> np.ndarray:
    active = roll.binarized()
    folded = np.zeros((NUM_PITCH_CLASSES, roll.num_steps), dtype=bool)
    for pc in range(NUM_PITCH_CLASSES):
        folded[pc] = active[pc::NUM_PITCH_CLASSES].any(axis=0)
    return folded


def quartiles(values) -> tuple[float, float, float]:
    """(Q1, median, Q3) with linear interpolation."""
    v = np.asarray(values, dtype=np.float64)
    return (float(np.quantile(v, 0.25)), float(np.quantile(v, 0.5)),
            float(np.quantile(v, 0.75)))


# ---------------------------------------------------------------------------
# Aggregate report: tables + figures
# ---------------------------------------------------------------------------

@dataclass
class AggregateReport:
    table: list[dict]
    csv_path: Path | None = None
    figure_paths: list[Path] = field(default_factory=list)


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def correlation_table(rows: list[EvalRow], model_name: str = "emoflow") -> list[dict]:
    """HIB/LIB mean-correlation table: one row per emotion kind."""
    table = []
    for kind, attr, basis_attr in (("Valence", "valence_r", "valence_basis"),
                                   ("Arousal", "arousal_r", "arousal_basis")):
        ok = [r.correlation for r in rows if r.correlation is not None]
        hib = [getattr(c, attr) for c in ok if getattr(c, basis_attr) == "HIB"]
        lib = [getattr(c, attr) for c in ok if getattr(c, basis_attr) == "LIB"]
        both = [getattr(c, attr) for c in ok]
        table.append({
            "Emotion Type": kind,
            "Model": model_name,
            "HIB": _mean_or_none(hib),
            "LIB": _mean_or_none(lib),
            "Mean": _mean_or_none(both),
        })
    return table


def _curve_matrix(curves: list[EmotionCurve], grid_points: int = 64) -> np.ndarray:
    rows = []
    for c in curves:
        grid = np.linspace(c.samples[0][0], c.samples[-1][0], grid_points)
        rows.append(c.values_at(grid))
    return np.array(rows)


def aggregate_report(rows: list[EvalRow], out_dir, model_name: str = "emoflow",
                     attention: np.ndarray | None = None,
                     before_roll: PianoRoll | None = None,
                     after_roll: PianoRoll | None = None) -> AggregateReport:
    """Emit the correlation table (CSV) and the comparison figures (PNG).

    Figures: input-vs-output flow heat map + box plot; optionally the
    attention heat map and the before/after transposition roll comparison
    when those artifacts are supplied.
    """
    if not rows:
        raise ValueError("need at least one evaluated song")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = correlation_table(rows, model_name)

    csv_path = out_dir / "correlation_table.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["Emotion Type", "Model", "HIB", "LIB", "Mean"])
        writer.writeheader()
        writer.writerows(table)

    per_song_path = out_dir / "per_song.csv"
    with open(per_song_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["song", "valence_r", "arousal_r", "valence_basis",
                         "arousal_basis", "fs", "fspc", "error"])
        for r in rows:
            c, m = r.correlation, r.mute
            writer.writerow([
                r.song,
                c.valence_r if c else "", c.arousal_r if c else "",
                c.valence_basis if c else "", c.arousal_basis if c else "",
                m.fs if m else "", m.fspc if m else "",
                r.error or "",
            ])

    figures = []
    flow_rows = [r for r in rows if r.input_valence and r.measured_valence
                 and r.input_arousal and r.measured_arousal]
    if flow_rows:
        fig, axes = plt.subplots(2, 3, figsize=(13, 6))
        for row_idx, (kind, inp, meas) in enumerate((
                ("valence", [r.input_valence for r in flow_rows],
                 [r.measured_valence for r in flow_rows]),
                ("arousal", [r.input_arousal for r in flow_rows],
                 [r.measured_arousal for r in flow_rows]))):
            in_mat, out_mat = _curve_matrix(inp), _curve_matrix(meas)
            for col, (mat, title) in enumerate(((in_mat, f"input {kind}"),
                                                (out_mat, f"output {kind}"))):
                ax = axes[row_idx][col]
                im = ax.imshow(mat, aspect="auto", vmin=0, vmax=1, cmap="magma")
                ax.set_title(title)
                ax.set_xlabel("time")
                ax.set_ylabel("song")
                fig.colorbar(im, ax=ax, fraction=0.046)
            ax = axes[row_idx][2]
            ax.boxplot([in_mat.ravel(), out_mat.ravel()], tick_labels=["input", "output"])
            ax.set_ylim(0, 1)
            ax.set_title(f"{kind} distribution")
        fig.tight_layout()
        path = out_dir / "flow_comparison.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        figures.append(path)

    if attention is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(np.asarray(attention), aspect="auto", cmap="viridis")
        ax.set_title("relative self-attention")
        ax.set_xlabel("key step")
        ax.set_ylabel("query step")
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        path = out_dir / "attention_map.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        figures.append(path)

    if before_roll is not None and after_roll is not None:
        fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
        for ax, (roll, title) in zip(axes, ((before_roll, "before transposition"),
                                            (after_roll, "after transposition"))):
            ax.imshow(roll.binarized(), aspect="auto", origin="lower", cmap="Blues",
                      interpolation="nearest")
            ax.set_title(title)
            ax.set_xlabel("step")
            ax.set_ylabel("pitch")
        fig.tight_layout()
        path = out_dir / "transposition_comparison.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        figures.append(path)

    return AggregateReport(table, csv_path, figures)
