"""Dataset assembly and the VAE training loop.

Training examples are 2-bar segments: the merged accompaniment becomes the
arousal feature grid and the onset/duration targets, the annotated chords
become the valence input and the chroma reconstruction target, and the
melody contributes a per-beat conditioning chroma.  The loss is the ELBO:
Bernoulli/categorical reconstruction terms plus closed-form Gaussian KL to
standard-normal priors for both latents.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import emotion, score_io
from .score_io import PianoRoll, TrackSet
from .vamodel import ModelConfig, SegmentBatch, VAModel, VAModelOutput, save_checkpoint

log = logging.getLogger(__name__)

GRAD_CLIP_NORM = 5.0


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; names the offending component."""


@dataclass
class TrainingConfig:
    batch_size: int = 128
    epochs: int = 6
    lr: float = 1e-3
    lr_decay: float = 0.999
    lr_floor: float = 1e-5
    tf_ratio_pianotree: float = 0.6
    tf_ratio_valence: float = 0.5
    seed: int = 0
    kl_warmup_fraction: float = 0.0  # fraction of total steps; 0 disables warm-up
    max_steps: int | None = None     # optional hard cap, for smoke tests

    def __post_init__(self):
        for name in ("tf_ratio_pianotree", "tf_ratio_valence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.lr_floor > self.lr:
            raise ValueError("lr_floor must not exceed lr")


@dataclass
class LossBreakdown:
    """ELBO components; kl_* are the contributions entering the total."""

    recon_valence: float
    recon_arousal: float
    kl_valence: float
    kl_arousal: float

    @property
    def total(self) -> float:
        return self.recon_valence + self.recon_arousal + self.kl_valence + self.kl_arousal


@dataclass
class SegmentExample:
    """One 2-bar training segment in model-ready numpy form."""

    song: str
    arousal_grid: np.ndarray       # (128, 32)
    valence_seq: np.ndarray        # (12, 8)
    conditioning: np.ndarray       # (12, 8)
    target_onsets: np.ndarray      # (32, 128)
    target_durations: np.ndarray   # (32, 128)
    target_chroma: np.ndarray      # (12, 8)
    target_roll: PianoRoll


@dataclass
class DatasetSplit:
    train: list[SegmentExample]
    validation: list[SegmentExample]
    train_songs: list[str] = field(default_factory=list)
    validation_songs: list[str] = field(default_factory=list)


def melody_beat_chroma(melody: PianoRoll, beats: int,
                       steps_per_beat: int = score_io.STEPS_PER_QUARTER) -> np.ndarray:
    """Per-beat pitch-class indicator of the melody, shape (12, beats)."""
    active = melody.binarized()
    out = np.zeros((score_io.NUM_PITCH_CLASSES, beats))
    for b in range(beats):
        window = active[:, b * steps_per_beat:(b + 1) * steps_per_beat]
        pitches = np.flatnonzero(window.any(axis=1))
        for p in pitches:
            out[p % score_io.NUM_PITCH_CLASSES, b] = 1.0
    return out


def example_from_segment(seg: TrackSet, song: str = "") -> SegmentExample:
    """Derive all model inputs and targets from one 2-bar TrackSet."""
    merged = score_io.merge_accompaniment(seg)
    tensor = emotion.arousal_map(merged)
    grid = emotion.arousal_features(tensor)

    beat_chords = score_io.downsample_chroma(seg.chords)
    normalized = score_io.normalize_root(beat_chords)
    valence_seq = emotion.valence_map(normalized).values

    steps = merged.num_steps
    onsets = np.zeros((steps, score_io.NUM_PITCHES))
    durations = np.zeros((steps, score_io.NUM_PITCHES), dtype=np.int64)
    for n in merged.to_notes():
        onsets[n.onset, n.pitch] = 1.0
        durations[n.onset, n.pitch] = min(n.duration, emotion.DURATION_BUCKETS) - 1

    return SegmentExample(
        song=song,
        arousal_grid=grid,
        valence_seq=valence_seq,
        conditioning=melody_beat_chroma(seg.melody, emotion.VALENCE_WINDOW),
        target_onsets=onsets,
        target_durations=durations,
        target_chroma=normalized.chroma,
        target_roll=merged,
    )


def collate(examples: list[SegmentExample]) -> SegmentBatch:
    def stack(attr, dtype=torch.float32):
        return torch.as_tensor(np.stack([getattr(e, attr) for e in examples]), dtype=dtype)

    return SegmentBatch(
        arousal_grid=stack("arousal_grid"),
        valence_seq=stack("valence_seq"),
        conditioning=stack("conditioning"),
        target_onsets=stack("target_onsets"),
        target_durations=stack("target_durations", torch.long),
        target_chroma=stack("target_chroma"),
    )


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def kl_standard_normal(mean: torch.Tensor, log_variance: torch.Tensor) -> torch.Tensor:
    """Closed-form KL(N(mean, var) || N(0, I)), summed over dims, per batch item."""
    return 0.5 * (mean.pow(2) + log_variance.exp() - 1.0 - log_variance).sum(dim=-1)


def elbo_loss(output: VAModelOutput, batch: SegmentBatch,
              kl_weight: float = 1.0) -> tuple[torch.Tensor, LossBreakdown]:
    """Negative ELBO: reconstruction NLL plus (weighted) Gaussian KL terms."""
    b = batch.batch_size
    probs = output.valence_probs.clamp(1e-7, 1 - 1e-7)
    recon_v = F.binary_cross_entropy(probs, batch.target_chroma, reduction="sum") / b

    pitch_nll = F.binary_cross_entropy_with_logits(
        output.piano.pitch_logits, batch.target_onsets, reduction="sum") / b
    active = batch.target_onsets > 0
    if active.any():
        dur_nll = F.cross_entropy(output.piano.duration_logits[active],
                                  batch.target_durations[active], reduction="sum") / b
    else:
        dur_nll = pitch_nll.new_zeros(())
    recon_a = pitch_nll + dur_nll

    kl_v = kl_standard_normal(output.valence_latent.mean,
                              output.valence_latent.log_variance).mean() * kl_weight
    kl_a = kl_standard_normal(output.arousal_latent.mean,
                              output.arousal_latent.log_variance).mean() * kl_weight

    total = recon_v + recon_a + kl_v + kl_a
    parts = {"recon_valence": recon_v, "recon_arousal": recon_a,
             "kl_valence": kl_v, "kl_arousal": kl_a}
    for name, value in parts.items():
        if not torch.isfinite(value):
            raise DivergenceError(f"non-finite loss component: {name}")
    return total, LossBreakdown(**{k: float(v.detach()) for k, v in parts.items()})


def lr_schedule(step: int, cfg: TrainingConfig) -> float:
    """Exponential decay per optimization step with a hard floor."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return max(cfg.lr * cfg.lr_decay ** step, cfg.lr_floor)


def teacher_forcing_gate(ratio: float, rng: np.random.Generator) -> bool:
    """True with probability ``ratio``; reproducible under a seeded generator."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"teacher-forcing ratio must lie in [0, 1], got {ratio}")
    return bool(rng.random() < ratio)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class HistoryRow:
    step: int
    epoch: int
    loss: LossBreakdown
    lr: float


@dataclass
class TrainResult:
    model: VAModel
    history: list[HistoryRow]
    checkpoints: list[Path]
    aborted: bool = False


def write_history_csv(history: list[HistoryRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "recon_valence", "recon_arousal",
                         "kl_valence", "kl_arousal", "total", "lr"])
        for row in history:
            lb = row.loss
            writer.writerow([row.step, row.epoch, lb.recon_valence, lb.recon_arousal,
                             lb.kl_valence, lb.kl_arousal, lb.total, row.lr])
    return path


def train(dataset: DatasetSplit, cfg: TrainingConfig,
          model: VAModel | None = None, model_config: ModelConfig | None = None,
          out_dir=None) -> TrainResult:
    """Run the training loop; fully reproducible for a fixed config seed.

    Checkpoints are written per epoch when ``out_dir`` is given.  A
    non-finite loss aborts the run, keeping the last epoch's checkpoint as
    the usable artifact.
    """
    if not dataset.train:
        raise ValueError("training split is empty")
    torch.manual_seed(cfg.seed)
    if model is None:
        model = VAModel(model_config)
    rng = np.random.default_rng(cfg.seed)
    sampler = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    steps_per_epoch = max(1, (len(dataset.train) + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    warmup_steps = int(cfg.kl_warmup_fraction * total_steps)

    out_path = Path(out_dir) if out_dir is not None else None
    history: list[HistoryRow] = []
    checkpoints: list[Path] = []
    step = 0
    aborted = False

    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset.train))
        for start in range(0, len(order), cfg.batch_size):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            batch = collate([dataset.train[i] for i in order[start:start + cfg.batch_size]])
            lr = lr_schedule(step, cfg)
            for group in optimizer.param_groups:
                group["lr"] = lr
            kl_weight = 1.0 if warmup_steps == 0 else min(1.0, (step + 1) / warmup_steps)

            optimizer.zero_grad()
            try:
                output = model(batch, tf_pianotree=cfg.tf_ratio_pianotree,
                               tf_valence=cfg.tf_ratio_valence, rng=rng,
                               temperature=1.0, generator=sampler)
                total, breakdown = elbo_loss(output, batch, kl_weight)
            except DivergenceError as exc:
                log.error("aborting at step %d: %s", step, exc)
                aborted = True
                break
            total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), GRAD_CLIP_NORM)
            optimizer.step()
            history.append(HistoryRow(step, epoch, breakdown, lr))
            step += 1
        if aborted:
            break
        if out_path is not None:
            ckpt = save_checkpoint(model, out_path / f"checkpoint_epoch{epoch + 1}.zip",
                                   version=f"epoch{epoch + 1}",
                                   metadata={"epoch": epoch + 1, "step": step})
            checkpoints.append(ckpt)
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break

    model.eval()
    if out_path is not None:
        write_history_csv(history, out_path / "loss_history.csv")
    return TrainResult(model, history, checkpoints, aborted)


# ---------------------------------------------------------------------------
# Corpus scanning and splits
# ---------------------------------------------------------------------------

def load_song(midi_path: Path, chord_path: Path | None = None) -> TrackSet:
    ts = score_io.parse_midi(midi_path.read_bytes())
    if chord_path is not None and chord_path.exists():
        chords = score_io.parse_chord_annotations(
            chord_path.read_text(), tempo_bpm=ts.tempo_bpm, total_steps=ts.num_steps)
        ts = score_io.with_chords(ts, chords)
    return ts


def _find_chord_file(midi_path: Path) -> Path | None:
    candidates = [midi_path.with_suffix(".txt"),
                  midi_path.parent / "chord_midi.txt",
                  midi_path.parent / "chords.txt"]
    return next((c for c in candidates if c.exists()), None)


def scan_corpus(corpus_dir) -> list[tuple[str, Path, Path | None]]:
    """Find (song_id, midi, chord file) triples under a POP909-style directory."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory {root} does not exist")
    songs = []
    for midi in sorted(root.rglob("*.mid")) + sorted(root.rglob("*.midi")):
        songs.append((midi.stem, midi, _find_chord_file(midi)))
    if not songs:
        raise ValueError(f"no MIDI files found under {root}")
    return songs


def prepare_splits(corpus_dir, seed: int = 0, train_fraction: float = 0.8,
                   ) -> DatasetSplit:
    """Song-level 8:2 split of a corpus directory, deterministic under seed."""
    songs = scan_corpus(corpus_dir)
    by_song: dict[str, list[SegmentExample]] = {}
    for song_id, midi, chord in songs:
        try:
            ts = load_song(midi, chord)
        except score_io.ScoreError as exc:
            log.warning("skipping %s: %s", song_id, exc)
            continue
        segments = [example_from_segment(seg, song_id) for seg in score_io.segment(ts)]
        if segments:
            by_song[song_id] = segments
    if not by_song:
        raise ValueError("corpus produced no usable 2-bar segments")

    ids = sorted(by_song)
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    n_train = int(len(ids) * train_fraction)
    train_ids, val_ids = sorted(ids[:n_train]), sorted(ids[n_train:])
    split = DatasetSplit(
        train=[ex for sid in train_ids for ex in by_song[sid]],
        validation=[ex for sid in val_ids for ex in by_song[sid]],
        train_songs=train_ids,
        validation_songs=val_ids,
    )
    log.info("split: %d train songs (%d segments), %d validation songs (%d segments)",
             len(train_ids), len(split.train), len(val_ids), len(split.validation))
    return split
