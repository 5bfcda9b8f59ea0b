import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from emoflow.score_io import NUM_PITCHES, PianoRoll
from emoflow.vamodel import ModelConfig


def micro_model_config() -> ModelConfig:
    """Tiny but contract-complete dims for fast model tests."""
    return ModelConfig(
        conv_channels=2, arousal_rnn_input=64, arousal_rnn_hidden=24,
        valence_embed_dim=8, valence_rnn_hidden=24, latent_dim=16,
        valence_decoder_hidden=32, time_rnn_hidden=48, summary_dim=24,
        query_dim=32, attention_dim=12,
    )


@pytest.fixture
def micro_config() -> ModelConfig:
    return micro_model_config()


def stub_model(cfg: ModelConfig | None = None, seed: int = 0):
    """Untrained model for contract tests, nudged so decoding emits notes.

    The shipped pitch-head bias starts at the sparse-onset prior, which
    makes a fresh model decode silence; tests that exercise the generation
    surface need actual notes in the output.
    """
    from emoflow.vamodel import VAModel

    torch.manual_seed(seed)
    model = VAModel(cfg or micro_model_config())
    model.piano_decoder.pitch_head.bias.data.fill_(0.2)
    return model


def random_roll(rng: np.random.Generator, steps: int = 32, notes: int = 20,
                pitch_lo: int = 8, pitch_hi: int = 120, max_dur: int = 6,
                steps_per_bar: int = 16) -> PianoRoll:
    """A fuzzed piano roll; pitches stay clear of the MIDI edges by default."""
    grid = np.zeros((NUM_PITCHES, steps), dtype=np.int16)
    for _ in range(notes):
        p = int(rng.integers(pitch_lo, pitch_hi))
        t = int(rng.integers(0, steps))
        d = int(rng.integers(1, max_dur + 1))
        v = int(rng.integers(1, 128))
        grid[p, t:t + d] = v
    return PianoRoll(grid, steps_per_bar=steps_per_bar)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(1234)
