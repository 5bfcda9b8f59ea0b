"""Encoders and decoders of the valence/arousal variational autoencoder.

Two encoders map the arousal feature grid and the valence sequence into
256-dim Gaussian latents.  Two decoders reconstruct from samples: an
autoregressive chroma decoder emitting per-beat 12-dim Bernoulli
probabilities, and the hierarchical piano decoder that unrolls time frames,
summarizes them into 512-dim note summaries, runs relative self-attention
over the summaries, then emits per-step pitch Bernoullis and per-note
duration buckets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..score_io import NUM_PITCH_CLASSES, NUM_PITCHES, DimensionError, PianoRoll
from .attention import RelativeSelfAttention


@dataclass
class ModelConfig:
    """Network dimensions; defaults follow the reference architecture."""

    arousal_steps: int = 32
    valence_steps: int = 8
    latent_dim: int = 256
    # arousal encoder: conv (4,12) kernel over (pitch, time), (1,4) max pool
    conv_channels: int = 8
    conv_kernel: tuple[int, int] = (4, 12)
    conv_stride: tuple[int, int] = (4, 1)
    pool_kernel: tuple[int, int] = (1, 4)
    arousal_rnn_input: int = 256
    arousal_rnn_hidden: int = 1024
    # valence encoder
    valence_embed_dim: int = 32
    valence_rnn_hidden: int = 1024
    # valence decoder: input = latent + context
    valence_decoder_context: int = 36
    valence_decoder_hidden: int = 1024
    # piano decoder
    time_rnn_hidden: int = 1024
    summary_dim: int = 512
    query_dim: int = 1024
    attention_dim: int = 128
    duration_rnn_hidden: int = 16
    duration_buckets: int = 16
    max_attention_len: int = 64

    @property
    def valence_decoder_input(self) -> int:
        return self.latent_dim + self.valence_decoder_context

    def __post_init__(self):
        if self.valence_decoder_context < NUM_PITCH_CLASSES:
            raise ValueError("decoder context must hold at least the previous chroma token")


@dataclass
class GaussianLatent:
    """Diagonal-Gaussian posterior parameters plus reparameterized sampling."""

    mean: torch.Tensor
    log_variance: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.log_variance.shape:
            raise DimensionError("mean and log_variance must share shape")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def sample(self, temperature: float = 1.0,
               generator: torch.Generator | None = None) -> torch.Tensor:
        return sample_latent(self, temperature, generator)


def sample_latent(g: GaussianLatent, temperature: float = 1.0,
                  generator: torch.Generator | None = None) -> torch.Tensor:
    """Reparameterized draw: mean + temperature * std * eps.

    Temperature 0 short-circuits to the mean (no RNG consumed).
    """
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return g.mean
    eps = torch.randn(g.mean.shape, generator=generator, dtype=g.mean.dtype,
                      device=g.mean.device)
    return g.mean + temperature * torch.exp(0.5 * g.log_variance) * eps


def _check_axis(tensor: torch.Tensor, axis: int, expected: int, name: str):
    if tensor.shape[axis] != expected:
        raise DimensionError(
            f"{name}: expected size {expected} on axis {axis}, got {tensor.shape[axis]} "
            f"(full shape {tuple(tensor.shape)})")


class ArousalEncoder(nn.Module):
    """Conv feature extraction over the 128 x T grid, then a bidirectional LSTM."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.conv = nn.Conv2d(1, cfg.conv_channels, cfg.conv_kernel, stride=cfg.conv_stride)
        self.pool = nn.MaxPool2d(cfg.pool_kernel)
        pitch_out = (NUM_PITCHES - cfg.conv_kernel[0]) // cfg.conv_stride[0] + 1
        time_out = (cfg.arousal_steps - cfg.conv_kernel[1]) // cfg.conv_stride[1] + 1
        time_out //= cfg.pool_kernel[1]
        self.feature_dim = cfg.conv_channels * pitch_out
        if self.feature_dim != cfg.arousal_rnn_input:
            raise DimensionError(
                f"conv features ({self.feature_dim}) do not match the RNN input "
                f"width ({cfg.arousal_rnn_input})")
        self.seq_len = time_out
        self.rnn = nn.LSTM(cfg.arousal_rnn_input, cfg.arousal_rnn_hidden,
                           num_layers=1, bidirectional=True, batch_first=True)
        self.mean_head = nn.Linear(2 * cfg.arousal_rnn_hidden, cfg.latent_dim)
        self.logvar_head = nn.Linear(2 * cfg.arousal_rnn_hidden, cfg.latent_dim)

    def forward(self, grid: torch.Tensor) -> GaussianLatent:
        """grid (B, 128, T) -> 256-dim Gaussian latent parameters."""
        if grid.ndim != 3:
            raise DimensionError(f"arousal grid must be (B, 128, T), got {tuple(grid.shape)}")
        _check_axis(grid, 1, NUM_PITCHES, "arousal grid pitch axis")
        _check_axis(grid, 2, self.cfg.arousal_steps, "arousal grid time axis")
        x = self.pool(torch.relu(self.conv(grid.unsqueeze(1))))
        # (B, C, pitch_groups, time) -> time-major sequence of flattened features
        x = x.permute(0, 3, 1, 2).flatten(2)
        _, (h, _) = self.rnn(x)
        final = torch.cat([h[0], h[1]], dim=-1)
        return GaussianLatent(self.mean_head(final), self.logvar_head(final))


class ValenceEncoder(nn.Module):
    """Chroma columns embedded to 32 dims, then a bidirectional LSTM."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Linear(NUM_PITCH_CLASSES, cfg.valence_embed_dim)
        self.rnn = nn.LSTM(cfg.valence_embed_dim, cfg.valence_rnn_hidden,
                           num_layers=1, bidirectional=True, batch_first=True)
        self.mean_head = nn.Linear(2 * cfg.valence_rnn_hidden, cfg.latent_dim)
        self.logvar_head = nn.Linear(2 * cfg.valence_rnn_hidden, cfg.latent_dim)

    def forward(self, valence_seq: torch.Tensor) -> GaussianLatent:
        """valence_seq (B, 12, steps) -> 256-dim Gaussian latent parameters."""
        if valence_seq.ndim != 3:
            raise DimensionError(
                f"valence sequence must be (B, 12, steps), got {tuple(valence_seq.shape)}")
        _check_axis(valence_seq, 1, NUM_PITCH_CLASSES, "valence chroma axis")
        _check_axis(valence_seq, 2, self.cfg.valence_steps, "valence window axis")
        x = self.embed(valence_seq.transpose(1, 2))
        _, (h, _) = self.rnn(x)
        final = torch.cat([h[0], h[1]], dim=-1)
        return GaussianLatent(self.mean_head(final), self.logvar_head(final))


class ValenceDecoder(nn.Module):
    """Autoregressive chroma decoder: per-step 12-dim Bernoulli probabilities.

    Step input is the latent sample fused with a small context block:
    previous chroma token, per-step conditioning chroma, and a position
    one-hot.  Teacher forcing swaps the previous token for ground truth.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.cell = nn.LSTMCell(cfg.valence_decoder_input, cfg.valence_decoder_hidden)
        self.head = nn.Linear(cfg.valence_decoder_hidden, NUM_PITCH_CLASSES)

    def forward(self, z: torch.Tensor, conditioning: torch.Tensor | None = None,
                target: torch.Tensor | None = None, tf_ratio: float = 0.0,
                rng: np.random.Generator | None = None) -> torch.Tensor:
        """z (B, latent) -> probabilities (B, steps, 12)."""
        _check_axis(z, -1, self.cfg.latent_dim, "valence latent")
        batch = z.shape[0]
        steps = self.cfg.valence_steps
        if conditioning is not None:
            _check_axis(conditioning, 1, NUM_PITCH_CLASSES, "conditioning chroma axis")
            _check_axis(conditioning, 2, steps, "conditioning window axis")
        h = z.new_zeros(batch, self.cfg.valence_decoder_hidden)
        c = torch.zeros_like(h)
        prev = z.new_zeros(batch, NUM_PITCH_CLASSES)
        pad = self.cfg.valence_decoder_context - 3 * NUM_PITCH_CLASSES
        outputs = []
        for t in range(steps):
            cond_t = (conditioning[:, :, t] if conditioning is not None
                      else z.new_zeros(batch, NUM_PITCH_CLASSES))
            pos = z.new_zeros(batch, NUM_PITCH_CLASSES)
            pos[:, t % NUM_PITCH_CLASSES] = 1.0
            ctx = torch.cat([prev, cond_t, pos], dim=-1)
            if pad > 0:
                ctx = torch.cat([ctx, z.new_zeros(batch, pad)], dim=-1)
            h, c = self.cell(torch.cat([z, ctx], dim=-1), (h, c))
            probs = torch.sigmoid(self.head(h))
            outputs.append(probs)
            use_truth = (target is not None and rng is not None
                         and rng.random() < tf_ratio)
            # soft feedback keeps gradients flowing through the autoregression
            prev = target[:, :, t] if use_truth else probs
        return torch.stack(outputs, dim=1)


@dataclass
class PianoDecodeResult:
    pitch_logits: torch.Tensor      # (B, steps, 128)
    duration_logits: torch.Tensor   # (B, steps, 128, buckets)
    note_summary: torch.Tensor      # (B, steps, 512)
    attention: torch.Tensor         # (B, steps, steps)

    @property
    def pitch_probs(self) -> torch.Tensor:
        return torch.sigmoid(self.pitch_logits)


class PianoTreeDecoder(nn.Module):
    """Hierarchical decoder: time frames -> note summary -> attention -> pitches -> durations.

    The time unroll is input-fed rather than self-fed: each step sees the
    fused latents, a position one-hot, and (under teacher forcing) the
    embedded ground-truth previous frame.  Free-running steps see a zero
    frame, so inference follows exactly the trajectory trained at gate-off
    steps, and the whole unroll runs as one fused LSTM call.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.frame_embed = nn.Linear(NUM_PITCHES, cfg.summary_dim)
        self.time_rnn = nn.LSTM(
            2 * cfg.latent_dim + cfg.summary_dim + cfg.arousal_steps,
            cfg.time_rnn_hidden, batch_first=True)
        self.summary_proj = nn.Linear(cfg.time_rnn_hidden, cfg.summary_dim)
        self.attention = RelativeSelfAttention(cfg.summary_dim, cfg.query_dim,
                                               cfg.attention_dim, cfg.max_attention_len)
        self.pitch_head = nn.Linear(cfg.summary_dim, NUM_PITCHES)
        # onsets are sparse (~1% of cells); start at that prior so training
        # never detours through a violent suppress-everything phase
        nn.init.constant_(self.pitch_head.bias, -5.0)
        dur_half = cfg.duration_rnn_hidden // 2
        self.dur_context = nn.Linear(cfg.summary_dim, dur_half)
        self.pitch_embed = nn.Embedding(NUM_PITCHES, cfg.duration_rnn_hidden - dur_half)
        self.dur_rnn = nn.LSTM(cfg.duration_rnn_hidden, cfg.duration_rnn_hidden,
                               batch_first=True)
        self.dur_head = nn.Linear(cfg.duration_rnn_hidden, cfg.duration_buckets)

    def forward(self, z_arousal: torch.Tensor, z_valence: torch.Tensor,
                target_onsets: torch.Tensor | None = None, tf_ratio: float = 0.0,
                rng: np.random.Generator | None = None) -> PianoDecodeResult:
        """Latent pair -> pitch logits, duration logits, summaries, attention map."""
        _check_axis(z_arousal, -1, self.cfg.latent_dim, "arousal latent")
        _check_axis(z_valence, -1, self.cfg.latent_dim, "valence latent")
        fused = torch.cat([z_arousal, z_valence], dim=-1)
        batch = fused.shape[0]
        steps = self.cfg.arousal_steps

        prev = fused.new_zeros(batch, steps, NUM_PITCHES)
        if target_onsets is not None and rng is not None and tf_ratio > 0:
            gates = rng.random(steps) < tf_ratio
            for t in range(1, steps):
                if gates[t]:
                    prev[:, t] = target_onsets[:, t - 1]
        positions = torch.eye(steps, dtype=fused.dtype, device=fused.device)
        seq = torch.cat([
            fused.unsqueeze(1).expand(-1, steps, -1),
            self.frame_embed(prev),
            positions.unsqueeze(0).expand(batch, -1, -1),
        ], dim=-1)
        hidden, _ = self.time_rnn(seq)
        note_summary = torch.tanh(self.summary_proj(hidden))
        context, attention = self.attention(note_summary)
        pitch_logits = self.pitch_head(note_summary + context)

        # per-note durations: a small LSTM sweeps the pitch axis of every frame
        ctx = self.dur_context(context)                     # (B, steps, half)
        ctx = ctx.unsqueeze(2).expand(-1, -1, NUM_PITCHES, -1)
        pitches = self.pitch_embed.weight.unsqueeze(0).unsqueeze(0).expand(
            batch, steps, -1, -1)
        dur_in = torch.cat([ctx, pitches], dim=-1).reshape(
            batch * steps, NUM_PITCHES, self.cfg.duration_rnn_hidden)
        dur_out, _ = self.dur_rnn(dur_in)
        duration_logits = self.dur_head(dur_out).reshape(
            batch, steps, NUM_PITCHES, self.cfg.duration_buckets)

        return PianoDecodeResult(pitch_logits, duration_logits, note_summary, attention)


@dataclass
class SegmentBatch:
    """Model-side tensors for a batch of 2-bar segments."""

    arousal_grid: torch.Tensor       # (B, 128, 32) float
    valence_seq: torch.Tensor        # (B, 12, 8) float
    conditioning: torch.Tensor       # (B, 12, 8) float, melody chroma
    target_onsets: torch.Tensor      # (B, 32, 128) float 0/1
    target_durations: torch.Tensor   # (B, 32, 128) long bucket ids
    target_chroma: torch.Tensor      # (B, 12, 8) float 0/1

    @property
    def batch_size(self) -> int:
        return self.arousal_grid.shape[0]


@dataclass
class VAModelOutput:
    valence_probs: torch.Tensor     # (B, 12, steps)
    piano: PianoDecodeResult
    valence_latent: GaussianLatent | None
    arousal_latent: GaussianLatent | None


class VAModel(nn.Module):
    """The full valence/arousal VAE: two encoders, two decoders."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        self.arousal_encoder = ArousalEncoder(self.cfg)
        self.valence_encoder = ValenceEncoder(self.cfg)
        self.valence_decoder = ValenceDecoder(self.cfg)
        self.piano_decoder = PianoTreeDecoder(self.cfg)

    def encode_arousal(self, grid: torch.Tensor) -> GaussianLatent:
        return self.arousal_encoder(grid)

    def encode_valence(self, valence_seq: torch.Tensor) -> GaussianLatent:
        return self.valence_encoder(valence_seq)

    def forward(self, batch: SegmentBatch, tf_pianotree: float = 0.0,
                tf_valence: float = 0.0, rng: np.random.Generator | None = None,
                temperature: float = 1.0,
                generator: torch.Generator | None = None) -> VAModelOutput:
        """Encode the batch, sample latents, decode both streams."""
        valence_latent = self.encode_valence(batch.valence_seq)
        arousal_latent = self.encode_arousal(batch.arousal_grid)
        z_v = valence_latent.sample(temperature, generator)
        z_a = arousal_latent.sample(temperature, generator)
        valence_probs = self.valence_decoder(
            z_v, batch.conditioning, target=batch.target_chroma,
            tf_ratio=tf_valence, rng=rng)
        piano = self.piano_decoder(
            z_a, z_v, target_onsets=batch.target_onsets,
            tf_ratio=tf_pianotree, rng=rng)
        return VAModelOutput(valence_probs.transpose(1, 2), piano,
                             valence_latent, arousal_latent)

    def decode(self, z_arousal: torch.Tensor, z_valence: torch.Tensor,
               conditioning: torch.Tensor | None = None) -> VAModelOutput:
        """Pure generation from latent samples (no teacher forcing)."""
        valence_probs = self.valence_decoder(z_valence, conditioning)
        piano = self.piano_decoder(z_arousal, z_valence)
        return VAModelOutput(valence_probs.transpose(1, 2), piano, None, None)


def roll_from_decoding(piano: PianoDecodeResult, index: int = 0,
                       threshold: float = 0.5, velocity: int = 100,
                       steps_per_bar: int = 16) -> PianoRoll:
    """Assemble a PianoRoll from one batch item: thresholded pitches + argmax durations."""
    probs = piano.pitch_probs[index].detach().cpu().numpy()       # (steps, 128)
    durations = piano.duration_logits[index].detach().argmax(-1).cpu().numpy() + 1
    steps = probs.shape[0]
    grid = np.zeros((NUM_PITCHES, steps), dtype=np.int16)
    for t, p in zip(*np.nonzero(probs > threshold)):
        end = min(steps, t + int(durations[t, p]))
        np.maximum(grid[p, t:end], velocity, out=grid[p, t:end])
    return PianoRoll(grid, role="accompaniment", steps_per_bar=steps_per_bar)
