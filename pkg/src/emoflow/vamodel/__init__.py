from .attention import (
    AttentionConfigError,
    RelativeSelfAttention,
    gather_offset_logits,
    relative_attention,
)
from .checkpoint import CheckpointError, load_checkpoint, load_manifest, save_checkpoint
from .networks import (
    ArousalEncoder,
    GaussianLatent,
    ModelConfig,
    PianoDecodeResult,
    PianoTreeDecoder,
    SegmentBatch,
    VAModel,
    VAModelOutput,
    ValenceDecoder,
    ValenceEncoder,
    roll_from_decoding,
    sample_latent,
)

__all__ = [
    "AttentionConfigError",
    "ArousalEncoder",
    "CheckpointError",
    "GaussianLatent",
    "ModelConfig",
    "PianoDecodeResult",
    "PianoTreeDecoder",
    "RelativeSelfAttention",
    "SegmentBatch",
    "VAModel",
    "VAModelOutput",
    "ValenceDecoder",
    "ValenceEncoder",
    "gather_offset_logits",
    "load_checkpoint",
    "load_manifest",
    "relative_attention",
    "roll_from_decoding",
    "sample_latent",
    "save_checkpoint",
]
