"""emoflow: emotion-guided piano accompaniment generation.

A melody with chord annotations plus user-drawn valence/arousal curves go
in; a 2-bar-segment VAE reconstructs an accompaniment whose measured
emotion flow tracks the curves, a music-theory rule pass re-aligns stray
bars to the annotated harmony, and an evaluation harness reports how
faithfully the flow was honored.
"""

__version__ = "0.1.0"

from . import emotion, evaluation, pipeline, rules, score_io, trainer, vamodel

__all__ = [
    "__version__",
    "emotion",
    "evaluation",
    "pipeline",
    "rules",
    "score_io",
    "trainer",
    "vamodel",
]
