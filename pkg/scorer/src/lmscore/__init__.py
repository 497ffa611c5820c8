"""lmscore: per-token score-stream extraction from causal language models."""

__version__ = "0.1.0"

from .scoring import (
    CROSS_STREAMS,
    OBSERVER_STREAMS,
    SUPPORTED_STREAMS,
    ScoreNote,
    ScorerConfig,
    ScorerError,
    StreamScorer,
    TextRecord,
    read_texts,
    score_texts,
    write_score_file,
)
