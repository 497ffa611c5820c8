"""Metric-based detector family: per-token score selection plus aggregation.

Every method decomposes into a token-level scoring step and a text-level
aggregation step. Outputs are sign-normalized so that a larger score always
indicates a more machine-like text, regardless of each method's native
orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DegenerateScoreError, ValidationError
from .records import TokenScoreRecord

MEAN_FAMILY = ("likelihood", "logrank", "entropy")
ZSCORE_FAMILY = ("detectgpt", "fastdetectgpt")
RATIO_FAMILY = ("binoculars", "dna_detectllm")


@dataclass(frozen=True)
class DetectorMethod:
    """A detector's identity plus the streams/aux series it consumes."""

    kind: str
    required_streams: tuple[str, ...]
    required_aux: tuple[str, ...]


METHODS = {
    "likelihood": DetectorMethod("likelihood", ("logprob",), ()),
    "logrank": DetectorMethod("logrank", ("logrank",), ()),
    "entropy": DetectorMethod("entropy", ("entropy",), ()),
    # the logprob stream feeds token-level calibration; the entropy/cross
    # streams feed the ratio aggregation
    "binoculars": DetectorMethod("binoculars", ("logprob", "entropy_p", "xent_pq"), ()),
    "detectgpt": DetectorMethod("detectgpt", ("logprob",), ("perturbed",)),
    "fastdetectgpt": DetectorMethod("fastdetectgpt", ("logprob",), ("regenerated",)),
    "dna_detectllm": DetectorMethod(
        "dna_detectllm", ("logprob", "ideal_logprob", "logprob_q"), ()
    ),
}


@dataclass(frozen=True)
class DetectorOutput:
    """Sign-normalized text-level score: larger means more machine-like."""

    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise DegenerateScoreError("detector produced a non-finite score")


def method_by_name(name: str) -> DetectorMethod:
    try:
        return METHODS[name]
    except KeyError:
        raise ValidationError(
            f"unknown method {name!r}; choose from {sorted(METHODS)}"
        ) from None


def _require(record: TokenScoreRecord, method: DetectorMethod) -> None:
    for name in method.required_streams:
        if name not in record.streams:
            raise CapabilityError(f"stream {name!r}", record.id)
    for name in method.required_aux:
        if name not in record.aux_means:
            raise CapabilityError(f"aux_means.{name}", record.id)


def token_scores(record: TokenScoreRecord, method: DetectorMethod) -> np.ndarray:
    """Per-token scores for the method's primary stream, machine-oriented.

    Log-rank and entropy are negated (low rank / low entropy indicate
    machine text); all remaining methods read the log-probability stream
    as-is.
    """
    _require(record, method)
    if method.kind == "likelihood":
        return record.streams["logprob"].copy()
    if method.kind == "logrank":
        return -record.streams["logrank"]
    if method.kind == "entropy":
        return -record.streams["entropy"]
    return record.streams["logprob"].copy()


def aggregate_mean(scores: np.ndarray) -> float:
    """Mean of entries 2..N; the first token has no usable context."""
    arr = np.asarray(scores, dtype=float)
    if arr.size < 2:
        raise ValidationError("mean aggregation needs at least 2 tokens")
    return float(arr[1:].mean())


def aggregate_binoculars(entropy_p: np.ndarray, xent_pq: np.ndarray) -> float:
    """Observer-entropy over cross-term ratio, negated to machine-positive.

    Both streams use the same storage sign, so the raw ratio equals
    mean(entropy_p[2:]) / mean(xent_pq[2:]); the native score is lower for
    machine text, hence the final negation.
    """
    ep = np.asarray(entropy_p, dtype=float)
    xq = np.asarray(xent_pq, dtype=float)
    if ep.size != xq.size:
        raise ValidationError("entropy_p and xent_pq must have equal length")
    if ep.size < 2:
        raise ValidationError("ratio aggregation needs at least 2 tokens")
    denominator = -xq[1:].mean()
    if denominator == 0.0:
        raise DegenerateScoreError("cross-term mean is zero")
    ratio = (-ep[1:].mean()) / denominator
    return -ratio


def aggregate_zscore(candidate_mean: float, aux_means: np.ndarray) -> float:
    """Standardize the candidate mean against auxiliary sample means.

    Uses the population standard deviation; with as few as two auxiliary
    samples the n-1 variant would inflate the denominator.
    """
    aux = np.asarray(aux_means, dtype=float)
    if aux.size < 2:
        raise ValidationError("z-score needs at least 2 auxiliary means")
    sd = float(aux.std())
    if sd == 0.0:
        raise DegenerateScoreError("auxiliary means have zero spread")
    return (float(candidate_mean) - float(aux.mean())) / sd


def aggregate_dna(
    logprob: np.ndarray, ideal_logprob: np.ndarray, logprob_q_weighted: np.ndarray
) -> float:
    """Repair-effort score over the weighted cross denominator, machine-positive.

    The raw value (NLL of the ideal sequence minus NLL of the candidate,
    over twice the mean weighted cross term) grows with the repair effort,
    which is larger for human text, hence the final negation. Sums run over
    the full sequence, including the first token.
    """
    lp = np.asarray(logprob, dtype=float)
    ip = np.asarray(ideal_logprob, dtype=float)
    lq = np.asarray(logprob_q_weighted, dtype=float)
    if not (lp.size == ip.size == lq.size):
        raise ValidationError("dna streams must have equal length")
    if lp.size < 1:
        raise ValidationError("dna aggregation needs at least 1 token")
    denominator = 2.0 * lq.mean()
    if denominator == 0.0:
        raise DegenerateScoreError("weighted cross stream has zero mean")
    raw = ((-ip).mean() - (-lp).mean()) / denominator
    return -raw


def aggregate(record: TokenScoreRecord, method: DetectorMethod, candidate: np.ndarray) -> float:
    """Apply the method's aggregation to a candidate per-token vector.

    The candidate vector stands in for the method's primary per-token
    stream; auxiliary streams/series always come from the record untouched.
    """
    kind = method.kind
    if kind in MEAN_FAMILY:
        return aggregate_mean(candidate)
    if kind == "detectgpt":
        return aggregate_zscore(aggregate_mean(candidate), record.aux_means["perturbed"])
    if kind == "fastdetectgpt":
        return aggregate_zscore(aggregate_mean(candidate), record.aux_means["regenerated"])
    if kind == "binoculars":
        return aggregate_binoculars(candidate, record.streams["xent_pq"])
    if kind == "dna_detectllm":
        return aggregate_dna(
            candidate, record.streams["ideal_logprob"], record.streams["logprob_q"]
        )
    raise ValidationError(f"unknown method kind {kind!r}")


def detect_base(record: TokenScoreRecord, method: DetectorMethod) -> DetectorOutput:
    """Run the unmodified detector: token scores into the native aggregation."""
    _require(record, method)
    if method.kind == "binoculars":
        candidate = record.streams["entropy_p"]
    else:
        candidate = token_scores(record, method)
    return DetectorOutput(score=aggregate(record, method, candidate))
