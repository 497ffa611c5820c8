"""Chain-MRF mean-field calibration of per-token detection beliefs.

Beliefs over {human, machine} per token are refined by iterating a
closed-form mean-field update on a chain whose pairwise couplings reward
label agreement between neighbors. Couplings are damped near the start of
the sequence, where token evidence is unstable, via a position-dependent
sigmoid weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .detectors import DetectorMethod, aggregate, token_scores
from .errors import ValidationError
from .records import TokenScoreRecord, UnaryProbabilities, normalize_scores

# Reward/penalty sign pattern: agreeing neighbor mass lowers a label's
# energy, disagreeing mass raises it.
_SIGNS = np.array([[-1.0, 1.0], [1.0, -1.0]])

_CLAMP = 1e-12


@dataclass(frozen=True)
class CalibrationParams:
    """Pairwise weights, initial-part length and iteration count."""

    w: np.ndarray = field(default_factory=lambda: np.ones((2, 2)))
    t0: int = 20
    iterations: int = 10

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.shape != (2, 2):
            raise ValidationError("pairwise weight matrix must be 2x2")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValidationError("pairwise weights must be finite and >= 0")
        if self.iterations < 1:
            raise ValidationError("iteration count must be >= 1")
        # t0 may be any integer; strongly negative values make the
        # positional weight identically 1 (damping disabled).
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, w: float, t0: int = 20, iterations: int = 10) -> "CalibrationParams":
        return cls(w=np.full((2, 2), float(w)), t0=t0, iterations=iterations)


@dataclass(frozen=True)
class BeliefMatrix:
    """N x 2 per-token class beliefs; column 0 human, column 1 machine."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("belief matrix must have shape (N, 2)")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("beliefs must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "q", arr)

    @property
    def machine(self) -> np.ndarray:
        return self.q[:, 1]


@dataclass(frozen=True)
class ChainAdjacency:
    """Sparse symmetric chain coupling weights, 1-based position keys."""

    n: int
    weights: dict[tuple[int, int], float]


def beta(j, t0: int):
    """Positional weight 1 / (1 + exp(-(j - t0))); increasing in j.

    Accepts scalars or arrays of 1-based positions.
    """
    return expit(np.asarray(j, dtype=float) - t0)


def build_adjacency(n: int, t0: int) -> ChainAdjacency:
    """Couplings for each adjacent pair, governed by the later position.

    Both directed entries of the pair {i, i+1} carry beta(i+1), so early
    pairs are suppressed symmetrically. A length-1 chain has no entries.
    """
    if n < 1:
        raise ValidationError("chain length must be >= 1")
    weights = {}
    if n > 1:
        later = beta(np.arange(2, n + 1), t0)
        for i in range(1, n):
            w = float(later[i - 1])
            weights[(i, i + 1)] = w
            weights[(i + 1, i)] = w
    return ChainAdjacency(n=n, weights=weights)


def _pair_weights(n: int, t0: int) -> np.ndarray:
    # beta of the later position of each adjacent pair {i, i+1}, i = 1..N-1
    return beta(np.arange(2, n + 1), t0)


def _neighbor_mix(q: np.ndarray, pair_w: np.ndarray) -> np.ndarray:
    mixed = np.zeros_like(q)
    mixed[1:] += pair_w[:, None] * q[:-1]
    mixed[:-1] += pair_w[:, None] * q[1:]
    return mixed


def mean_field_calibrate(
    p: UnaryProbabilities,
    params: CalibrationParams,
    on_iteration=None,
) -> BeliefMatrix:
    """Run the mean-field refinement and return the final belief matrix.

    Initial beliefs are [1-p, p] with entries clamped away from 0/1 before
    the first logarithm. Each iteration applies a row-wise softmax of
    log-beliefs minus the coupled neighbor message. When the coupling
    matrix is all zero (or the chain has a single token) the message
    vanishes and the update is skipped outright, which keeps the zero
    coupling fixpoint bit-exact.

    ``on_iteration``, when given, is called with the belief matrix after
    every iteration (used by diagnostics and invariant tests).
    """
    prob = np.asarray(p.p, dtype=float)
    n = prob.size
    q = np.stack(
        [np.clip(1.0 - prob, _CLAMP, 1.0 - _CLAMP), np.clip(prob, _CLAMP, 1.0 - _CLAMP)],
        axis=1,
    )
    coupling = params.w * _SIGNS
    inert = n == 1 or not coupling.any()
    pair_w = None if inert else _pair_weights(n, params.t0)
    for _ in range(params.iterations):
        if not inert:
            message = _neighbor_mix(q, pair_w) @ coupling
            logits = np.log(q) - message
            logits -= logits.max(axis=1, keepdims=True)
            q = np.exp(logits)
            q /= q.sum(axis=1, keepdims=True)
        if on_iteration is not None:
            on_iteration(q)
    return BeliefMatrix(q=q)


def final_calibration(beliefs: BeliefMatrix, t0: int) -> np.ndarray:
    """Machine-class beliefs scaled by the positional weight.

    Early positions get downweighted; every output entry lies in (0, 1)
    whenever the input beliefs do.
    """
    n = beliefs.q.shape[0]
    return beta(np.arange(1, n + 1), t0) * beliefs.machine


def calibrated_token_scores(
    record: TokenScoreRecord, method: DetectorMethod, params: CalibrationParams
) -> np.ndarray:
    """Normalized, mean-field-refined, position-damped per-token scores."""
    raw = token_scores(record, method)
    if raw.size < 2:
        raise ValidationError("calibration needs at least 2 tokens")
    beliefs = mean_field_calibrate(normalize_scores(raw), params)
    return final_calibration(beliefs, params.t0)


def enhance(
    record: TokenScoreRecord, method: DetectorMethod, params: CalibrationParams
) -> float:
    """Enhanced detector: calibrated token scores into the native aggregation.

    The calibrated vector replaces the method's candidate per-token stream;
    auxiliary streams and per-sample auxiliary means stay untouched (they
    have no positional alignment with the candidate).
    """
    calibrated = calibrated_token_scores(record, method, params)
    return aggregate(record, method, calibrated)
