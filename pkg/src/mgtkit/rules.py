"""Latter-part global statistics, threshold atoms and rule-support scoring.

Five statistics summarize how stable a score sequence is after its initial
part: the variance of latter scores, the variance and mean of adjacent
absolute differences, and the variance and mean of long-range absolute
differences (hop size half the latter length). Each statistic's training
range is discretized into K buckets; a text activates one atom per
statistic and its rule-support score is the mean machine-fraction of the
activated atoms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStatsError, FitError, ValidationError
from .records import Corpus

STAT_NAMES = (
    "var_late",
    "var_late_adj",
    "mean_late_adj",
    "var_late_long",
    "mean_late_long",
)
M = len(STAT_NAMES)

NEUTRAL_SUPPORT = 0.5

# Latter parts shorter than this cannot support the long-range statistics;
# such texts get the neutral score instead of a misleading one.
MIN_LATTER = 4

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StatVector:
    """The five global statistics of one text, plus a degeneracy flag."""

    z: np.ndarray
    degenerate: bool

    def __post_init__(self):
        arr = np.asarray(self.z, dtype=float)
        if arr.shape != (M,):
            raise ValidationError(f"statistic vector must have length {M}")
        arr.flags.writeable = False
        object.__setattr__(self, "z", arr)


def global_statistics(scores, t0: int) -> StatVector:
    """Compute the latter-part statistics of one score sequence.

    Positions are 1-based; the latter part is everything after t0. All
    variances are population variances. Latter parts shorter than
    MIN_LATTER positions yield a degenerate all-zero vector.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("scores must be a 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("scores contain non-finite values")
    start = max(t0, 0)
    late = arr[start:]
    if late.size < MIN_LATTER:
        return StatVector(z=np.zeros(M), degenerate=True)
    adjacent = np.abs(np.diff(late))
    hop = late.size // 2
    longrange = np.abs(late[hop:] - late[:-hop])
    z = np.array([
        late.var(),
        adjacent.var(),
        adjacent.mean(),
        longrange.var(),
        longrange.mean(),
    ])
    return StatVector(z=z, degenerate=False)


@dataclass(frozen=True)
class StatGrid:
    """Uniform threshold grid for a single statistic."""

    lower: float
    upper: float
    thresholds: np.ndarray
    collapsed: bool

    def __post_init__(self):
        arr = np.asarray(self.thresholds, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "thresholds", arr)


@dataclass(frozen=True)
class ThresholdGrid:
    """Per-statistic grids sharing one bucket count K."""

    k: int
    stats: tuple[StatGrid, ...]

    def __post_init__(self):
        if len(self.stats) != M:
            raise ValidationError(f"grid must cover exactly {M} statistics")


def fit_thresholds(train_stats, k: int) -> ThresholdGrid:
    """Fit uniform K-interval grids over the training range of each statistic.

    Thresholds follow tau_j = a + (j-1)/(K-1) * (b-a) for j = 1..K-1, with
    a/b the training min/max over non-degenerate texts, so the first
    threshold sits exactly at a. A zero-range statistic collapses: its grid
    is flagged and every value maps to the final atom.
    """
    if k < 2:
        raise ValidationError("bucket count K must be >= 2")
    usable = [sv.z for sv in train_stats if not sv.degenerate]
    if len(usable) < 2:
        raise FitError("need at least 2 non-degenerate training texts")
    matrix = np.stack(usable)
    grids = []
    fractions = np.arange(k - 1) / (k - 1)
    for m in range(M):
        a = float(matrix[:, m].min())
        b = float(matrix[:, m].max())
        grids.append(
            StatGrid(
                lower=a,
                upper=b,
                thresholds=a + fractions * (b - a),
                collapsed=(a == b),
            )
        )
    return ThresholdGrid(k=k, stats=tuple(grids))


def assign_atom(value: float, grid: StatGrid, k: int) -> int:
    """1-based atom index of a statistic value; total and deterministic.

    Boundaries belong to the lower atom; values above the last threshold
    map to atom K, values at or below the first to atom 1. Collapsed grids
    send everything to atom K.
    """
    if not np.isfinite(value):
        raise ValidationError("statistic value must be finite")
    if grid.collapsed:
        return k
    return 1 + int(np.count_nonzero(grid.thresholds < value))


@dataclass(frozen=True)
class Rule:
    """Conjunction of one activated atom per statistic: ((stat, bucket), ...)."""

    atoms: tuple[tuple[int, int], ...]


def generate_rule(stats: StatVector, grid: ThresholdGrid) -> Rule:
    """Activate one atom per statistic; deterministic in the statistics."""
    if stats.degenerate:
        raise DegenerateStatsError("degenerate statistics generate no rule")
    atoms = tuple(
        (m, assign_atom(float(stats.z[m]), grid.stats[m], grid.k)) for m in range(M)
    )
    return Rule(atoms=atoms)


def rule_prior(rule: Rule, grid: ThresholdGrid) -> int:
    """1 iff the rule is feasible: M registered atoms, one per statistic."""
    if len(rule.atoms) != M:
        return 0
    seen = set()
    for stat_index, bucket in rule.atoms:
        if stat_index in seen:
            return 0
        seen.add(stat_index)
        if not (0 <= stat_index < M and 1 <= bucket <= grid.k):
            return 0
    return 1


@dataclass(frozen=True)
class SupportTable:
    """Per-atom training counts and machine-support fractions."""

    counts: np.ndarray
    machine_counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        machine = np.asarray(self.machine_counts, dtype=np.int64)
        if counts.shape != machine.shape or counts.ndim != 2 or counts.shape[0] != M:
            raise ValidationError("support table must have shape (M, K)")
        if np.any(machine > counts) or np.any(counts < 0) or np.any(machine < 0):
            raise ValidationError("machine counts must be within total counts")
        counts.flags.writeable = False
        machine.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "machine_counts", machine)

    def support(self, stat_index: int, bucket: int) -> float:
        """Machine fraction of the atom, neutral 0.5 when unseen."""
        n = self.counts[stat_index, bucket - 1]
        if n == 0:
            return NEUTRAL_SUPPORT
        return float(self.machine_counts[stat_index, bucket - 1]) / float(n)


@dataclass(frozen=True)
class RuleModel:
    """Everything the rule branch needs at scoring time."""

    grid: ThresholdGrid
    table: SupportTable
    t0: int
    conjunctions: dict[tuple[int, ...], tuple[int, int]] = field(default_factory=dict)


def _stat_stream(record, t0: int, scorer) -> StatVector:
    return global_statistics(scorer(record), t0)


def fit_atom_support(train: Corpus, grid: ThresholdGrid, t0: int, scorer) -> SupportTable:
    """Count each non-degenerate training text into one atom per statistic.

    ``scorer`` maps a record to its per-token score vector (normally the
    raw sign-normalized token scores of the chosen detector).
    """
    counts = np.zeros((M, grid.k), dtype=np.int64)
    machine = np.zeros((M, grid.k), dtype=np.int64)
    for record in train:
        stats = _stat_stream(record, t0, scorer)
        if stats.degenerate:
            continue
        rule = generate_rule(stats, grid)
        for stat_index, bucket in rule.atoms:
            counts[stat_index, bucket - 1] += 1
            if record.is_machine:
                machine[stat_index, bucket - 1] += 1
    return SupportTable(counts=counts, machine_counts=machine)


def fit_conjunctions(train: Corpus, grid: ThresholdGrid, t0: int, scorer):
    """Full-conjunction counts for the probabilistic-rule baseline."""
    table: dict[tuple[int, ...], tuple[int, int]] = {}
    for record in train:
        stats = _stat_stream(record, t0, scorer)
        if stats.degenerate:
            continue
        key = tuple(bucket for _, bucket in generate_rule(stats, grid).atoms)
        n, n_machine = table.get(key, (0, 0))
        table[key] = (n + 1, n_machine + (1 if record.is_machine else 0))
    return table


def fit_rule_model(
    train: Corpus, k: int, t0: int, scorer, with_conjunctions: bool = True
) -> RuleModel:
    """Fit thresholds, atom supports and (optionally) conjunction counts."""
    stats = [_stat_stream(record, t0, scorer) for record in train]
    grid = fit_thresholds(stats, k)
    table = fit_atom_support(train, grid, t0, scorer)
    conjunctions = fit_conjunctions(train, grid, t0, scorer) if with_conjunctions else {}
    return RuleModel(grid=grid, table=table, t0=t0, conjunctions=conjunctions)


def rule_support(stats: StatVector, model: RuleModel) -> float:
    """Mean machine-support of the activated atoms; neutral when degenerate."""
    if stats.degenerate:
        return NEUTRAL_SUPPORT
    rule = generate_rule(stats, model.grid)
    supports = [model.table.support(m, bucket) for m, bucket in rule.atoms]
    return float(np.mean(supports))


def rule_probabilistic(stats: StatVector, model: RuleModel) -> float:
    """Machine fraction of the exact conjunction; neutral when unseen."""
    if stats.degenerate:
        return NEUTRAL_SUPPORT
    key = tuple(bucket for _, bucket in generate_rule(stats, model.grid).atoms)
    entry = model.conjunctions.get(key)
    if entry is None or entry[0] == 0:
        return NEUTRAL_SUPPORT
    n, n_machine = entry
    return n_machine / n


def model_to_json(model: RuleModel) -> str:
    """Serialize the fitted rule model to a versioned JSON document."""
    obj = {
        "version": MODEL_FORMAT_VERSION,
        "k": model.grid.k,
        "m": M,
        "t0": model.t0,
        "stats": [
            {
                "name": STAT_NAMES[i],
                "lower": grid.lower,
                "upper": grid.upper,
                "thresholds": grid.thresholds.tolist(),
                "collapsed": grid.collapsed,
            }
            for i, grid in enumerate(model.grid.stats)
        ],
        "counts": model.table.counts.tolist(),
        "machine_counts": model.table.machine_counts.tolist(),
        "conjunctions": [
            {"atoms": list(key), "n": n, "n_machine": n_machine}
            for key, (n, n_machine) in sorted(model.conjunctions.items())
        ],
    }
    return json.dumps(obj)


def model_from_json(text: str) -> RuleModel:
    obj = json.loads(text)
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported rule model version {obj.get('version')!r}")
    if obj.get("m") != M:
        raise ValidationError("rule model statistic count mismatch")
    grids = tuple(
        StatGrid(
            lower=entry["lower"],
            upper=entry["upper"],
            thresholds=np.array(entry["thresholds"], dtype=float),
            collapsed=entry["collapsed"],
        )
        for entry in obj["stats"]
    )
    conjunctions = {
        tuple(entry["atoms"]): (entry["n"], entry["n_machine"])
        for entry in obj.get("conjunctions", [])
    }
    return RuleModel(
        grid=ThresholdGrid(k=obj["k"], stats=grids),
        table=SupportTable(
            counts=np.array(obj["counts"], dtype=np.int64),
            machine_counts=np.array(obj["machine_counts"], dtype=np.int64),
        ),
        t0=obj["t0"],
        conjunctions=conjunctions,
    )
