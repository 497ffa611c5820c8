"""Experimental protocol: splits, metrics, multi-seed reports, relation analysis.

The protocol is 10% train / 45% validation / 45% test with label-stratified
seeded shuffles, five fixed seeds by default, AUROC as the main metric and
the true-positive rate at a 1% false-positive budget as the operational
one. Relation-analysis helpers expose k-hop and position-wise mean absolute
score differences and the per-text global statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MetricError, SplitError, ValidationError
from .pipeline import FittedPipeline, PipelineConfig, detect_batch, fit
from .records import Corpus
from .rules import M, STAT_NAMES, global_statistics

TRAIN_FRACTION = 0.10
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DEFAULT_FPR_BUDGET = 0.01


@dataclass(frozen=True)
class SplitSpec:
    """Seeded 10/45/45 split; fractions are protocol constants."""

    seed: int


def _allocate(targets: np.ndarray, total: int) -> np.ndarray:
    # Largest-remainder allocation of `total` slots proportional to targets.
    ideal = targets * (total / targets.sum()) if targets.sum() else np.zeros_like(targets, float)
    base = np.floor(ideal).astype(int)
    remainder = total - base.sum()
    order = np.argsort(-(ideal - base), kind="stable")
    for i in range(remainder):
        base[order[i]] += 1
    return base


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Label-stratified seeded partition into train/validation/test.

    Global counts are train = floor(0.10 n), validation = floor of half the
    remainder, test = the rest (the odd record lands in test). Per-label
    allocations follow the global counts by largest remainder, keeping
    stratification within one record per split.
    """
    n = len(corpus)
    labels = sorted({r.label for r in corpus})
    if len(labels) < 2:
        raise SplitError("corpus must contain both labels")
    if n < 10:
        raise SplitError("corpus must contain at least 10 records")

    n_train = int(np.floor(TRAIN_FRACTION * n))
    n_val = (n - n_train) // 2

    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    by_label = {lab: [i for i in order if corpus[i].label == lab] for lab in labels}
    group_sizes = np.array([len(by_label[lab]) for lab in labels], dtype=float)

    train_alloc = _allocate(group_sizes, n_train)
    rest = group_sizes - train_alloc
    val_alloc = _allocate(rest, n_val)

    picks = {"train": [], "val": [], "test": []}
    for gi, lab in enumerate(labels):
        indices = by_label[lab]
        t, v = int(train_alloc[gi]), int(val_alloc[gi])
        picks["train"] += indices[:t]
        picks["val"] += indices[t:t + v]
        picks["test"] += indices[t + v:]
    parts = []
    for name in ("train", "val", "test"):
        chosen = sorted(picks[name])  # original corpus order within each split
        parts.append(Corpus(tuple(corpus[i] for i in chosen)))
    return tuple(parts)


def _score_label_arrays(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValidationError("scores and labels must be 1-D and equal length")
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores contain non-finite values")
    if not y.any() or y.all():
        raise MetricError("both labels are required")
    return s, y


def auroc(scores, labels) -> float:
    """Probability a machine score exceeds a human score, ties counted half.

    Midrank formulation; agrees exactly with brute-force pair counting.
    """
    s, y = _score_label_arrays(scores, labels)
    n = s.size
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(n)
    sorted_scores = s[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    n_machine = int(y.sum())
    n_human = n - n_machine
    u = ranks[y].sum() - n_machine * (n_machine + 1) / 2.0
    return float(u / (n_machine * n_human))


def tpr_at_fpr(scores, labels, fpr_budget: float = DEFAULT_FPR_BUDGET) -> float:
    """True-positive rate at the smallest threshold keeping FPR within budget.

    Exceedance is strict (score > threshold), so ties sit on the human
    side. Equivalent to the exhaustive sweep maximizing TPR subject to
    FPR <= budget.
    """
    s, y = _score_label_arrays(scores, labels)
    human = np.sort(s[~y])[::-1]
    machine = s[y]
    n_human = human.size
    allowed = int(fpr_budget * n_human)
    while allowed + 1 <= n_human and (allowed + 1) / n_human <= fpr_budget:
        allowed += 1
    while allowed > 0 and allowed / n_human > fpr_budget:
        allowed -= 1
    if allowed >= n_human:
        return 1.0
    threshold = human[allowed]  # (allowed+1)-th largest human score
    return float((machine > threshold).mean())


def khop_mad(corpus: Corpus, k: int, stream: str) -> float:
    """Corpus mean of per-text mean absolute score difference across k hops."""
    if len(corpus) == 0:
        raise MetricError("empty corpus")
    if k < 1:
        raise ValidationError("hop size must be >= 1")
    per_text = []
    for record in corpus:
        values = record.streams.get(stream)
        if values is None:
            raise ValidationError(f"record {record.id!r} lacks stream {stream!r}")
        if values.size <= k:
            raise ValidationError(
                f"record {record.id!r} has length {values.size} <= hop {k}"
            )
        per_text.append(np.abs(values[k:] - values[:-k]).mean())
    return float(np.mean(per_text))


def positionwise_mad(corpus: Corpus, stream: str) -> np.ndarray:
    """Mean absolute adjacent difference per position, truncated to the
    minimum common length across the corpus."""
    if len(corpus) == 0:
        raise MetricError("empty corpus")
    lengths = []
    for record in corpus:
        if stream not in record.streams:
            raise ValidationError(f"record {record.id!r} lacks stream {stream!r}")
        lengths.append(record.streams[stream].size)
    common = min(lengths)
    if common < 2:
        raise MetricError("common length must be >= 2 for adjacent differences")
    diffs = np.stack(
        [np.abs(np.diff(record.streams[stream][:common])) for record in corpus]
    )
    return diffs.mean(axis=0)


def stat_distributions(corpus: Corpus, t0: int, stream: str) -> list[dict]:
    """Per-record label and global statistics, one row per record."""
    if len(corpus) == 0:
        raise MetricError("empty corpus")
    rows = []
    for record in corpus:
        values = record.streams.get(stream)
        if values is None:
            raise ValidationError(f"record {record.id!r} lacks stream {stream!r}")
        stats = global_statistics(values, t0)
        row = {"id": record.id, "label": record.label}
        for name, value in zip(STAT_NAMES, stats.z):
            row[name] = float(value)
        row["degenerate"] = stats.degenerate
        rows.append(row)
    return rows


@dataclass(frozen=True)
class MetricRow:
    seed: int
    group: str
    auroc: float
    tpr_at_fpr: float


@dataclass(frozen=True)
class GroupSummary:
    auroc_mean: float
    auroc_sd: float
    tpr_mean: float
    tpr_sd: float


@dataclass(frozen=True)
class MetricReport:
    """Per-(seed, group) metrics plus mean/sd aggregates per group."""

    rows: tuple[MetricRow, ...]
    summary: dict[str, GroupSummary]

    def to_csv(self) -> str:
        lines = ["seed,group,auroc,tpr_at_fpr"]
        for row in self.rows:
            lines.append(f"{row.seed},{row.group},{row.auroc!r},{row.tpr_at_fpr!r}")
        lines.append("summary,group,auroc_mean,auroc_sd,tpr_mean,tpr_sd")
        for group in sorted(self.summary):
            s = self.summary[group]
            lines.append(
                f"summary,{group},{s.auroc_mean!r},{s.auroc_sd!r},{s.tpr_mean!r},{s.tpr_sd!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentConfig:
    """Cross-LLM protocol configuration for run_experiment."""

    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    train_source: str = "synth"
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    fpr_budget: float = DEFAULT_FPR_BUDGET
    threads: int = 1


def _restrict_to_source(corpus: Corpus, source: str) -> Corpus:
    return corpus.subset(lambda r: (not r.is_machine) or r.source_model == source)


def run_experiment(corpus: Corpus, config: ExperimentConfig) -> MetricReport:
    """Split, fit and evaluate per seed under the cross-LLM protocol.

    Training (and validation, used only for hyperparameter selection) is
    restricted to the configured source model's machine texts plus all
    human texts; the test split is evaluated per machine source model
    against all human test records.
    """
    sources = {r.source_model for r in corpus if r.is_machine}
    if config.train_source not in sources:
        raise ConfigError(
            f"training source {config.train_source!r} absent; present: {sorted(sources)}"
        )
    rows: list[MetricRow] = []
    for seed in config.seeds:
        train, val, test = split(corpus, SplitSpec(seed=seed))
        train_r = _restrict_to_source(train, config.train_source)
        val_r = _restrict_to_source(val, config.train_source)
        pipeline = fit(train_r, val_r, config.pipeline)
        results = detect_batch(test, pipeline, threads=config.threads)
        scored = {
            res.id: res.fused for res in results if res.error is None
        }
        human_scores = [
            scored[r.id] for r in test if not r.is_machine and r.id in scored
        ]
        for group in sorted({r.source_model for r in test if r.is_machine}):
            machine_scores = [
                scored[r.id]
                for r in test
                if r.is_machine and r.source_model == group and r.id in scored
            ]
            scores = np.array(machine_scores + human_scores)
            labels = np.array(
                [True] * len(machine_scores) + [False] * len(human_scores)
            )
            rows.append(
                MetricRow(
                    seed=seed,
                    group=group,
                    auroc=auroc(scores, labels),
                    tpr_at_fpr=tpr_at_fpr(scores, labels, config.fpr_budget),
                )
            )
    summary = {}
    for group in sorted({row.group for row in rows}):
        aurocs = np.array([row.auroc for row in rows if row.group == group])
        tprs = np.array([row.tpr_at_fpr for row in rows if row.group == group])
        summary[group] = GroupSummary(
            auroc_mean=float(aurocs.mean()),
            auroc_sd=float(aurocs.std()),
            tpr_mean=float(tprs.mean()),
            tpr_sd=float(tprs.std()),
        )
    return MetricReport(rows=tuple(rows), summary=summary)
