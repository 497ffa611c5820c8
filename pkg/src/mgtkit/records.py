"""Corpus data model: per-token score records, JSONL ingestion, normalization.

One record holds every per-token score stream extracted for a single text,
plus optional per-sample aggregated auxiliary scores (e.g. mean scores of
perturbed or regenerated variants). Records are immutable after parsing and
all operations here are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

# Closed registry: unknown stream names are rejected at parse time so typos
# surface early. "calibrated" is the name used when dumping calibrated
# per-token scores back into this same file format.
STREAM_NAMES = frozenset({
    "logprob",
    "logrank",
    "entropy",
    "entropy_p",
    "xent_pq",
    "logprob_q",
    "ideal_logprob",
    "calibrated",
})

LABELS = ("human", "machine")

_RECORD_FIELDS = {"id", "label", "source_model", "domain", "streams", "aux_means"}


def _as_finite_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{what} must be a flat list of numbers")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TokenScoreRecord:
    """One text's label, provenance and named per-token score streams."""

    id: str
    label: str
    source_model: str
    domain: str
    streams: dict[str, np.ndarray]
    aux_means: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(
                f"record {self.id!r}: label must be one of {LABELS}, got {self.label!r}"
            )
        if not self.streams:
            raise ValidationError(f"record {self.id!r}: at least one stream required")
        lengths = set()
        streams = {}
        for name, values in self.streams.items():
            if name not in STREAM_NAMES:
                raise ValidationError(
                    f"record {self.id!r}: unknown stream name {name!r}"
                )
            vec = _as_finite_vector(values, f"record {self.id!r} stream {name!r}")
            if vec.size < 1:
                raise ValidationError(
                    f"record {self.id!r}: stream {name!r} must have length >= 1"
                )
            streams[name] = vec
            lengths.add(vec.size)
        if len(lengths) != 1:
            raise ValidationError(
                f"record {self.id!r}: stream lengths differ: {sorted(lengths)}"
            )
        aux = {}
        for name, values in self.aux_means.items():
            vec = _as_finite_vector(values, f"record {self.id!r} aux {name!r}")
            if vec.size < 2:
                raise ValidationError(
                    f"record {self.id!r}: aux_means {name!r} needs >= 2 entries"
                )
            aux[name] = vec
        object.__setattr__(self, "streams", streams)
        object.__setattr__(self, "aux_means", aux)

    @property
    def n(self) -> int:
        """Common length of all streams."""
        return next(iter(self.streams.values())).size

    @property
    def is_machine(self) -> bool:
        return self.label == "machine"

    def to_json(self) -> str:
        obj = {
            "id": self.id,
            "label": self.label,
            "source_model": self.source_model,
            "domain": self.domain,
            "streams": {k: v.tolist() for k, v in self.streams.items()},
        }
        if self.aux_means:
            obj["aux_means"] = {k: v.tolist() for k, v in self.aux_means.items()}
        return json.dumps(obj)


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of records with unique ids."""

    records: tuple[TokenScoreRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValidationError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def labels(self) -> np.ndarray:
        """Boolean vector, True where the record is machine-labelled."""
        return np.array([r.is_machine for r in self.records], dtype=bool)

    def subset(self, keep) -> "Corpus":
        """New corpus of the records for which ``keep(record)`` is true."""
        return Corpus(tuple(r for r in self.records if keep(r)))


@dataclass(frozen=True)
class UnaryProbabilities:
    """Per-token scores normalized into [0, 1]."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        if arr.size < 1 or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("unary probabilities must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    def __len__(self) -> int:
        return self.p.size


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token!r} not allowed")


def _record_from_obj(obj: dict) -> TokenScoreRecord:
    if not isinstance(obj, dict):
        raise ValidationError("record must be a JSON object")
    unknown = set(obj) - _RECORD_FIELDS
    if unknown:
        raise ValidationError(f"unknown top-level fields: {sorted(unknown)}")
    missing = {"id", "label", "source_model", "domain", "streams"} - set(obj)
    if missing:
        raise ValidationError(f"missing required fields: {sorted(missing)}")
    for key in ("id", "label", "source_model", "domain"):
        if not isinstance(obj[key], str):
            raise ValidationError(f"field {key!r} must be a string")
    if not isinstance(obj["streams"], dict):
        raise ValidationError("field 'streams' must be an object")
    aux = obj.get("aux_means", {})
    if not isinstance(aux, dict):
        raise ValidationError("field 'aux_means' must be an object")
    return TokenScoreRecord(
        id=obj["id"],
        label=obj["label"],
        source_model=obj["source_model"],
        domain=obj["domain"],
        streams=obj["streams"],
        aux_means=aux,
    )


def parse_corpus(text: str) -> Corpus:
    """Parse line-delimited JSON records into a Corpus.

    Blank lines are skipped. Any malformed or invariant-violating line
    raises with its 1-based line number; non-finite numbers are rejected.
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except ValueError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc}") from exc
        try:
            records.append(_record_from_obj(obj))
        except ValidationError as exc:
            raise ParseError(lineno, str(exc)) from exc
    return Corpus(tuple(records))


def serialize_corpus(corpus: Corpus) -> str:
    """Inverse of parse_corpus; one JSON object per line."""
    return "".join(rec.to_json() + "\n" for rec in corpus)


def load_corpus(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh.read())


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_corpus(corpus))


def normalize_scores(scores) -> UnaryProbabilities:
    """Min-max normalize one sequence of detection scores into [0, 1].

    Normalization is per sequence, not corpus-wide, since the calibration
    stage treats each text independently. A constant sequence maps to the
    neutral value 0.5 everywhere.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError("scores must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("scores contain non-finite values")
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return UnaryProbabilities(np.full(arr.shape, 0.5))
    return UnaryProbabilities((arr - lo) / (hi - lo))
