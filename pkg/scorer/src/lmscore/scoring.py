"""Teacher-forced per-token score extraction from causal language models.

Each input text is tokenized once with the observer's tokenizer and scored
greedily (no sampling), so outputs are deterministic given the model and
configuration. All streams of one record are aligned to that single
tokenization. Cross-model streams feed the performer the same token ids,
which therefore requires a vocabulary-compatible performer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

OBSERVER_STREAMS = ("logprob", "logrank", "entropy")
CROSS_STREAMS = ("entropy_p", "xent_pq", "logprob_q")
SUPPORTED_STREAMS = OBSERVER_STREAMS + CROSS_STREAMS

_TEXT_FIELDS = ("id", "label", "source_model", "domain", "text")


class ScorerError(Exception):
    pass


@dataclass(frozen=True)
class ScorerConfig:
    """What to load and which streams to extract."""

    observer: str
    performer: str | None = None
    streams: tuple[str, ...] = ("logprob",)
    max_length: int = 512
    device: str = "cpu"
    batch_size: int = 8
    add_bos: bool = True

    def __post_init__(self):
        unknown = set(self.streams) - set(SUPPORTED_STREAMS)
        if unknown:
            raise ScorerError(f"unsupported streams: {sorted(unknown)}")
        if not self.streams:
            raise ScorerError("at least one stream must be requested")
        needs_performer = set(self.streams) & set(CROSS_STREAMS)
        if needs_performer and self.performer is None:
            raise ScorerError(
                f"streams {sorted(needs_performer)} require a performer model"
            )
        if self.max_length < 2:
            raise ScorerError("max_length must be >= 2")


@dataclass(frozen=True)
class TextRecord:
    id: str
    label: str
    source_model: str
    domain: str
    text: str


@dataclass(frozen=True)
class ScoreNote:
    """Diagnostic emitted for skipped or truncated inputs."""

    id: str
    event: str  # "skipped" | "truncated"
    detail: str


def read_texts(path) -> list[TextRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise ScorerError(f"line {lineno}: invalid JSON: {exc}") from exc
            missing = [key for key in _TEXT_FIELDS if key not in obj]
            if missing:
                raise ScorerError(f"line {lineno}: missing fields {missing}")
            records.append(TextRecord(**{key: obj[key] for key in _TEXT_FIELDS}))
    return records


class StreamScorer:
    """Holds loaded models and scores batches of texts."""

    def __init__(self, observer_model, tokenizer, performer_model=None,
                 streams=("logprob",), max_length=512, device="cpu",
                 batch_size=8, add_bos=True):
        self.observer = observer_model.to(device).eval()
        self.performer = performer_model.to(device).eval() if performer_model is not None else None
        self.tokenizer = tokenizer
        self.streams = tuple(streams)
        self.max_length = max_length
        self.device = device
        self.batch_size = max(1, batch_size)
        self.add_bos = add_bos and tokenizer.bos_token_id is not None
        needs_performer = set(self.streams) & set(CROSS_STREAMS)
        if needs_performer and self.performer is None:
            raise ScorerError(f"streams {sorted(needs_performer)} require a performer model")

    @classmethod
    def from_config(cls, config: ScorerConfig) -> "StreamScorer":
        observer = AutoModelForCausalLM.from_pretrained(config.observer)
        tokenizer = AutoTokenizer.from_pretrained(config.observer)
        performer = None
        if config.performer is not None:
            performer = AutoModelForCausalLM.from_pretrained(config.performer)
        return cls(observer, tokenizer, performer_model=performer,
                   streams=config.streams, max_length=config.max_length,
                   device=config.device, batch_size=config.batch_size,
                   add_bos=config.add_bos)

    def _encode(self, text: str):
        ids = self.tokenizer.encode(text, add_special_tokens=False)
        if self.add_bos:
            ids = [self.tokenizer.bos_token_id] + ids
        truncated = len(ids) > self.max_length
        return ids[: self.max_length], truncated

    def _forward(self, model, batch_ids, lengths):
        pad_id = self.tokenizer.pad_token_id
        if pad_id is None:
            pad_id = 0  # masked out, value irrelevant
        width = max(lengths)
        input_ids = torch.full((len(batch_ids), width), pad_id, dtype=torch.long)
        mask = torch.zeros((len(batch_ids), width), dtype=torch.long)
        for row, ids in enumerate(batch_ids):
            input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            mask[row, : len(ids)] = 1
        with torch.no_grad():
            logits = model(input_ids=input_ids.to(self.device),
                           attention_mask=mask.to(self.device)).logits
        return logits.float().cpu()

    def _streams_for(self, logits_obs, logits_perf, ids):
        # positions 0..L-2 predict tokens 1..L-1 of the same tokenization
        targets = torch.tensor(ids[1:], dtype=torch.long)
        rows = logits_obs[: len(ids) - 1]
        logp = torch.log_softmax(rows, dim=-1)
        p = logp.exp()
        realized_logp = logp.gather(1, targets[:, None]).squeeze(1)
        out = {}
        if "logprob" in self.streams:
            out["logprob"] = realized_logp.numpy()
        if "logrank" in self.streams:
            realized_logits = rows.gather(1, targets[:, None])
            ranks = 1 + (rows > realized_logits).sum(dim=1)
            out["logrank"] = np.log(ranks.numpy().astype(float))
        entropy = None
        if "entropy" in self.streams or "entropy_p" in self.streams:
            entropy = -(p * logp).sum(dim=1).numpy()
        if "entropy" in self.streams:
            out["entropy"] = entropy
        if "entropy_p" in self.streams:
            out["entropy_p"] = entropy.copy()
        if logits_perf is not None:
            rows_q = logits_perf[: len(ids) - 1]
            vocab = min(rows.shape[1], rows_q.shape[1])
            logq = torch.log_softmax(rows_q[:, :vocab], dim=-1)
            if "xent_pq" in self.streams:
                # observer-weighted cross term over the shared vocabulary
                out["xent_pq"] = -(p[:, :vocab] * logq).sum(dim=1).numpy()
            if "logprob_q" in self.streams:
                realized_q = logq.gather(1, targets[:, None]).squeeze(1)
                out["logprob_q"] = (realized_logp.exp() * realized_q).numpy()
        return {name: out[name] for name in self.streams}

    def score_records(self, texts):
        """Score texts in input order; returns (score rows, notes).

        Rows are dicts in the downstream ingestion schema. Texts shorter
        than two tokens are skipped with a note; over-long texts are scored
        after truncation and noted.
        """
        rows = []
        notes = []
        batch = []
        needs_performer = bool(set(self.streams) & set(CROSS_STREAMS))
        for record in texts:
            ids, truncated = self._encode(record.text)
            token_count = len(ids) - (1 if self.add_bos else 0)
            if token_count < 2:
                notes.append(ScoreNote(record.id, "skipped",
                                       f"only {token_count} tokens"))
                continue
            if truncated:
                notes.append(ScoreNote(record.id, "truncated",
                                       f"capped at {self.max_length} input tokens"))
            batch.append((record, ids))
            if len(batch) == self.batch_size:
                rows.extend(self._score_batch(batch, needs_performer))
                batch = []
        if batch:
            rows.extend(self._score_batch(batch, needs_performer))
        return rows, notes

    def _score_batch(self, batch, needs_performer):
        lengths = [len(ids) for _, ids in batch]
        logits_obs = self._forward(self.observer, [ids for _, ids in batch], lengths)
        logits_perf = None
        if needs_performer:
            logits_perf = self._forward(self.performer, [ids for _, ids in batch], lengths)
        rows = []
        for row_index, (record, ids) in enumerate(batch):
            perf = logits_perf[row_index] if logits_perf is not None else None
            streams = self._streams_for(logits_obs[row_index], perf, ids)
            rows.append({
                "id": record.id,
                "label": record.label,
                "source_model": record.source_model,
                "domain": record.domain,
                "streams": {k: [float(x) for x in v] for k, v in streams.items()},
            })
        return rows


def score_texts(config: ScorerConfig, texts) -> tuple[list[dict], list[ScoreNote]]:
    """Load models per config and score the given TextRecords."""
    return StreamScorer.from_config(config).score_records(texts)


def write_score_file(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
