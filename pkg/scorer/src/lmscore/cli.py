"""CLI: read text JSONL, write per-token score streams in the ingestion format.

Skips and truncations are reported on stderr and, when --manifest is given,
collected into a JSON sidecar; the score file itself stays schema-clean.
"""

from __future__ import annotations

import argparse
import json
import sys

from .scoring import (
    ScorerConfig,
    ScorerError,
    SUPPORTED_STREAMS,
    read_texts,
    score_texts,
    write_score_file,
)


def build_parser():
    parser = argparse.ArgumentParser(prog="lmscore", description=__doc__)
    parser.add_argument("--in", dest="input", required=True, help="text JSONL")
    parser.add_argument("--out", required=True, help="score JSONL to write")
    parser.add_argument("--observer", required=True,
                        help="causal LM path or identifier used for scoring")
    parser.add_argument("--performer", default=None,
                        help="second model for cross streams (same tokenizer)")
    parser.add_argument("--streams", default="logprob",
                        help=f"comma-separated subset of {','.join(SUPPORTED_STREAMS)}")
    parser.add_argument("--max-len", type=int, default=512)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--no-bos", action="store_true",
                        help="do not prepend BOS; first token then goes unscored")
    parser.add_argument("--manifest", default=None,
                        help="JSON sidecar for skip/truncation notes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ScorerConfig(
            observer=args.observer,
            performer=args.performer,
            streams=tuple(s.strip() for s in args.streams.split(",") if s.strip()),
            max_length=args.max_len,
            device=args.device,
            batch_size=args.batch_size,
            add_bos=not args.no_bos,
        )
        texts = read_texts(args.input)
        rows, notes = score_texts(config, texts)
    except ScorerError as exc:
        print(f"lmscore: {exc}", file=sys.stderr)
        return 1
    write_score_file(rows, args.out)
    for note in notes:
        print(f"lmscore: {note.event} {note.id}: {note.detail}", file=sys.stderr)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump([note.__dict__ for note in notes], fh, indent=2)
    print(f"lmscore: wrote {len(rows)} records to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
