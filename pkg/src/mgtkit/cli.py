"""Command-line entry point: synth / fit / detect / eval / analyze.

Exit codes: 0 success, 1 flag/configuration error, 2 data error. All
diagnostics go to stderr; tabular output goes to stdout or the --out path.
Runs are deterministic given identical flags and inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .calibration import calibrated_token_scores
from .errors import ConfigError, DataError, ValidationError
from .evaluation import (
    DEFAULT_SEEDS,
    ExperimentConfig,
    khop_mad,
    positionwise_mad,
    run_experiment,
    stat_distributions,
)
from .pipeline import (
    PipelineConfig,
    detect_batch,
    fit,
    load_pipeline,
    save_pipeline,
)
from .records import Corpus, TokenScoreRecord, load_corpus, serialize_corpus
from .rules import STAT_NAMES
from .synth import SequenceParams, SynthSpec, synth_corpus


class _Parser(argparse.ArgumentParser):
    # flag errors are configuration errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_pipeline_flags(parser):
    parser.add_argument("--method", required=True, help="detector method name")
    parser.add_argument("--mrf-w", type=float, default=None,
                        help="pairwise weight; omitted: selected on validation")
    parser.add_argument("--mrf-t0", type=int, default=20,
                        help="initial-part length for calibration damping")
    parser.add_argument("--mrf-iters", type=int, default=10,
                        help="mean-field refinement iterations")
    parser.add_argument("--rules-k", type=int, default=10,
                        help="bucket count per statistic")
    parser.add_argument("--rules-t0", type=int, default=20,
                        help="initial-part length for global statistics")
    parser.add_argument("--fusion-lambda", type=float, default=None,
                        help="fusion weight; omitted: selected on validation")
    parser.add_argument("--rules-on-calibrated", action="store_true",
                        help="compute global statistics on calibrated scores")


def _pipeline_config(args) -> PipelineConfig:
    try:
        return PipelineConfig(
            method=args.method,
            iterations=args.mrf_iters,
            mrf_t0=args.mrf_t0,
            rules_t0=args.rules_t0,
            k=args.rules_k,
            w=args.mrf_w,
            fusion_weight=args.fusion_lambda,
            rules_on_calibrated=args.rules_on_calibrated,
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"--seeds must be comma-separated integers: {text!r}") from exc
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    return seeds


def _emit(text: str, out_path):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="mgtkit",
        description=__doc__,
        epilog="Flag values override the built-in defaults shown per flag.",
    )
    parser.add_argument("--version", action="version", version=f"mgtkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic score corpus")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-machine", type=int, default=400)
    p.add_argument("--n-human", type=int, default=400)
    p.add_argument("--len-min", type=int, default=64)
    p.add_argument("--len-max", type=int, default=256)
    p.add_argument("--t0", type=int, default=20)
    for family, defaults in (("machine", (0.9, 0.15, 1.2, 0.0)),
                             ("human", (0.9, 0.55, 1.2, 0.08))):
        ar, late, init, drift = defaults
        p.add_argument(f"--{family}-ar", type=float, default=ar)
        p.add_argument(f"--{family}-late-sd", type=float, default=late)
        p.add_argument(f"--{family}-init-sd", type=float, default=init)
        p.add_argument(f"--{family}-drift-sd", type=float, default=drift)

    p = sub.add_parser("fit", help="fit a detection pipeline")
    p.add_argument("--train", required=True, help="training corpus JSONL")
    p.add_argument("--val", required=True, help="validation corpus JSONL")
    p.add_argument("--model-file", required=True, help="where to write the fitted model")
    _add_pipeline_flags(p)

    p = sub.add_parser("detect", help="score records with a fitted pipeline")
    p.add_argument("--model-file", required=True)
    p.add_argument("--in", dest="input", required=True, help="corpus JSONL to score")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--dump-calibrated", default=None,
                   help="also write calibrated per-token scores as a score file")

    p = sub.add_parser("eval", help="multi-seed split/fit/test experiment")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--train-source", required=True,
                   help="machine source_model used for training")
    p.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS))
    p.add_argument("--fpr-budget", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_pipeline_flags(p)

    p = sub.add_parser("analyze", help="relation-analysis tables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=("khop", "positions", "stats"), required=True)
    p.add_argument("--stream", default="logprob")
    p.add_argument("--hops", default="1,5,10,20,50",
                   help="comma-separated hop sizes (kind=khop)")
    p.add_argument("--t0", type=int, default=20, help="initial-part length (kind=stats)")
    p.add_argument("--out", default=None)

    return parser


def _cmd_synth(args) -> int:
    try:
        spec = SynthSpec(
            n_machine=args.n_machine,
            n_human=args.n_human,
            length_range=(args.len_min, args.len_max),
            machine_params=SequenceParams(
                args.machine_ar, args.machine_late_sd,
                args.machine_init_sd, args.machine_drift_sd,
            ),
            human_params=SequenceParams(
                args.human_ar, args.human_late_sd,
                args.human_init_sd, args.human_drift_sd,
            ),
            t0=args.t0,
            seed=args.seed,
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(serialize_corpus(synth_corpus(spec)), args.out)
    return 0


def _cmd_fit(args) -> int:
    config = _pipeline_config(args)
    train = load_corpus(args.train)
    val = load_corpus(args.val)
    pipeline = fit(train, val, config)
    save_pipeline(pipeline, args.model_file)
    print(
        f"fitted method={pipeline.method.kind} w={pipeline.calib.w[0, 0]!r} "
        f"lambda={pipeline.fusion_weight!r}",
        file=sys.stderr,
    )
    return 0


def _dump_calibrated(corpus: Corpus, pipeline, path) -> None:
    records = []
    for record in corpus:
        try:
            values = calibrated_token_scores(record, pipeline.method, pipeline.calib)
        except DataError:
            continue
        records.append(
            TokenScoreRecord(
                id=record.id,
                label=record.label,
                source_model=record.source_model,
                domain=record.domain,
                streams={"calibrated": values},
            )
        )
    _emit(serialize_corpus(Corpus(tuple(records))), path)


def _cmd_detect(args) -> int:
    pipeline = load_pipeline(args.model_file)
    corpus = load_corpus(args.input)
    results = detect_batch(corpus, pipeline, threads=max(1, args.threads))
    scored = [r for r in results if r.error is None]
    if args.format == "csv":
        lines = ["id,fused,enhanced,rule"]
        lines += [f"{r.id},{r.fused!r},{r.enhanced!r},{r.rule!r}" for r in scored]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        lines = [
            json.dumps({"id": r.id, "fused": r.fused, "enhanced": r.enhanced,
                        "rule": r.rule})
            for r in scored
        ]
        _emit("\n".join(lines) + ("\n" if lines else ""), args.out)
    for r in results:
        if r.error is not None:
            print(f"record {r.id}: {r.error}", file=sys.stderr)
    if args.dump_calibrated:
        _dump_calibrated(corpus, pipeline, args.dump_calibrated)
    return 0


def _cmd_eval(args) -> int:
    config = ExperimentConfig(
        pipeline=_pipeline_config(args),
        train_source=args.train_source,
        seeds=_parse_seeds(args.seeds),
        fpr_budget=args.fpr_budget,
        threads=max(1, args.threads),
    )
    corpus = load_corpus(args.input)
    report = run_experiment(corpus, config)
    _emit(report.to_csv(), args.out)
    return 0


def _cmd_analyze(args) -> int:
    corpus = load_corpus(args.input)
    if args.kind == "khop":
        try:
            hops = [int(h) for h in args.hops.split(",") if h.strip()]
        except ValueError as exc:
            raise ConfigError(f"--hops must be comma-separated integers: {args.hops!r}") from exc
        lines = ["k,mad"]
        lines += [f"{k},{khop_mad(corpus, k, args.stream)!r}" for k in hops]
        _emit("\n".join(lines) + "\n", args.out)
    elif args.kind == "positions":
        mad = positionwise_mad(corpus, args.stream)
        lines = ["t,mad"]
        lines += [f"{t + 1},{value!r}" for t, value in enumerate(mad)]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        rows = stat_distributions(corpus, args.t0, args.stream)
        header = ["id", "label", *STAT_NAMES, "degenerate"]
        lines = [",".join(header)]
        for row in rows:
            cells = [row["id"], row["label"]]
            cells += [repr(row[name]) for name in STAT_NAMES]
            cells.append(str(row["degenerate"]).lower())
            lines.append(",".join(cells))
        _emit("\n".join(lines) + "\n", args.out)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "fit": _cmd_fit,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse help/errors carry the exit code
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mgtkit: configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"mgtkit: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mgtkit: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
