"""End-to-end acceptance: score a real corpus with a small causal LM and
verify the downstream detection toolkit is consumed purely through its
command line and file formats.

The corpus is 220 human texts of public package-description prose plus 220
machine texts sampled from a small LM trained on a disjoint slice of the
same prose; the same LM scores both sets. Release bars: across seeds 1-5
the fused pipeline's test AUROC must not fall more than 0.01 below the
plain mean-log-probability detector, and machine texts must show a lower
median latter-part score variance than human texts.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from lmscore import ScorerConfig, StreamScorer, TextRecord
from lmscore.scoring import write_score_file

from tinylm import harvest_paragraphs, sample_texts, train_tiny_lm

WORDS_PER_TEXT = 120
N_TRAIN_LM = 330
N_PER_CLASS = 220
EPOCHS = 36
TEMPERATURE = 0.8
MAX_NEW_TOKENS = 120
SEQ_CAP = 160
SEEDS = (1, 2, 3, 4, 5)

pytestmark = pytest.mark.slow


def primary(*args):
    result = subprocess.run(
        [sys.executable, "-m", "mgtkit.cli", *args],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, f"mgtkit {args[0]} failed: {result.stderr}"
    return result.stdout


def pair_auroc(machine_scores, human_scores):
    m = np.asarray(machine_scores, float)
    h = np.asarray(human_scores, float)
    wins = (m[:, None] > h[None, :]).sum()
    ties = (m[:, None] == h[None, :]).sum()
    return (wins + 0.5 * ties) / (m.size * h.size)


@pytest.fixture(scope="module")
def scored_corpus(tmp_path_factory):
    """Train the LM, build the corpus, score it; one setup for all checks."""
    work = tmp_path_factory.mktemp("e2e")
    texts = harvest_paragraphs(words_per_text=WORDS_PER_TEXT, max_texts=2000)
    assert len(texts) >= N_TRAIN_LM + N_PER_CLASS, "not enough local prose"
    model_dir = str(work / "model")
    train_tiny_lm(texts[:N_TRAIN_LM], model_dir, epochs=EPOCHS, n_positions=SEQ_CAP)
    machine = sample_texts(model_dir, N_PER_CLASS, max_new_tokens=MAX_NEW_TOKENS,
                           temperature=TEMPERATURE)
    human = texts[N_TRAIN_LM:N_TRAIN_LM + N_PER_CLASS]
    records = [
        TextRecord(id=f"m{i}", label="machine", source_model="tinylm",
                   domain="pkgdocs", text=text)
        for i, text in enumerate(machine)
    ]
    records += [
        TextRecord(id=f"h{i}", label="human", source_model="human",
                   domain="pkgdocs", text=text)
        for i, text in enumerate(human)
    ]
    scorer = StreamScorer.from_config(
        ScorerConfig(observer=model_dir, streams=("logprob",), max_length=SEQ_CAP))
    rows, notes = scorer.score_records(records)
    assert len(rows) >= 2 * (N_PER_CLASS - 5)  # at most a few skips tolerated
    score_file = work / "scores.jsonl"
    write_score_file(rows, score_file)
    return work, rows, score_file


def stratified_split(rows, seed):
    rng = np.random.default_rng(seed)
    parts = {"train": [], "val": [], "test": []}
    for label in ("machine", "human"):
        group = [r for r in rows if r["label"] == label]
        order = rng.permutation(len(group))
        n = len(group)
        n_train = int(0.10 * n)
        n_val = (n - n_train) // 2
        for j, idx in enumerate(order):
            part = "train" if j < n_train else ("val" if j < n_train + n_val else "test")
            parts[part].append(group[idx])
    return parts


class TestEndToEnd:
    def test_fused_pipeline_does_not_degrade(self, scored_corpus):
        work, rows, _ = scored_corpus
        diffs = []
        for seed in SEEDS:
            parts = stratified_split(rows, seed)
            paths = {}
            for part, subset in parts.items():
                paths[part] = work / f"{part}-{seed}.jsonl"
                write_score_file(subset, paths[part])
            model_file = work / f"pipeline-{seed}.json"
            primary("fit", "--train", str(paths["train"]), "--val", str(paths["val"]),
                    "--method", "likelihood", "--model-file", str(model_file))
            detect_csv = work / f"detected-{seed}.csv"
            primary("detect", "--model-file", str(model_file),
                    "--in", str(paths["test"]), "--out", str(detect_csv))
            fused = {}
            for line in detect_csv.read_text().splitlines()[1:]:
                cells = line.split(",")
                fused[cells[0]] = float(cells[1])
            machine_ids = [r["id"] for r in parts["test"] if r["label"] == "machine"]
            human_ids = [r["id"] for r in parts["test"] if r["label"] == "human"]
            fused_auc = pair_auroc([fused[i] for i in machine_ids],
                                   [fused[i] for i in human_ids])
            base_auc = pair_auroc(
                [np.mean(r["streams"]["logprob"][1:]) for r in parts["test"]
                 if r["label"] == "machine"],
                [np.mean(r["streams"]["logprob"][1:]) for r in parts["test"]
                 if r["label"] == "human"],
            )
            diffs.append(fused_auc - base_auc)
            print(f"[E2E] seed {seed}: fused AUROC {fused_auc:.4f} "
                  f"base AUROC {base_auc:.4f} diff {fused_auc - base_auc:+.4f}")
        assert min(diffs) >= -0.01, f"per-seed degradation: {diffs}"
        assert float(np.mean(diffs)) >= -0.01
        print(f"[E2E] PASS non-degradation (mean diff {np.mean(diffs):+.4f})")

    def test_latter_part_variance_gap_reproduces(self, scored_corpus):
        _, _, score_file = scored_corpus
        out = primary("analyze", "--in", str(score_file), "--kind", "stats")
        lines = out.splitlines()
        header = lines[0].split(",")
        label_col = header.index("label")
        var_col = header.index("var_late")
        degenerate_col = header.index("degenerate")
        by_label = {"machine": [], "human": []}
        for line in lines[1:]:
            cells = line.split(",")
            if cells[degenerate_col] == "true":
                continue
            by_label[cells[label_col]].append(float(cells[var_col]))
        machine_median = np.median(by_label["machine"])
        human_median = np.median(by_label["human"])
        assert machine_median < human_median
        print(f"[E2E] PASS variance gap (machine median {machine_median:.3f} "
              f"< human median {human_median:.3f})")

    def test_score_file_is_directly_usable_by_primary_eval(self, scored_corpus):
        work, _, score_file = scored_corpus
        report = work / "report.csv"
        primary("eval", "--in", str(score_file), "--method", "likelihood",
                "--train-source", "tinylm", "--seeds", "1",
                "--mrf-w", "1.0", "--fusion-lambda", "1.0", "--out", str(report))
        lines = report.read_text().splitlines()
        assert lines[0] == "seed,group,auroc,tpr_at_fpr"
        data = [line for line in lines[1:] if line.startswith("1,tinylm")]
        assert len(data) == 1
        auroc_value = float(data[0].split(",")[2])
        assert 0.0 <= auroc_value <= 1.0
