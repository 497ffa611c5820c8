import numpy as np
import pytest

from mgtkit.errors import ValidationError
from mgtkit.records import serialize_corpus
from mgtkit.rules import global_statistics
from mgtkit.synth import (
    DEFAULT_HUMAN_PARAMS,
    DEFAULT_MACHINE_PARAMS,
    SequenceParams,
    SynthSpec,
    default_spec,
    synth_corpus,
)


def small_spec(seed=1, **kwargs):
    return default_spec(seed, n_machine=kwargs.pop("n_machine", 30),
                        n_human=kwargs.pop("n_human", 30), **kwargs)


class TestDeterminism:
    def test_byte_identical(self):
        a = synth_corpus(small_spec())
        b = synth_corpus(small_spec())
        assert serialize_corpus(a) == serialize_corpus(b)

    def test_seed_changes_output(self):
        a = synth_corpus(small_spec(seed=1))
        b = synth_corpus(small_spec(seed=2))
        assert serialize_corpus(a) != serialize_corpus(b)


class TestShape:
    def test_counts_labels_and_stream(self):
        corpus = synth_corpus(small_spec(n_machine=7, n_human=5))
        labels = [r.label for r in corpus]
        assert labels.count("machine") == 7 and labels.count("human") == 5
        assert all(set(r.streams) == {"logprob"} for r in corpus)

    def test_length_bounds(self):
        spec = small_spec(length_range=(40, 60), t0=20)
        corpus = synth_corpus(spec)
        assert all(40 <= r.n <= 60 for r in corpus)


class TestProcess:
    def test_zero_noise_machine_latter_constant(self):
        params = SequenceParams(ar_coefficient=0.0, late_noise_sd=0.0,
                                initial_noise_sd=1.0, drift_sd=0.0)
        spec = small_spec(machine_params=params)
        corpus = synth_corpus(spec)
        for rec in corpus:
            if rec.is_machine:
                late = rec.streams["logprob"][spec.t0:]
                assert np.ptp(late) == 0.0

    def test_machine_latter_variance_below_human(self):
        # direct computation on the generated corpus
        corpus = synth_corpus(default_spec(seed=3))
        per_label = {"machine": [], "human": []}
        for rec in corpus:
            late = rec.streams["logprob"][20:]
            per_label[rec.label].append(late.var())
        assert np.mean(per_label["machine"]) < np.mean(per_label["human"])

    def test_default_families_differ(self):
        assert DEFAULT_MACHINE_PARAMS.late_noise_sd < DEFAULT_HUMAN_PARAMS.late_noise_sd

    def test_statistics_not_degenerate(self):
        spec = small_spec()
        for rec in synth_corpus(spec):
            assert not global_statistics(rec.streams["logprob"], spec.t0).degenerate


class TestValidation:
    def test_bad_counts(self):
        with pytest.raises(ValidationError):
            small_spec(n_machine=0)

    def test_short_lengths(self):
        with pytest.raises(ValidationError):
            small_spec(length_range=(20, 64), t0=20)

    def test_bad_ar(self):
        with pytest.raises(ValidationError):
            SequenceParams(ar_coefficient=1.0, late_noise_sd=0.1,
                           initial_noise_sd=0.1, drift_sd=0.0)

    def test_negative_sd(self):
        with pytest.raises(ValidationError):
            SequenceParams(ar_coefficient=0.5, late_noise_sd=-0.1,
                           initial_noise_sd=0.1, drift_sd=0.0)

    def test_inverted_range(self):
        with pytest.raises(ValidationError):
            SynthSpec(n_machine=1, n_human=1, length_range=(60, 50),
                      machine_params=DEFAULT_MACHINE_PARAMS,
                      human_params=DEFAULT_HUMAN_PARAMS, t0=20, seed=0)
