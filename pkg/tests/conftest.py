import numpy as np
import pytest

from mgtkit.records import Corpus, TokenScoreRecord


def make_record(scores, label="machine", rid="r0", stream="logprob", aux=None, **extra_streams):
    streams = {stream: np.asarray(scores, dtype=float)}
    for name, values in extra_streams.items():
        streams[name] = np.asarray(values, dtype=float)
    return TokenScoreRecord(
        id=rid,
        label=label,
        source_model="synth" if label == "machine" else "human",
        domain="test",
        streams=streams,
        aux_means=aux or {},
    )


def make_corpus(*records):
    return Corpus(tuple(records))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
