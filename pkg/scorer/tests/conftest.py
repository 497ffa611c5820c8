import pytest
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer, GPT2Config, GPT2LMHeadModel

from tinylm import build_tokenizer

SENTENCES = [
    "the quick brown fox jumps over the lazy dog",
    "a small language model scores every token in context",
    "package metadata makes a surprisingly readable corpus",
    "scores are written one json object per line",
    "the observer model assigns a probability to each token",
]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """Random-initialized tiny causal LM saved to disk; no training."""
    out = tmp_path_factory.mktemp("tinylm")
    tokenizer = build_tokenizer(SENTENCES, vocab_size=200)
    torch.manual_seed(7)
    config = GPT2Config(
        vocab_size=tokenizer.vocab_size,
        n_positions=64,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    GPT2LMHeadModel(config).save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def loaded(model_dir):
    model = AutoModelForCausalLM.from_pretrained(model_dir).eval()
    tokenizer = AutoTokenizer.from_pretrained(model_dir)
    return model, tokenizer
