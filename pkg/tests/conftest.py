import math

import numpy as np
import pytest

from deskdlm import ModelConfig, SequenceState, Segment, byte_vocab, init_model
from deskdlm.sequence import SEG_GENERATION, SEG_QUERY

VOCAB = byte_vocab()

# filled by the acceptance suite's report() helper; echoed after the test
# summary so the per-criterion lines show without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def mmr_oracle(query_vec, embeddings, lam):
    """From-scratch greedy ranking oracle: recompute every score at every
    step with pure-python loops and explicit cosine. Deliberately independent
    of the library implementation."""

    def cos(u, v):
        nu = math.sqrt(sum(a * a for a in u))
        nv = math.sqrt(sum(b * b for b in v))
        return sum(a * b for a, b in zip(u, v)) / (nu * nv)

    n = len(embeddings)
    selected = []
    while len(selected) < n:
        best_i, best_score = None, None
        for i in range(n):
            if i in selected:
                continue
            score = lam * cos(query_vec, embeddings[i])
            if selected:
                score -= (1.0 - lam) * max(cos(embeddings[i], embeddings[j]) for j in selected)
            if best_score is None or score > best_score:
                best_i, best_score = i, score
        selected.append(best_i)
    return selected


@pytest.fixture(scope="session")
def tiny_model():
    """Small model for fast unit tests."""
    return init_model(ModelConfig(layers=2, hidden_dim=32, heads=2, max_seq_len=256, seed=11))


@pytest.fixture(scope="session")
def compact_model():
    """Mid-size model used by the heavier decode tests."""
    return init_model(ModelConfig(layers=2, hidden_dim=64, heads=4, max_seq_len=1024, seed=0))


@pytest.fixture(scope="session")
def default_model():
    """The default desk-scale config."""
    return init_model(ModelConfig(seed=0))


def raw_prompt(prompt_len: int, gen_len: int, seed: int = 0, mask_id: int = VOCAB.mask_id):
    """A query-only prompt of random byte tokens followed by masks."""
    rng = np.random.default_rng(seed)
    tokens = np.concatenate(
        [rng.integers(0, 256, prompt_len), np.full(gen_len, mask_id)]
    ).astype(np.int32)
    segments = [Segment(SEG_QUERY, 0, prompt_len)]
    if gen_len:
        segments.append(Segment(SEG_GENERATION, prompt_len, prompt_len + gen_len))
    return SequenceState(tokens, tuple(segments), mask_id)
