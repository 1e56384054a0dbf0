"""Desk-scale masked diffusion LM inference engine.

Core pieces: a seeded toy bidirectional transformer, block-wise KV-cache
decoding with confidence-threshold unmasking, MMR example ranking, and a
planner that grows the in-context prompt during generation.
"""

from .cache import BlockKvCache, cached_forward, refresh_cache
from .decoding import (
    METHOD_BASELINE,
    METHOD_DIP,
    METHOD_FASTDLLM,
    METHODS,
    DecodeConfig,
    DecodeResult,
    StepRecord,
    decode_baseline,
    decode_fastdllm,
    unmask_step,
)
from .errors import ConfigError, DeskDlmError, InvariantViolation, StaleCacheError
from .model import (
    Logits,
    MacCounter,
    ModelConfig,
    ToyDlm,
    init_model,
    load_weights,
    model_forward,
    save_weights,
)
from .planner import DipResult, build_prompt, decode_dip, write_trace
from .policy import (
    ACTION_INSERT,
    ACTION_KEEP,
    ConfidenceStats,
    PolicyState,
    insert_prob,
    sample_action,
    time_penalty,
    update_stats,
)
from .ranking import (
    Example,
    ExamplePool,
    RankedExamples,
    cosine_sim,
    embed_text,
    load_embeddings,
    load_pool,
    mmr_rank,
    resolve_embeddings,
    save_pool,
)
from .sequence import Segment, SequenceState, forward_mask
from .vocab import Vocab, byte_vocab, decode_tokens, encode_text

__version__ = "0.1.0"

__all__ = [
    "ACTION_INSERT",
    "ACTION_KEEP",
    "BlockKvCache",
    "ConfidenceStats",
    "ConfigError",
    "DecodeConfig",
    "DecodeResult",
    "DeskDlmError",
    "DipResult",
    "Example",
    "ExamplePool",
    "InvariantViolation",
    "Logits",
    "MacCounter",
    "METHOD_BASELINE",
    "METHOD_DIP",
    "METHOD_FASTDLLM",
    "METHODS",
    "ModelConfig",
    "PolicyState",
    "RankedExamples",
    "Segment",
    "SequenceState",
    "StaleCacheError",
    "StepRecord",
    "ToyDlm",
    "Vocab",
    "build_prompt",
    "byte_vocab",
    "cached_forward",
    "cosine_sim",
    "decode_baseline",
    "decode_dip",
    "decode_fastdllm",
    "decode_tokens",
    "embed_text",
    "encode_text",
    "forward_mask",
    "init_model",
    "insert_prob",
    "load_embeddings",
    "load_pool",
    "load_weights",
    "mmr_rank",
    "model_forward",
    "refresh_cache",
    "resolve_embeddings",
    "sample_action",
    "save_pool",
    "save_weights",
    "time_penalty",
    "unmask_step",
    "update_stats",
    "write_trace",
]
