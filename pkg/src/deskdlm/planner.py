"""Dynamic in-context planning: decode block-by-block, consulting the
insertion policy at each block boundary and growing the prompt with the next
ranked example when it says to.

The prompt layout is always [examples 1..k ; query ; generated ; masks].
Growing the prompt re-renders the prefix and shifts the generation region;
the tokens generated so far are preserved verbatim (re-masking them would
restart generation and forfeit the speedup the shorter early prompts buy).
Every block still costs exactly one full-recompute call, whether or not an
insertion happened, because the cache must be rebuilt at the boundary anyway.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .cache import BlockKvCache, refresh_cache
from .decoding import DecodeConfig, DecodeResult, StepRecord, _check_complete, _decode_block
from .errors import ConfigError
from .model import MacCounter, ToyDlm
from .policy import ACTION_INSERT, ConfidenceStats, PolicyState, decide, update_stats
from .ranking import ExamplePool, RankedExamples
from .sequence import SEG_EXAMPLE, SEG_GENERATION, SEG_QUERY, Segment, SequenceState
from .vocab import encode_text

EXAMPLE_TEMPLATE = "Q: {question}\nA: {answer}\n\n"
QUERY_TEMPLATE = "Q: {query}\nA:"


def render_example(question: str, answer: str) -> str:
    return EXAMPLE_TEMPLATE.format(question=question, answer=answer)


def render_query(query: str) -> str:
    return QUERY_TEMPLATE.format(query=query)


def build_prompt(
    ranked: RankedExamples,
    pool: ExamplePool,
    k: int,
    query: str,
    gen_len: int,
    mask_id: int,
    max_seq_len: int,
    generated: np.ndarray | None = None,
) -> SequenceState:
    """Assemble [top-k ranked examples ; query ; generated-so-far ; masks].

    `generated` carries previously decoded tokens across a prompt rebuild;
    the remaining gen_len - len(generated) positions start masked.
    """
    if not (1 <= k <= len(ranked.order)):
        raise ConfigError(f"k must be in [1, {len(ranked.order)}], got {k}")
    pieces: list[np.ndarray] = []
    segments: list[Segment] = []
    pos = 0
    for example_id in ranked.order[:k]:
        ex = pool.by_id(example_id)
        toks = encode_text(render_example(ex.question, ex.answer))
        pieces.append(toks)
        segments.append(Segment(SEG_EXAMPLE, pos, pos + len(toks)))
        pos += len(toks)
    qtoks = encode_text(render_query(query))
    pieces.append(qtoks)
    segments.append(Segment(SEG_QUERY, pos, pos + len(qtoks)))
    pos += len(qtoks)

    done = 0 if generated is None else len(generated)
    if done > gen_len:
        raise ConfigError("generated region longer than gen_len")
    gen = np.full(gen_len, mask_id, dtype=np.int32)
    if done:
        gen[:done] = generated
    pieces.append(gen)
    segments.append(Segment(SEG_GENERATION, pos, pos + gen_len))
    pos += gen_len

    if pos > max_seq_len:
        raise ConfigError(f"prompt needs {pos} tokens, exceeding max_seq_len {max_seq_len}")
    return SequenceState(np.concatenate(pieces), tuple(segments), mask_id)


@dataclass
class DipResult(DecodeResult):
    final_k: int = 1
    policy_decisions: list[dict] = field(default_factory=list)


def decode_dip(
    model: ToyDlm,
    ranked: RankedExamples,
    pool: ExamplePool,
    query: str,
    cfg: DecodeConfig,
    epsilon: float,
    rng: np.random.Generator,
    force_action: str | None = None,
    counter: MacCounter | None = None,
) -> DipResult:
    """Decode with a growing prompt: start 1-shot, consult the policy from
    block 2 onward, insert at most one ranked example per boundary."""
    if cfg.refresh_each_step:
        raise ConfigError("diagnostic refresh mode is not meaningful for dip decoding")
    vocab = model.config.vocab
    pool_size = len(ranked.order)
    k = 1
    seq = build_prompt(ranked, pool, k, query, cfg.gen_len, vocab.mask_id, model.config.max_seq_len)
    state = PolicyState(
        total_blocks=cfg.num_blocks,
        epsilon=epsilon,
        lam=ranked.lam,
        k=k,
        pool_size=pool_size,
        rng=rng,
    )
    stats = ConfidenceStats()
    records: list[StepRecord] = []
    trace: list[dict] = []
    warnings: list[str] = []
    decisions: list[dict] = []
    refreshes = 0

    t0 = time.perf_counter()
    for n in range(1, cfg.num_blocks + 1):
        state.n = n
        if n != 1:
            decision = decide(state, stats, force_action)
            decision["block"] = n
            decisions.append(decision)
            trace.append({"event": "policy", "block": n, **decision})
            if decision["action"] == ACTION_INSERT:
                generated_so_far = seq.tokens[seq.prompt_length : seq.prompt_length + (n - 1) * cfg.block_size]
                try:
                    seq = build_prompt(
                        ranked,
                        pool,
                        state.k + 1,
                        query,
                        cfg.gen_len,
                        vocab.mask_id,
                        model.config.max_seq_len,
                        generated=generated_so_far.copy(),
                    )
                    state.k += 1
                    trace.append(
                        {
                            "event": "insert",
                            "block": n,
                            "example_id": ranked.order[state.k - 1],
                            "k": state.k,
                            "prompt_length": seq.prompt_length,
                        }
                    )
                except ConfigError as exc:
                    msg = f"block {n}: insertion skipped ({exc})"
                    warnings.append(msg)
                    trace.append({"event": "insert", "block": n, "skipped": True, "reason": str(exc)})
        s = seq.prompt_length + (n - 1) * cfg.block_size
        e = s + cfg.block_size
        cache: BlockKvCache = refresh_cache(model, seq, (s, e), counter)
        refreshes += 1
        trace.append({"event": "refresh", "block": n, "stamp": cache.stamp, "seq_len": len(seq)})
        block_start = len(records)
        _decode_block(model, seq, (s, e), cfg, n, cache, records, trace, warnings, counter)
        stats = update_stats(stats, records[block_start:])
    wall = (time.perf_counter() - t0) * 1e3
    trace.append(
        {"event": "done", "blocks": cfg.num_blocks, "k": state.k, "wall_ms": wall}
    )
    _check_complete(seq, records, cfg)
    return DipResult(
        sequence=seq,
        records=records,
        refresh_count=refreshes,
        wall_ms=wall,
        trace=trace,
        warnings=warnings,
        final_k=state.k,
        policy_decisions=decisions,
    )


def write_trace(path: str, trace: list[dict]) -> None:
    """One JSON object per line, in event order."""
    with open(path, "w", encoding="utf-8") as f:
        for event in trace:
            f.write(json.dumps(event) + "\n")
