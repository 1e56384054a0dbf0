"""Decoding loops: full-recompute baseline and block-cached threshold decoding.

Both decoders share the same unmask policy: at each step, every masked
position in the active block whose confidence (max predicted probability)
clears the threshold is unmasked, and the highest-confidence position is
always unmasked so each step makes progress. Token choice is greedy argmax,
which keeps every run reproducible for a fixed seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cache import cached_forward, refresh_cache
from .errors import ConfigError, InvariantViolation
from .model import Logits, MacCounter, ToyDlm, model_forward
from .sequence import SequenceState

METHOD_BASELINE = "baseline"
METHOD_FASTDLLM = "fastdllm"
METHOD_DIP = "dip"
METHODS = (METHOD_BASELINE, METHOD_FASTDLLM, METHOD_DIP)


@dataclass(frozen=True)
class DecodeConfig:
    gen_len: int = 256
    block_size: int = 32
    steps_per_block: int | None = None  # None -> block_size
    tau: float = 0.9
    refresh_each_step: bool = False  # diagnostic: rebuild the cache every step

    def __post_init__(self) -> None:
        if self.gen_len < 1 or self.block_size < 1:
            raise ConfigError("gen_len and block_size must be positive")
        if self.gen_len % self.block_size != 0:
            raise ConfigError(
                f"gen_len {self.gen_len} must be a multiple of block_size {self.block_size}"
            )
        if self.steps_per_block is not None and self.steps_per_block < 1:
            raise ConfigError("steps_per_block must be >= 1")
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")

    @property
    def num_blocks(self) -> int:
        return self.gen_len // self.block_size

    @property
    def steps(self) -> int:
        return self.steps_per_block if self.steps_per_block is not None else self.block_size


@dataclass
class StepRecord:
    block: int  # 1-based block index
    step: int  # 1-based step index within the block
    positions: np.ndarray  # absolute positions unmasked this step
    offsets: np.ndarray  # same positions relative to the generation start
    tokens: np.ndarray
    confidences: np.ndarray  # confidence of each position at unmask time
    wall_ms: float
    forced: bool = False


@dataclass
class DecodeResult:
    sequence: SequenceState
    records: list[StepRecord]
    refresh_count: int
    wall_ms: float  # decode loop only
    trace: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def tokens_generated(self) -> int:
        gen = self.sequence.generation_segment()
        return len(gen) if gen is not None else 0


def unmask_step(logits: Logits, masked_positions, tau: float):
    """Pick the positions to unmask: everything at or above the confidence
    threshold plus the argmax position (ties broken toward the lowest index).

    Returns (positions, chosen tokens, confidences at unmask time).
    """
    masked_positions = np.asarray(masked_positions, dtype=np.int64)
    if masked_positions.size == 0:
        raise ConfigError("unmask_step requires at least one masked position")
    order = {int(p): i for i, p in enumerate(logits.positions)}
    try:
        rows = np.array([order[int(p)] for p in masked_positions])
    except KeyError as exc:
        raise ConfigError(f"no logits for masked position {exc}") from None
    probs = logits.probs[rows]
    conf = probs.max(axis=1)
    pick = conf >= tau
    pick[int(conf.argmax())] = True  # progress guarantee; argmax ties -> lowest index
    tokens = probs[pick].argmax(axis=1).astype(np.int32)
    return masked_positions[pick], tokens, conf[pick]


def _decode_block(
    model: ToyDlm,
    seq: SequenceState,
    window: tuple[int, int],
    cfg: DecodeConfig,
    block_index: int,
    cache,
    records: list[StepRecord],
    trace: list[dict],
    warnings: list[str],
    counter: MacCounter | None = None,
) -> int:
    """Run threshold steps until the block is unmasked. Returns the number of
    extra cache refreshes performed (diagnostic mode only)."""
    s, e = window
    gen_start = s - (block_index - 1) * cfg.block_size
    extra_refreshes = 0
    last_logits: Logits | None = None
    for t in range(1, cfg.steps + 1):
        masked = seq.masked_positions(s, e)
        if masked.size == 0:
            break
        t0 = time.perf_counter()
        if cache is not None:
            if cfg.refresh_each_step and t > 1:
                cache = refresh_cache(model, seq, window, counter)
                extra_refreshes += 1
            logits = cached_forward(model, cache, seq, positions=masked, counter=counter)
        else:
            logits = model_forward(model, seq, positions=masked, counter=counter)
        pos, toks, confs = unmask_step(logits, masked, cfg.tau)
        seq.unmask(pos, toks)
        dt = (time.perf_counter() - t0) * 1e3
        records.append(StepRecord(block_index, t, pos, pos - gen_start, toks, confs, dt))
        trace.append(
            {
                "event": "step",
                "block": block_index,
                "step": t,
                "positions": pos.tolist(),
                "confidences": np.round(confs.astype(float), 6).tolist(),
            }
        )
        last_logits = logits
    else:
        remaining = seq.masked_positions(s, e)
        if remaining.size:
            # Step budget exhausted: never return masked output. Reuse the
            # last step's logits to fill the block greedily.
            if last_logits is None:
                raise InvariantViolation("no step ran but masks remain")
            order = {int(p): i for i, p in enumerate(last_logits.positions)}
            rows = np.array([order[int(p)] for p in remaining])
            probs = last_logits.probs[rows]
            toks = probs.argmax(axis=1).astype(np.int32)
            confs = probs.max(axis=1)
            seq.unmask(remaining, toks)
            records.append(
                StepRecord(
                    block_index, cfg.steps, remaining, remaining - gen_start, toks, confs, 0.0, forced=True
                )
            )
            msg = f"block {block_index}: {remaining.size} positions force-unmasked after {cfg.steps} steps"
            warnings.append(msg)
            trace.append(
                {
                    "event": "step",
                    "block": block_index,
                    "step": cfg.steps,
                    "positions": remaining.tolist(),
                    "confidences": np.round(confs.astype(float), 6).tolist(),
                    "forced": True,
                }
            )
    return extra_refreshes


def _check_prompt(prompt: SequenceState, cfg: DecodeConfig, max_seq_len: int) -> int:
    gen = prompt.generation_segment()
    if gen is None or len(gen) != cfg.gen_len:
        raise ConfigError(
            f"prompt must end with a generation segment of {cfg.gen_len} mask tokens"
        )
    if not prompt.mask_flags[gen.start : gen.end].all():
        raise ConfigError("generation segment must be fully masked at decode start")
    if len(prompt) > max_seq_len:
        raise ConfigError(f"sequence length {len(prompt)} exceeds max_seq_len {max_seq_len}")
    return gen.start


def decode_baseline(
    model: ToyDlm,
    prompt: SequenceState,
    cfg: DecodeConfig,
    rng: np.random.Generator | None = None,
    counter: MacCounter | None = None,
) -> DecodeResult:
    """Reference decoder: every step is a full uncached forward pass.

    `rng` is accepted for interface parity with sampling decoders; greedy
    selection does not consume randomness.
    """
    del rng
    gen_start = _check_prompt(prompt, cfg, model.config.max_seq_len)
    seq = prompt.copy()
    records: list[StepRecord] = []
    trace: list[dict] = []
    warnings: list[str] = []
    t0 = time.perf_counter()
    for n in range(1, cfg.num_blocks + 1):
        s = gen_start + (n - 1) * cfg.block_size
        e = gen_start + n * cfg.block_size
        trace.append({"event": "refresh", "block": n, "seq_len": len(seq), "full_recompute": True})
        _decode_block(model, seq, (s, e), cfg, n, None, records, trace, warnings, counter)
    wall = (time.perf_counter() - t0) * 1e3
    trace.append({"event": "done", "blocks": cfg.num_blocks, "wall_ms": wall})
    _check_complete(seq, records, cfg)
    return DecodeResult(seq, records, cfg.num_blocks, wall, trace, warnings)


def decode_fastdllm(
    model: ToyDlm,
    prompt: SequenceState,
    cfg: DecodeConfig,
    rng: np.random.Generator | None = None,
    counter: MacCounter | None = None,
) -> DecodeResult:
    """Block-cached threshold decoding: one full (non-cached) call per block
    to rebuild the KV cache, then cheap windowed steps until the block_size
    positions are all unmasked."""
    del rng
    gen_start = _check_prompt(prompt, cfg, model.config.max_seq_len)
    seq = prompt.copy()
    records: list[StepRecord] = []
    trace: list[dict] = []
    warnings: list[str] = []
    refreshes = 0
    t0 = time.perf_counter()
    for n in range(1, cfg.num_blocks + 1):
        s = gen_start + (n - 1) * cfg.block_size
        e = gen_start + n * cfg.block_size
        cache = refresh_cache(model, seq, (s, e), counter)
        refreshes += 1
        trace.append({"event": "refresh", "block": n, "stamp": cache.stamp, "seq_len": len(seq)})
        refreshes += _decode_block(
            model, seq, (s, e), cfg, n, cache, records, trace, warnings, counter
        )
    wall = (time.perf_counter() - t0) * 1e3
    trace.append({"event": "done", "blocks": cfg.num_blocks, "wall_ms": wall})
    _check_complete(seq, records, cfg)
    return DecodeResult(seq, records, refreshes, wall, trace, warnings)


def _check_complete(seq: SequenceState, records: list[StepRecord], cfg: DecodeConfig) -> None:
    gen = seq.generation_segment()
    if seq.mask_flags[gen.start : gen.end].any():
        raise InvariantViolation("decode finished with residual masks")
    # offsets are generation-relative, so the partition check survives
    # mid-decode prompt growth
    seen = np.concatenate([r.offsets for r in records]) if records else np.array([])
    if len(seen) != len(gen) or len(np.unique(seen)) != len(gen):
        raise InvariantViolation("step records do not partition the generation segment")
