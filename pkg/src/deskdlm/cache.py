"""Block-wise KV cache: freeze keys/values outside the active window.

A refresh is a full forward pass over the current sequence that records every
layer's keys and values. Within the block, cached calls recompute queries,
keys and values for the window only and read everything else from the cache —
the frozen entries are *not* updated as window tokens unmask, which is the
approximation that makes cached steps cheap.

Staleness is enforced by checksumming the out-of-window tokens at refresh
time; any mutation of the cached region (or a length change) raises on use
instead of silently corrupting a run.
"""
from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StaleCacheError
from .model import Logits, MacCounter, ToyDlm, full_hidden, project_vocab, window_hidden
from .sequence import SequenceState

_refresh_ids = itertools.count(1)


def _outside_checksum(tokens: np.ndarray, s: int, e: int) -> int:
    crc = zlib.crc32(np.ascontiguousarray(tokens[:s]).tobytes())
    return zlib.crc32(np.ascontiguousarray(tokens[e:]).tobytes(), crc)


@dataclass
class BlockKvCache:
    """Per-layer key/value buffers for one decode session.

    The buffers span the full sequence; entries outside `window` are the
    frozen refresh-time values, while the window slice is scratch space that
    every cached call overwrites before reading.
    """

    window: tuple[int, int]
    seq_len: int
    stamp: int
    outside_crc: int
    k_bufs: list[np.ndarray]
    v_bufs: list[np.ndarray]

    def check(self, seq: SequenceState) -> None:
        if len(seq) != self.seq_len:
            raise StaleCacheError(
                f"cache built for length {self.seq_len}, sequence is {len(seq)}"
            )
        s, e = self.window
        if _outside_checksum(seq.tokens, s, e) != self.outside_crc:
            raise StaleCacheError("tokens in the cached region changed since refresh")


def refresh_cache(
    model: ToyDlm,
    seq: SequenceState,
    window: tuple[int, int],
    counter: MacCounter | None = None,
) -> BlockKvCache:
    """Full (non-cached) forward pass recording K/V for all positions.

    This is the once-per-block full call; its cost is the hook the planner
    exploits to change the prompt cheaply between blocks.
    """
    s, e = window
    n = len(seq)
    if not (0 <= s < e <= n):
        raise ConfigError(f"window ({s}, {e}) out of bounds for length {n}")
    if n > model.config.max_seq_len:
        raise ConfigError(f"sequence length {n} exceeds max_seq_len")
    _, kv = full_hidden(model, seq.tokens, counter, collect_kv=True)
    k_bufs = [k.copy() for k, _ in kv]
    v_bufs = [v.copy() for _, v in kv]
    return BlockKvCache(
        window=(s, e),
        seq_len=n,
        stamp=next(_refresh_ids),
        outside_crc=_outside_checksum(seq.tokens, s, e),
        k_bufs=k_bufs,
        v_bufs=v_bufs,
    )


def cached_forward(
    model: ToyDlm,
    cache: BlockKvCache,
    seq: SequenceState,
    positions=None,
    counter: MacCounter | None = None,
) -> Logits:
    """Distributions over the active window using the frozen cache.

    Queries (and fresh K/V) are computed only for window positions;
    `positions` may restrict the returned rows to a subset of the window.
    """
    cache.check(seq)
    s, e = cache.window
    if positions is None:
        positions = np.arange(s, e, dtype=np.int64)
    else:
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size and (positions.min() < s or positions.max() >= e):
            raise ConfigError("cached_forward positions must lie inside the active window")
    hw = window_hidden(model, seq.tokens, (s, e), cache.k_bufs, cache.v_bufs, counter)
    return project_vocab(model, hw[positions - s], positions, counter)
