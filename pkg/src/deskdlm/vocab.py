"""Byte-level vocabulary: 256 raw byte ids plus four reserved special ids.

Token ids 0..255 are the raw byte values of the UTF-8 encoded text, so any
string round-trips without an external tokenizer. The mask id is the single
absorbing state of the corruption process; pad/bos/sep are reserved and never
appear in sequences built by this engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

N_BYTES = 256


@dataclass(frozen=True)
class Vocab:
    size: int
    mask_id: int
    pad_id: int
    bos_id: int
    sep_id: int

    def __post_init__(self) -> None:
        specials = (self.mask_id, self.pad_id, self.bos_id, self.sep_id)
        if len(set(specials)) != 4:
            raise ConfigError(f"special token ids must be distinct, got {specials}")
        if any(s < 0 or s >= self.size for s in specials):
            raise ConfigError(f"special token ids must lie in [0, {self.size})")
        if self.size <= N_BYTES:
            raise ConfigError("vocab must have room for byte ids plus specials")

    def is_special(self, token_id: int) -> bool:
        return token_id >= N_BYTES


def byte_vocab() -> Vocab:
    """Default vocabulary: bytes 0..255 followed by mask/pad/bos/sep."""
    return Vocab(size=N_BYTES + 4, mask_id=256, pad_id=257, bos_id=258, sep_id=259)


def encode_text(text: str) -> np.ndarray:
    """UTF-8 bytes of `text` as an int32 token array."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.int32)


_SPECIAL_RENDER = {256: "<mask>", 257: "<pad>", 258: "<bos>", 259: "<sep>"}


def decode_tokens(tokens, vocab: Vocab) -> str:
    """Render token ids back to text. Byte runs are decoded as UTF-8 (invalid
    sequences are escaped rather than raised); specials render as tags."""
    out: list[str] = []
    run: list[int] = []

    def flush() -> None:
        if run:
            out.append(bytes(run).decode("utf-8", errors="backslashreplace"))
            run.clear()

    for t in np.asarray(tokens).tolist():
        if 0 <= t < N_BYTES:
            run.append(t)
        else:
            flush()
            out.append(_SPECIAL_RENDER.get(t, f"<id{t}>"))
    flush()
    return "".join(out)
