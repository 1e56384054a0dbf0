"""Token sequences with segment maps and mask bookkeeping.

A sequence is laid out as [example segments...; query segment; generation
segment]. The generation segment starts fully masked and is unmasked in place
by the decoders; the prompt region (everything before the generation segment)
is immutable during decoding except when the planner rebuilds it to insert an
example.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvariantViolation

SEG_EXAMPLE = "example"
SEG_QUERY = "query"
SEG_GENERATION = "generation"

_SEG_ORDER = {SEG_EXAMPLE: 0, SEG_QUERY: 1, SEG_GENERATION: 2}


@dataclass(frozen=True)
class Segment:
    kind: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.kind not in _SEG_ORDER:
            raise ConfigError(f"unknown segment kind {self.kind!r}")
        if not (0 <= self.start < self.end):
            raise ConfigError(f"bad segment bounds ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass
class SequenceState:
    """Token ids plus the segment map and mask flags.

    `mask_flags[i]` is kept equal to `tokens[i] == mask_id` by construction;
    `validate()` asserts it.
    """

    tokens: np.ndarray
    segments: tuple[Segment, ...]
    mask_id: int
    mask_flags: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.tokens = np.asarray(self.tokens, dtype=np.int32)
        if self.mask_flags is None:
            self.mask_flags = self.tokens == self.mask_id
        self.validate()

    def __len__(self) -> int:
        return int(self.tokens.shape[0])

    def validate(self) -> None:
        n = len(self)
        pos = 0
        last_order = -1
        for seg in self.segments:
            if seg.start != pos:
                raise InvariantViolation("segments must partition the sequence")
            order = _SEG_ORDER[seg.kind]
            if order < last_order:
                raise InvariantViolation("segments out of order: " + seg.kind)
            last_order = order
            pos = seg.end
        if pos != n:
            raise InvariantViolation("segments do not cover the whole sequence")
        if not np.array_equal(self.mask_flags, self.tokens == self.mask_id):
            raise InvariantViolation("mask_flags out of sync with tokens")

    # -- segment accessors -------------------------------------------------

    def example_segments(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == SEG_EXAMPLE]

    def query_segment(self) -> Segment | None:
        for s in self.segments:
            if s.kind == SEG_QUERY:
                return s
        return None

    def generation_segment(self) -> Segment | None:
        for s in self.segments:
            if s.kind == SEG_GENERATION:
                return s
        return None

    @property
    def prompt_length(self) -> int:
        """Length of the [examples; query] prefix."""
        gen = self.generation_segment()
        return gen.start if gen is not None else len(self)

    # -- mutation ----------------------------------------------------------

    def copy(self) -> "SequenceState":
        return SequenceState(
            tokens=self.tokens.copy(),
            segments=self.segments,
            mask_id=self.mask_id,
            mask_flags=self.mask_flags.copy(),
        )

    def masked_positions(self, start: int = 0, end: int | None = None) -> np.ndarray:
        end = len(self) if end is None else end
        return np.nonzero(self.mask_flags[start:end])[0] + start

    def unmask(self, positions, token_ids) -> None:
        """Write chosen tokens at masked positions. Never re-masks."""
        positions = np.asarray(positions, dtype=np.int64)
        token_ids = np.asarray(token_ids, dtype=np.int32)
        if not np.all(self.mask_flags[positions]):
            raise InvariantViolation("unmask targeting an already unmasked position")
        if np.any(token_ids == self.mask_id):
            raise InvariantViolation("unmask may not write the mask token")
        self.tokens[positions] = token_ids
        self.mask_flags[positions] = False


def forward_mask(y0: SequenceState, t: float, rng: np.random.Generator) -> SequenceState:
    """Corrupt a sequence: each position independently becomes the mask token
    with probability t. Masked positions stay masked (absorbing state)."""
    if not (0.0 <= t <= 1.0):
        raise ConfigError(f"masking probability t must be in [0, 1], got {t}")
    out = y0.copy()
    hit = rng.random(len(out)) < t
    out.tokens[hit] = out.mask_id
    out.mask_flags[hit] = True
    return out
