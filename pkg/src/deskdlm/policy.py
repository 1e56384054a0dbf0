"""Example-insertion policy: decide at each block boundary whether to grow
the prompt with the next ranked example.

The decision combines a progress penalty (late insertions are cheaper, so
early ones are suppressed) with the ratio of current-block confidence to the
running confidence of everything generated so far, and draws a Bernoulli
action from the product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoding import StepRecord
from .errors import ConfigError

ACTION_INSERT = "insert"
ACTION_KEEP = "keep"


@dataclass(frozen=True)
class ConfidenceStats:
    """Means of confidences recorded at unmask time.

    `block_mean` covers the most recently finished block; `running_mean`
    covers every generated token so far (the current block included).
    """

    block_mean: float = 0.0
    running_mean: float = 0.0
    block_count: int = 0
    total_count: int = 0
    total_sum: float = 0.0

    @property
    def ready(self) -> bool:
        return self.total_count > 0


@dataclass
class PolicyState:
    total_blocks: int
    epsilon: float
    lam: float
    k: int  # examples currently in context
    pool_size: int
    rng: np.random.Generator
    n: int = 1  # index of the current full (non-cached) call, 1-based

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not (1 <= self.k <= self.pool_size):
            raise ConfigError("need 1 <= k <= pool size")


def time_penalty(n: int, total: int, epsilon: float) -> float:
    """Progress penalty in [1 - epsilon, 1]: grows linearly with the index of
    the current full-recompute call, reaching 1 at the final block."""
    if total < 1:
        raise ConfigError("total block count must be >= 1")
    if not (0 <= n <= total):
        raise ConfigError(f"call index {n} outside [0, {total}]")
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
    return (1.0 - epsilon) + epsilon * (n / total)


def insert_prob(mu: float, mu_bar: float) -> float:
    """Raw insertion probability (1 - mu) / (2 (1 - mu_bar)), clamped to
    [0, 1]. A block less confident than the running average pushes the value
    above the 1/2 baseline."""
    if not (0.0 <= mu <= 1.0) or not (0.0 <= mu_bar <= 1.0):
        raise ConfigError("confidence means must lie in [0, 1]")
    if mu_bar == 1.0:
        # Fully confident history: the ratio degenerates; only an equally
        # perfect block argues against inserting.
        return 0.0 if mu == 1.0 else 1.0
    raw = (1.0 - mu) / (2.0 * (1.0 - mu_bar))
    return min(1.0, max(0.0, raw))


def sample_action(p_insert: float, penalty: float, rng: np.random.Generator) -> str:
    """Bernoulli draw: insert with probability clamp(p_insert * penalty)."""
    if not (0.0 <= p_insert <= 1.0) or not (0.0 <= penalty <= 1.0):
        raise ConfigError("p_insert and penalty must lie in [0, 1]")
    p = min(1.0, max(0.0, p_insert * penalty))
    if p == 0.0:
        return ACTION_KEEP
    if p == 1.0:
        return ACTION_INSERT
    return ACTION_INSERT if rng.random() < p else ACTION_KEEP


def update_stats(stats: ConfidenceStats, block_records: list[StepRecord]) -> ConfidenceStats:
    """Fold one finished block's unmask-time confidences into the stats."""
    confs = (
        np.concatenate([r.confidences for r in block_records])
        if block_records
        else np.array([])
    )
    if confs.size == 0:
        raise ConfigError("cannot update confidence stats from an empty block")
    block_sum = float(confs.sum())
    total_sum = stats.total_sum + block_sum
    total_count = stats.total_count + confs.size
    return ConfidenceStats(
        block_mean=block_sum / confs.size,
        running_mean=total_sum / total_count,
        block_count=int(confs.size),
        total_count=total_count,
        total_sum=total_sum,
    )


def decide(state: PolicyState, stats: ConfidenceStats, force_action: str | None = None) -> dict:
    """One block-boundary decision. Returns an audit record with the action.

    With the pool exhausted the policy keeps unconditionally; a forced action
    (test hook) bypasses the Bernoulli draw but still reports probabilities.
    """
    if not stats.ready:
        raise ConfigError("policy consulted before any block finished")
    p_ins = insert_prob(stats.block_mean, stats.running_mean)
    penalty = time_penalty(state.n, state.total_blocks, state.epsilon)
    exhausted = state.k >= state.pool_size
    if exhausted:
        action = ACTION_KEEP
    elif force_action is not None:
        if force_action not in (ACTION_INSERT, ACTION_KEEP):
            raise ConfigError(f"unknown forced action {force_action!r}")
        action = force_action
    else:
        action = sample_action(p_ins, penalty, state.rng)
    return {
        "mu": stats.block_mean,
        "mu_bar": stats.running_mean,
        "p_insert": p_ins,
        "penalty": penalty,
        "p_action": min(1.0, max(0.0, p_ins * penalty)),
        "action": action,
        "pool_exhausted": exhausted,
        "n": state.n,
    }
