"""Throughput measurement: shots sweeps, method comparisons, CSV output.

Timing covers the decode loop only (ranking and initial prompt construction
are excluded; mid-decode prompt rebuilds are part of what the planner pays
and stay included). Timed runs execute strictly sequentially.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from .decoding import (
    METHOD_BASELINE,
    METHOD_DIP,
    METHOD_FASTDLLM,
    DecodeConfig,
    decode_baseline,
    decode_fastdllm,
)
from .errors import ConfigError
from .model import ToyDlm
from .planner import build_prompt, decode_dip
from .ranking import Example, ExamplePool, embed_text, mmr_rank

CSV_COLUMNS = [
    "method",
    "shots",
    "lambda",
    "epsilon",
    "tau",
    "block_size",
    "gen_len",
    "seed",
    "tokens_generated",
    "wall_ms",
    "tokens_per_sec",
    "final_example_count",
    "refresh_count",
    "accuracy_proxy",  # no trained model, so no accuracy; kept for schema shape
]


@dataclass
class BenchRow:
    method: str
    shots: int
    lam: float
    epsilon: float | None
    tau: float
    block_size: int
    gen_len: int
    seed: int
    tokens_generated: int
    wall_ms: float
    tokens_per_sec: float
    final_example_count: int
    refresh_count: int
    accuracy_proxy: str = ""

    def as_csv(self) -> list:
        return [
            self.method,
            self.shots,
            f"{self.lam:g}",
            "" if self.epsilon is None else f"{self.epsilon:g}",
            f"{self.tau:g}",
            self.block_size,
            self.gen_len,
            self.seed,
            self.tokens_generated,
            f"{self.wall_ms:.3f}",
            f"{self.tokens_per_sec:.3f}",
            self.final_example_count,
            self.refresh_count,
            self.accuracy_proxy,
        ]


def write_csv(path: str, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def measure_throughput(run, repeats: int = 5, warmup: int = 1):
    """Median-of-repeats timing of a decode closure.

    The closure re-runs the full decode (deterministic, so repeated token
    output is identical); its result's wall_ms covers the decode loop only.
    Returns (median wall_ms, last result).
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    for _ in range(warmup):
        run()
    walls = []
    result = None
    for _ in range(repeats):
        result = run()
        walls.append(result.wall_ms)
    return float(np.median(walls)), result


def spearman(xs, ys) -> float | None:
    """Rank correlation; None when fewer than two points."""
    if len(xs) < 2:
        return None
    rho = scipy_stats.spearmanr(xs, ys).statistic
    return float(rho)


def drift_probe(model: ToyDlm, prompt, cfg: DecodeConfig) -> float:
    """Worst relative deviation between cached-step and full-recompute
    distributions over the first block of a threshold decode.

    Within a block the frozen cache is an approximation; this quantifies it
    (untimed, diagnostic only).
    """
    from .cache import cached_forward, refresh_cache
    from .decoding import unmask_step
    from .model import model_forward

    seq = prompt.copy()
    s = seq.prompt_length
    e = s + cfg.block_size
    cache = refresh_cache(model, seq, (s, e))
    worst = 0.0
    for _ in range(cfg.steps):
        masked = seq.masked_positions(s, e)
        if masked.size == 0:
            break
        cached = cached_forward(model, cache, seq, positions=masked)
        full = model_forward(model, seq, positions=masked)
        denom = np.maximum(np.abs(full.probs), 1e-12)
        worst = max(worst, float((np.abs(cached.probs - full.probs) / denom).max()))
        pos, toks, _ = unmask_step(cached, masked, cfg.tau)
        seq.unmask(pos, toks)
    return worst


# -- synthetic inputs ---------------------------------------------------------

_TEMPLATE_OVERHEAD = len("Q: \nA: \n\n")  # rendered example bytes beyond q + a
_QUERY_OVERHEAD = len("Q: \nA:")

# Shared lexicon so synthetic questions overlap: hashed bag-of-words
# similarities between them (and a synthetic query) are then informative
# instead of uniformly near zero.
_LEXICON = (
    "train speed ratio sum count apples pencils marbles garden fence paint "
    "liters miles hours price cost total shares piles rows cols books pages "
    "water tank fills drains rate crew builds walls bricks farm cows hens "
    "eggs crates boxes weight grams scale trip fuel tickets seats rooms "
    "plants seeds grows days weeks profit sells buys earns spends saves"
).split()


def _word_soup(rng: np.random.Generator, n_bytes: int) -> str:
    parts: list[str] = []
    joined_len = -1  # length of " ".join(parts)
    while joined_len < n_bytes:
        w = _LEXICON[int(rng.integers(0, len(_LEXICON)))]
        if rng.random() < 0.25:
            w = w + str(int(rng.integers(0, 100)))
        parts.append(w)
        joined_len += len(w) + 1
    return " ".join(parts)[:n_bytes]


def synthetic_pool(
    size: int,
    example_len: int = 64,
    seed: int = 0,
    embed_dim: int = 256,
) -> ExamplePool:
    """Seeded pool of fixed-length examples (rendered length = example_len
    tokens) with hashed question embeddings."""
    if example_len <= _TEMPLATE_OVERHEAD + 4:
        raise ConfigError(f"example_len must exceed {_TEMPLATE_OVERHEAD + 4}")
    body = example_len - _TEMPLATE_OVERHEAD
    q_len = body // 2
    a_len = body - q_len
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(size):
        q = _word_soup(rng, q_len)
        a = _word_soup(rng, a_len)
        examples.append(Example(id=f"ex{i:03d}", question=q, answer=a, embedding=embed_text(q, embed_dim)))
    return ExamplePool(examples)


def synthetic_query(seed: int, length: int = 24) -> str:
    return _word_soup(np.random.default_rng(seed + 10_000), length)


# -- sweeps -------------------------------------------------------------------


@dataclass
class SweepResult:
    rows: list[BenchRow] = field(default_factory=list)
    spearman_rho: float | None = None
    skipped: list[tuple[int, str]] = field(default_factory=list)
    cache_drift: float | None = None


def _collect_trace(sink: list | None, res, **meta) -> None:
    if sink is not None:
        sink.extend({**meta, **event} for event in res.trace)


def sweep_shots(
    model: ToyDlm,
    pool: ExamplePool,
    query: str,
    cfg: DecodeConfig,
    shots: list[int],
    lam: float = 0.1,
    seed: int = 0,
    repeats: int = 5,
    trace_events: list | None = None,
) -> SweepResult:
    """Static k-shot prompts decoded with the block-cached method, one row per
    shot count, plus the rank correlation between shots and throughput."""
    ranked = mmr_rank(embed_text(query), pool, lam)
    result = SweepResult()
    vocab = model.config.vocab
    for k in shots:
        try:
            prompt = build_prompt(
                ranked, pool, k, query, cfg.gen_len, vocab.mask_id, model.config.max_seq_len
            )
        except ConfigError as exc:
            result.skipped.append((k, str(exc)))
            continue

        def run():
            return decode_fastdllm(model, prompt, cfg)

        wall_ms, res = measure_throughput(run, repeats=repeats)
        if result.cache_drift is None:
            result.cache_drift = drift_probe(model, prompt, cfg)
        _collect_trace(trace_events, res, method=METHOD_FASTDLLM, shots=k, seed=seed)
        result.rows.append(
            BenchRow(
                method=METHOD_FASTDLLM,
                shots=k,
                lam=lam,
                epsilon=None,
                tau=cfg.tau,
                block_size=cfg.block_size,
                gen_len=cfg.gen_len,
                seed=seed,
                tokens_generated=res.tokens_generated,
                wall_ms=wall_ms,
                tokens_per_sec=res.tokens_generated / (wall_ms / 1e3),
                final_example_count=k,
                refresh_count=res.refresh_count,
            )
        )
    result.spearman_rho = spearman(
        [r.shots for r in result.rows], [r.tokens_per_sec for r in result.rows]
    )
    return result


def compare_methods(
    model: ToyDlm,
    pool: ExamplePool,
    queries: list[tuple[int, str]],
    cfg: DecodeConfig,
    lam_values: list[float],
    eps_values: list[float],
    methods: list[str] | None = None,
    shots: int | None = None,
    repeats: int = 1,
    trace_events: list | None = None,
) -> list[BenchRow]:
    """Rows for each (method, query); the planner gets one row per (lambda,
    epsilon) combination, which is how the parameter-grid tables are produced.
    All methods see the same queries, seeds, and decode config.
    """
    methods = methods or [METHOD_BASELINE, METHOD_FASTDLLM, METHOD_DIP]
    for m in methods:
        if m not in (METHOD_BASELINE, METHOD_FASTDLLM, METHOD_DIP):
            raise ConfigError(f"unknown method {m!r}")
    if not queries:
        raise ConfigError("compare_methods needs at least one query")
    k_static = shots if shots is not None else pool.size
    vocab = model.config.vocab
    rows: list[BenchRow] = []

    # one untimed warm-up so thread pools and allocators are primed
    warm_ranked = mmr_rank(embed_text(queries[0][1]), pool, lam_values[0])
    warm_prompt = build_prompt(
        warm_ranked, pool, 1, queries[0][1], cfg.gen_len, vocab.mask_id, model.config.max_seq_len
    )
    decode_fastdllm(model, warm_prompt, cfg)

    for seed, query in queries:
        qvec = embed_text(query)
        for lam in lam_values:
            ranked = mmr_rank(qvec, pool, lam)
            static_prompt = build_prompt(
                ranked, pool, k_static, query, cfg.gen_len, vocab.mask_id, model.config.max_seq_len
            )
            for method in methods:
                if method == METHOD_BASELINE:
                    runs = [(None, lambda: decode_baseline(model, static_prompt, cfg))]
                elif method == METHOD_FASTDLLM:
                    runs = [(None, lambda: decode_fastdllm(model, static_prompt, cfg))]
                else:
                    runs = [
                        (
                            eps,
                            lambda eps=eps: decode_dip(
                                model,
                                ranked,
                                pool,
                                query,
                                cfg,
                                eps,
                                np.random.default_rng(seed),
                            ),
                        )
                        for eps in eps_values
                    ]
                for eps, run in runs:
                    wall_ms, res = measure_throughput(run, repeats=repeats, warmup=0)
                    _collect_trace(
                        trace_events, res, method=method, seed=seed, lam=lam, epsilon=eps
                    )
                    rows.append(
                        BenchRow(
                            method=method,
                            shots=k_static if method != METHOD_DIP else 1,
                            lam=lam,
                            epsilon=eps,
                            tau=cfg.tau,
                            block_size=cfg.block_size,
                            gen_len=cfg.gen_len,
                            seed=seed,
                            tokens_generated=res.tokens_generated,
                            wall_ms=wall_ms,
                            tokens_per_sec=res.tokens_generated / (wall_ms / 1e3),
                            final_example_count=getattr(res, "final_k", k_static),
                            refresh_count=res.refresh_count,
                        )
                    )
    return rows


def mean_tps(rows: list[BenchRow], method: str, epsilon: float | None = None) -> float:
    vals = [
        r.tokens_per_sec
        for r in rows
        if r.method == method and (epsilon is None or r.epsilon == epsilon)
    ]
    if not vals:
        raise ConfigError(f"no rows for method {method} epsilon {epsilon}")
    return float(np.mean(vals))
