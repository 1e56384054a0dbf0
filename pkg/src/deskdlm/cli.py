"""Command-line entry point: rank / decode / bench subcommands.

Thin client over the core package; all work happens in-process. Exit codes:
0 success, 2 bad configuration or input, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bench import (
    CSV_COLUMNS,
    compare_methods,
    mean_tps,
    sweep_shots,
    synthetic_pool,
    synthetic_query,
    write_csv,
)
from .decoding import (
    METHOD_BASELINE,
    METHOD_DIP,
    METHOD_FASTDLLM,
    METHODS,
    DecodeConfig,
    decode_baseline,
    decode_fastdllm,
)
from .errors import ConfigError, InvariantViolation
from .model import ModelConfig, init_model
from .planner import build_prompt, decode_dip, write_trace
from .ranking import embed_text, load_embeddings, load_pool, mmr_rank, resolve_embeddings
from .vocab import decode_tokens

DEFAULT_SEED = int(os.environ.get("DESKDLM_SEED", "0"))


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    text = text.split("=", 1)[1] if "=" in text else text
    try:
        return [int(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskdlm",
        description="Desk-scale masked diffusion LM engine: rank examples, decode, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    model_flags = argparse.ArgumentParser(add_help=False)
    g = model_flags.add_argument_group("model")
    g.add_argument("--layers", type=int, default=4, help="transformer layers")
    g.add_argument("--dim", type=int, default=128, help="hidden dimension")
    g.add_argument("--heads", type=int, default=4, help="attention heads")
    g.add_argument("--max-seq-len", type=int, default=1024, help="position table size")
    g.add_argument(
        "--seed",
        type=int,
        default=DEFAULT_SEED,
        help="master seed (model weights, synthetic data, policy draws); env DESKDLM_SEED overrides the default",
    )

    decode_flags = argparse.ArgumentParser(add_help=False)
    g = decode_flags.add_argument_group("decoding")
    g.add_argument("--gen-len", type=int, default=256, help="generated tokens per query")
    g.add_argument("--block-size", type=int, default=32, help="tokens per block")
    g.add_argument("--steps", type=int, default=None, help="max steps per block (default: block size)")
    g.add_argument("--tau", type=float, default=0.9, help="confidence threshold for parallel unmasking")

    pool_flags = argparse.ArgumentParser(add_help=False)
    g = pool_flags.add_argument_group("example pool")
    g.add_argument("--examples-file", default=None, help="JSONL pool; omit to use a seeded synthetic pool")
    g.add_argument("--embeddings-file", default=None, help="JSONL id/vector overrides")
    g.add_argument("--hash-embed", action="store_true", help="fill missing embeddings with the built-in hashing embedder")
    g.add_argument("--embed-dim", type=int, default=256, help="hashing embedder dimension")
    g.add_argument("--pool-size", type=int, default=5, help="synthetic pool size")
    g.add_argument("--example-len", type=int, default=64, help="synthetic example length in tokens")
    g.add_argument("--query", default=None, help="query text (default: seeded synthetic query)")

    p_rank = sub.add_parser(
        "rank",
        parents=[pool_flags],
        formatter_class=fmt,
        help="rank the example pool for a query and print the order with scores",
    )
    p_rank.add_argument("--lambda", dest="lam", type=float, default=0.1, help="relevance/redundancy trade-off")
    p_rank.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for synthetic pool/query")

    p_decode = sub.add_parser(
        "decode",
        parents=[model_flags, decode_flags, pool_flags],
        formatter_class=fmt,
        help="decode one query and print the generated text",
    )
    p_decode.add_argument("--method", choices=METHODS, default=METHOD_FASTDLLM, help="decoding method")
    p_decode.add_argument("--lambda", dest="lam", type=float, default=0.1, help="ranking trade-off")
    p_decode.add_argument("--epsilon", type=float, default=0.2, help="progress-penalty strength (dip)")
    p_decode.add_argument("--shots", type=int, default=None, help="examples in the static prompt (default: whole pool)")
    p_decode.add_argument("--trace-out", default=None, help="write a JSONL event trace here")

    p_bench = sub.add_parser(
        "bench",
        parents=[model_flags, decode_flags, pool_flags],
        formatter_class=fmt,
        help="throughput benchmarks: shots sweep or method comparison",
    )
    p_bench.add_argument("--sweep", default=None, metavar="shots=1,2,4,8", help="sweep static shot counts")
    p_bench.add_argument("--compare", default=None, metavar="baseline,fastdllm,dip", help="compare methods")
    p_bench.add_argument("--shots", type=int, default=None, help="static prompt size for compare (default: whole pool)")
    p_bench.add_argument("--lambda", dest="lam", default="0.1", help="ranking trade-off; comma list grids dip rows")
    p_bench.add_argument("--epsilon", default="0.2", help="penalty strength; comma list grids dip rows")
    p_bench.add_argument("--num-queries", type=int, default=1, help="seeded queries per compare row group")
    p_bench.add_argument("--repeats", type=int, default=5, help="timed repeats per measurement (median reported)")
    p_bench.add_argument("--out-csv", default=None, help="write rows to this CSV file")
    p_bench.add_argument("--trace-out", default=None, help="write the last run's JSONL trace here")

    return parser


def _load_or_synthesize_pool(args):
    if args.examples_file:
        pool = load_pool(args.examples_file)
        overrides = load_embeddings(args.embeddings_file) if args.embeddings_file else None
        return resolve_embeddings(pool, overrides, hash_embed=args.hash_embed, dim=args.embed_dim)
    return synthetic_pool(args.pool_size, example_len=args.example_len, seed=args.seed + 1, embed_dim=args.embed_dim)


def _query_text(args) -> str:
    return args.query if args.query is not None else synthetic_query(args.seed + 2)


def _query_vector(args, pool):
    dim = pool.examples[0].embedding.shape[0]
    return embed_text(_query_text(args), dim=int(dim))


def cmd_rank(args) -> int:
    pool = _load_or_synthesize_pool(args)
    ranked = mmr_rank(_query_vector(args, pool), pool, args.lam)
    print(f"# lambda={ranked.lam:g} pool={pool.size}")
    for i, (example_id, score) in enumerate(zip(ranked.order, ranked.scores), start=1):
        print(f"{i}\t{example_id}\t{score:+.6f}")
    return 0


def _model_from_args(args):
    return init_model(
        ModelConfig(
            layers=args.layers,
            hidden_dim=args.dim,
            heads=args.heads,
            max_seq_len=args.max_seq_len,
            seed=args.seed,
        )
    )


def _decode_config(args) -> DecodeConfig:
    return DecodeConfig(
        gen_len=args.gen_len,
        block_size=args.block_size,
        steps_per_block=args.steps,
        tau=args.tau,
    )


def cmd_decode(args) -> int:
    model = _model_from_args(args)
    cfg = _decode_config(args)
    pool = _load_or_synthesize_pool(args)
    query = _query_text(args)
    ranked = mmr_rank(_query_vector(args, pool), pool, args.lam)
    vocab = model.config.vocab

    if args.method == METHOD_DIP:
        result = decode_dip(
            model, ranked, pool, query, cfg, args.epsilon, np.random.default_rng(args.seed)
        )
        k_final = result.final_k
    else:
        k = args.shots if args.shots is not None else pool.size
        prompt = build_prompt(ranked, pool, k, query, cfg.gen_len, vocab.mask_id, model.config.max_seq_len)
        decode = decode_baseline if args.method == METHOD_BASELINE else decode_fastdllm
        result = decode(model, prompt, cfg)
        k_final = k

    gen = result.sequence.generation_segment()
    text = decode_tokens(result.sequence.tokens[gen.start : gen.end], vocab)
    print(text)
    tps = result.tokens_generated / (result.wall_ms / 1e3)
    print(
        f"# method={args.method} tokens={result.tokens_generated} wall_ms={result.wall_ms:.1f} "
        f"tokens_per_sec={tps:.1f} examples={k_final} refreshes={result.refresh_count}",
        file=sys.stderr,
    )
    for w in result.warnings:
        print(f"# warning: {w}", file=sys.stderr)
    if args.trace_out:
        write_trace(args.trace_out, result.trace)
    return 0


def _write_rows(args, rows) -> None:
    if args.out_csv:
        try:
            write_csv(args.out_csv, rows)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out_csv}: {exc}") from None
        print(f"# wrote {len(rows)} rows to {args.out_csv}", file=sys.stderr)


def _print_rows(rows) -> None:
    print("\t".join(CSV_COLUMNS))
    for row in rows:
        print("\t".join(str(v) for v in row.as_csv()))


def cmd_bench(args) -> int:
    if (args.sweep is None) == (args.compare is None):
        raise ConfigError("bench needs exactly one of --sweep or --compare")
    model = _model_from_args(args)
    cfg = _decode_config(args)
    lam_values = _float_list(args.lam)
    eps_values = _float_list(args.epsilon)

    trace_events = [] if args.trace_out else None
    if args.sweep is not None:
        shots = _int_list(args.sweep)
        if not shots:
            raise ConfigError("--sweep needs at least one shot count")
        pool_size = max(args.pool_size, max(shots))
        pool = synthetic_pool(pool_size, example_len=args.example_len, seed=args.seed + 1, embed_dim=args.embed_dim) \
            if not args.examples_file else _load_or_synthesize_pool(args)
        result = sweep_shots(
            model, pool, _query_text(args), cfg, shots,
            lam=lam_values[0], seed=args.seed, repeats=args.repeats,
            trace_events=trace_events,
        )
        _print_rows(result.rows)
        rho = "n/a" if result.spearman_rho is None else f"{result.spearman_rho:.4f}"
        print(f"# spearman(shots, tokens_per_sec) = {rho}", file=sys.stderr)
        if result.cache_drift is not None:
            print(f"# cached-vs-full logit drift within block: {result.cache_drift:.3e}", file=sys.stderr)
        for k, reason in result.skipped:
            print(f"# skipped shots={k}: {reason}", file=sys.stderr)
        _write_rows(args, result.rows)
        rows = result.rows
    else:
        methods = [m.strip() for m in args.compare.split(",") if m.strip()]
        pool = _load_or_synthesize_pool(args)
        queries = [
            (args.seed + i, args.query if args.query is not None else synthetic_query(args.seed + 2 + i))
            for i in range(args.num_queries)
        ]
        rows = compare_methods(
            model, pool, queries, cfg, lam_values, eps_values,
            methods=methods, shots=args.shots, repeats=args.repeats,
            trace_events=trace_events,
        )
        _print_rows(rows)
        for m in methods:
            if m == METHOD_DIP:
                for eps in eps_values:
                    print(f"# mean tokens_per_sec {m}(eps={eps:g}) = {mean_tps(rows, m, eps):.1f}", file=sys.stderr)
            else:
                print(f"# mean tokens_per_sec {m} = {mean_tps(rows, m):.1f}", file=sys.stderr)
        _write_rows(args, rows)
    if args.trace_out and trace_events is not None:
        write_trace(args.trace_out, trace_events)
        print(f"# wrote {len(trace_events)} trace events to {args.trace_out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rank":
            return cmd_rank(args)
        if args.command == "decode":
            return cmd_decode(args)
        return cmd_bench(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
