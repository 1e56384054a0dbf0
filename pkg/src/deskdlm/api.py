"""HTTP service wrapping the engine: rank, decode and bench endpoints.

Run with: uvicorn deskdlm.api:app
Models are deterministic functions of their config, so instances are cached
per config and shared across requests (decode sessions own all mutable state).
"""
from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bench import compare_methods, sweep_shots, synthetic_pool, synthetic_query
from .decoding import (
    METHOD_BASELINE,
    METHOD_DIP,
    METHOD_FASTDLLM,
    DecodeConfig,
    decode_baseline,
    decode_fastdllm,
)
from .errors import ConfigError, DeskDlmError, InvariantViolation
from .model import ModelConfig, ToyDlm, init_model
from .planner import build_prompt, decode_dip
from .ranking import Example, ExamplePool, embed_text, mmr_rank, resolve_embeddings
from .vocab import decode_tokens


class ModelParams(BaseModel):
    layers: int = 4
    dim: int = 128
    heads: int = 4
    max_seq_len: int = 1024
    seed: int = 0


class DecodeParams(BaseModel):
    gen_len: int = 256
    block_size: int = 32
    steps_per_block: Optional[int] = None
    tau: float = 0.9


class ExampleIn(BaseModel):
    id: str
    question: str
    answer: str
    embedding: Optional[list[float]] = None


class PoolParams(BaseModel):
    examples: Optional[list[ExampleIn]] = None
    hash_embed: bool = True
    embed_dim: int = 256
    synthetic_size: int = 5
    synthetic_example_len: int = 64
    synthetic_seed: int = 1


class RankRequest(BaseModel):
    query: str
    lam: float = Field(default=0.1, alias="lambda")
    pool: PoolParams = PoolParams()

    model_config = {"populate_by_name": True}


class RankResponse(BaseModel):
    order: list[str]
    scores: list[float]
    lam: float


class DecodeRequest(BaseModel):
    method: Literal["baseline", "fastdllm", "dip"] = METHOD_FASTDLLM
    query: Optional[str] = None
    shots: Optional[int] = None
    lam: float = Field(default=0.1, alias="lambda")
    epsilon: float = 0.2
    seed: int = 0
    model: ModelParams = ModelParams()
    decode: DecodeParams = DecodeParams()
    pool: PoolParams = PoolParams()
    include_trace: bool = False

    model_config = {"populate_by_name": True}


class DecodeResponse(BaseModel):
    text: str
    method: str
    tokens_generated: int
    wall_ms: float
    tokens_per_sec: float
    final_example_count: int
    refresh_count: int
    warnings: list[str]
    trace: Optional[list[dict]] = None


class SweepRequest(BaseModel):
    shots: list[int]
    query: Optional[str] = None
    lam: float = Field(default=0.1, alias="lambda")
    seed: int = 0
    repeats: int = 5
    model: ModelParams = ModelParams()
    decode: DecodeParams = DecodeParams()
    pool: PoolParams = PoolParams()

    model_config = {"populate_by_name": True}


class BenchRowOut(BaseModel):
    method: str
    shots: int
    lam: float
    epsilon: Optional[float]
    tau: float
    block_size: int
    gen_len: int
    seed: int
    tokens_generated: int
    wall_ms: float
    tokens_per_sec: float
    final_example_count: int
    refresh_count: int


class SweepResponse(BaseModel):
    rows: list[BenchRowOut]
    spearman_rho: Optional[float]
    skipped: list[tuple[int, str]]


class CompareRequest(BaseModel):
    methods: list[Literal["baseline", "fastdllm", "dip"]] = [
        METHOD_BASELINE,
        METHOD_FASTDLLM,
        METHOD_DIP,
    ]
    lambdas: list[float] = [0.1]
    epsilons: list[float] = [0.2]
    num_queries: int = 1
    shots: Optional[int] = None
    seed: int = 0
    repeats: int = 1
    model: ModelParams = ModelParams()
    decode: DecodeParams = DecodeParams()
    pool: PoolParams = PoolParams()


class CompareResponse(BaseModel):
    rows: list[BenchRowOut]


app = FastAPI(title="deskdlm", version="0.1.0")

_model_cache: dict[tuple, ToyDlm] = {}


def _get_model(p: ModelParams) -> ToyDlm:
    key = (p.layers, p.dim, p.heads, p.max_seq_len, p.seed)
    if key not in _model_cache:
        _model_cache[key] = init_model(
            ModelConfig(
                layers=p.layers,
                hidden_dim=p.dim,
                heads=p.heads,
                max_seq_len=p.max_seq_len,
                seed=p.seed,
            )
        )
    return _model_cache[key]


def _get_pool(p: PoolParams) -> ExamplePool:
    if p.examples is None:
        return synthetic_pool(
            p.synthetic_size, example_len=p.synthetic_example_len, seed=p.synthetic_seed, embed_dim=p.embed_dim
        )
    pool = ExamplePool(
        [Example(e.id, e.question, e.answer, e.embedding) for e in p.examples]
    )
    return resolve_embeddings(pool, hash_embed=p.hash_embed, dim=p.embed_dim)


def _decode_config(p: DecodeParams) -> DecodeConfig:
    return DecodeConfig(
        gen_len=p.gen_len, block_size=p.block_size, steps_per_block=p.steps_per_block, tau=p.tau
    )


def _row_out(row) -> BenchRowOut:
    return BenchRowOut(
        method=row.method,
        shots=row.shots,
        lam=row.lam,
        epsilon=row.epsilon,
        tau=row.tau,
        block_size=row.block_size,
        gen_len=row.gen_len,
        seed=row.seed,
        tokens_generated=row.tokens_generated,
        wall_ms=row.wall_ms,
        tokens_per_sec=row.tokens_per_sec,
        final_example_count=row.final_example_count,
        refresh_count=row.refresh_count,
    )


@app.exception_handler(DeskDlmError)
async def _engine_error(_, exc: DeskDlmError):
    status = 500 if isinstance(exc, InvariantViolation) else 422
    return JSONResponse(status_code=status, content={"detail": str(exc)})


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "cached_models": len(_model_cache)}


@app.post("/rank", response_model=RankResponse)
def rank(req: RankRequest) -> RankResponse:
    try:
        pool = _get_pool(req.pool)
        dim = int(pool.examples[0].embedding.shape[0])
        ranked = mmr_rank(embed_text(req.query, dim=dim), pool, req.lam)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return RankResponse(order=list(ranked.order), scores=list(ranked.scores), lam=ranked.lam)


@app.post("/decode", response_model=DecodeResponse)
def decode(req: DecodeRequest) -> DecodeResponse:
    try:
        model = _get_model(req.model)
        cfg = _decode_config(req.decode)
        pool = _get_pool(req.pool)
        query = req.query if req.query is not None else synthetic_query(req.seed + 2)
        dim = int(pool.examples[0].embedding.shape[0])
        ranked = mmr_rank(embed_text(query, dim=dim), pool, req.lam)
        vocab = model.config.vocab

        if req.method == METHOD_DIP:
            result = decode_dip(
                model, ranked, pool, query, cfg, req.epsilon, np.random.default_rng(req.seed)
            )
            k_final = result.final_k
        else:
            k = req.shots if req.shots is not None else pool.size
            prompt = build_prompt(
                ranked, pool, k, query, cfg.gen_len, vocab.mask_id, model.config.max_seq_len
            )
            fn = decode_baseline if req.method == METHOD_BASELINE else decode_fastdllm
            result = fn(model, prompt, cfg)
            k_final = k
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))

    gen = result.sequence.generation_segment()
    return DecodeResponse(
        text=decode_tokens(result.sequence.tokens[gen.start : gen.end], vocab),
        method=req.method,
        tokens_generated=result.tokens_generated,
        wall_ms=result.wall_ms,
        tokens_per_sec=result.tokens_generated / (result.wall_ms / 1e3),
        final_example_count=k_final,
        refresh_count=result.refresh_count,
        warnings=result.warnings,
        trace=result.trace if req.include_trace else None,
    )


@app.post("/bench/sweep", response_model=SweepResponse)
def bench_sweep(req: SweepRequest) -> SweepResponse:
    try:
        model = _get_model(req.model)
        pool = _get_pool(req.pool)
        query = req.query if req.query is not None else synthetic_query(req.seed + 2)
        result = sweep_shots(
            model, pool, query, _decode_config(req.decode), req.shots,
            lam=req.lam, seed=req.seed, repeats=req.repeats,
        )
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return SweepResponse(
        rows=[_row_out(r) for r in result.rows],
        spearman_rho=result.spearman_rho,
        skipped=result.skipped,
    )


@app.post("/bench/compare", response_model=CompareResponse)
def bench_compare(req: CompareRequest) -> CompareResponse:
    try:
        model = _get_model(req.model)
        pool = _get_pool(req.pool)
        queries = [
            (req.seed + i, synthetic_query(req.seed + 2 + i)) for i in range(req.num_queries)
        ]
        rows = compare_methods(
            model, pool, queries, _decode_config(req.decode),
            req.lambdas, req.epsilons, methods=list(req.methods),
            shots=req.shots, repeats=req.repeats,
        )
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return CompareResponse(rows=[_row_out(r) for r in rows])


def main() -> None:
    import uvicorn

    uvicorn.run(app, host="127.0.0.1", port=8000)


if __name__ == "__main__":
    main()
