"""Example pool ranking: hashed bag-of-words embeddings and greedy
maximal-marginal-relevance ordering.

The ranked order is computed once per query, before decoding; the planner
then consumes examples strictly in this order.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_EMBED_DIM = 256

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass
class Example:
    id: str
    question: str
    answer: str
    embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=np.float32)
            norm = float(np.linalg.norm(self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise ConfigError(f"example {self.id}: embedding norm {norm} != 1")


@dataclass
class ExamplePool:
    examples: list[Example] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [e.id for e in self.examples]
        if len(set(ids)) != len(ids):
            raise ConfigError("example ids must be unique")

    @property
    def size(self) -> int:
        return len(self.examples)

    def by_id(self, example_id: str) -> Example:
        for e in self.examples:
            if e.id == example_id:
                return e
        raise KeyError(example_id)

    def embedding_matrix(self) -> np.ndarray:
        missing = [e.id for e in self.examples if e.embedding is None]
        if missing:
            raise ConfigError(f"examples missing embeddings: {missing}")
        return np.stack([e.embedding for e in self.examples])


@dataclass(frozen=True)
class RankedExamples:
    order: tuple[str, ...]  # example ids, best first
    lam: float
    scores: tuple[float, ...]  # greedy score of each pick, for audit


def _hash64(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


def embed_text(text: str, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Deterministic feature-hashing bag-of-words vector, L2-normalized.

    Order-invariant by construction; signs come from a hash bit so buckets
    cancel rather than pile up.
    """
    if not text or not text.strip():
        raise ConfigError("cannot embed empty text")
    words = _WORD_RE.findall(text.lower())
    if not words:
        words = [text.strip().lower()]
    vec = np.zeros(dim, dtype=np.float32)
    for w in words:
        h = _hash64(w)
        sign = 1.0 if (h >> 63) & 1 else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ConfigError("embedding collapsed to the zero vector")
    return vec / norm


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ConfigError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ConfigError("cosine similarity undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def mmr_rank(query_vec: np.ndarray, pool: ExamplePool, lam: float) -> RankedExamples:
    """Greedy ranking of the whole pool.

    Each step picks the unselected example maximizing
    lam * sim(query, candidate) - (1 - lam) * max_selected sim(candidate, s);
    the redundancy term is zero while nothing is selected yet. Ties break
    toward the lowest pool index.
    """
    if not (0.0 <= lam <= 1.0):
        raise ConfigError(f"lambda must be in [0, 1], got {lam}")
    if pool.size == 0:
        raise ConfigError("cannot rank an empty pool")
    emb = pool.embedding_matrix().astype(np.float64)
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape[0] != emb.shape[1]:
        raise ConfigError(f"query dim {q.shape[0]} != pool dim {emb.shape[1]}")

    # unit-normalize defensively so Sim is cosine even for raw vectors
    def unit(m):
        n = np.linalg.norm(m, axis=-1, keepdims=True)
        if np.any(n == 0):
            raise ConfigError("zero vector in similarity computation")
        return m / n

    emb = unit(emb)
    q = unit(q[None, :])[0]
    rel = emb @ q  # similarity to the query
    pair = emb @ emb.T

    k = pool.size
    selected: list[int] = []
    scores: list[float] = []
    max_sim_to_sel = np.full(k, -np.inf)
    alive = np.ones(k, dtype=bool)
    for _ in range(k):
        if selected:
            score = lam * rel - (1.0 - lam) * max_sim_to_sel
        else:
            score = lam * rel
        score = np.where(alive, score, -np.inf)
        best = int(score.argmax())  # argmax returns the lowest index on ties
        selected.append(best)
        scores.append(float(score[best]))
        alive[best] = False
        max_sim_to_sel = np.maximum(max_sim_to_sel, pair[:, best])
    order = tuple(pool.examples[i].id for i in selected)
    return RankedExamples(order=order, lam=lam, scores=tuple(scores))


# -- pool files ---------------------------------------------------------------


def load_pool(path: str) -> ExamplePool:
    """JSON Lines, one example per line:
    {"id": str, "question": str, "answer": str, "embedding": [floats]?}"""
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    Example(
                        id=str(obj["id"]),
                        question=obj["question"],
                        answer=obj["answer"],
                        embedding=obj.get("embedding"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed example line ({exc})") from None
    return ExamplePool(examples)


def save_pool(pool: ExamplePool, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in pool.examples:
            obj = {"id": e.id, "question": e.question, "answer": e.answer}
            if e.embedding is not None:
                obj["embedding"] = [float(x) for x in e.embedding]
            f.write(json.dumps(obj) + "\n")


def load_embeddings(path: str) -> dict[str, np.ndarray]:
    """Override file: JSONL of {"id": str, "vector": [floats]}."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                vectors[str(obj["id"])] = np.asarray(obj["vector"], dtype=np.float32)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed embedding line ({exc})") from None
    return vectors


def resolve_embeddings(
    pool: ExamplePool,
    overrides: dict[str, np.ndarray] | None = None,
    hash_embed: bool = False,
    dim: int = DEFAULT_EMBED_DIM,
) -> ExamplePool:
    """Fill in embeddings: explicit overrides win, then inline vectors, then
    (only if allowed) the built-in hashing embedder."""
    out = []
    dims = set()
    for e in pool.examples:
        vec = None
        if overrides and e.id in overrides:
            vec = overrides[e.id]
            n = float(np.linalg.norm(vec))
            if n == 0:
                raise ConfigError(f"example {e.id}: zero override vector")
            vec = vec / n
        elif e.embedding is not None:
            vec = e.embedding
        elif hash_embed:
            vec = embed_text(e.question, dim)
        else:
            raise ConfigError(
                f"example {e.id} has no embedding; provide one or enable the hashing embedder"
            )
        dims.add(vec.shape[0])
        out.append(Example(e.id, e.question, e.answer, vec))
    if len(dims) > 1:
        raise ConfigError(f"inconsistent embedding dimensions in pool: {sorted(dims)}")
    return ExamplePool(out)
