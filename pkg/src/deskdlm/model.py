"""Deterministic desk-scale bidirectional transformer used as the denoiser.

The network is a standard pre-LN encoder (learned absolute positions, full
bidirectional attention, GELU MLP) with weights drawn from a seeded generator,
so a (config, seed) pair fully determines the model.

Parameters are stored (and saved) as float32; the forward pass accumulates in
float64 with max-subtracted softmax. The wider accumulator matters: cached
block decoding recomputes the active window with different matrix shapes than
a full pass, and float32 BLAS kernels disagree across shapes by more than the
refresh-point equivalence tolerance this engine guarantees.

Multiply-accumulate counts are tracked next to each matmul via an optional
MacCounter, which is how the cached/uncached cost ratio is measured.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .sequence import SequenceState
from .vocab import Vocab, byte_vocab

_LN_EPS = 1e-5

# Init scales. Attention projections are sized so scores land in O(1) range
# (selective attention); the unembedding scale spreads per-position max
# probabilities across (0, 1) so a confidence threshold is meaningful.
# Attention/unembedding scales divide by sqrt(hidden_dim) to keep score and
# logit magnitudes comparable across model sizes.
_EMB_STD = 0.10
_ATTN_SCALE = 1.25
_PROJ_STD = 0.10
_UNEMB_SCALE = 12.5


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 4
    hidden_dim: int = 128
    heads: int = 4
    max_seq_len: int = 1024
    vocab: Vocab = None  # type: ignore[assignment]
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab is None:
            object.__setattr__(self, "vocab", byte_vocab())
        if self.layers < 1 or self.hidden_dim < 1 or self.heads < 1:
            raise ConfigError("layers, hidden_dim and heads must be positive")
        if self.hidden_dim % self.heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}"
            )
        if self.max_seq_len < 1:
            raise ConfigError("max_seq_len must be positive")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads


class MacCounter:
    """Accumulates multiply-accumulate counts of the matmuls that ran."""

    __slots__ = ("macs",)

    def __init__(self) -> None:
        self.macs = 0

    def add(self, n: int) -> None:
        self.macs += int(n)


class ToyDlm:
    """Immutable weights + config. Shareable across decode sessions.

    `weights` is the canonical float32 parameter set; `w` holds the float64
    mirrors the forward pass computes with.
    """

    def __init__(self, config: ModelConfig, weights: dict[str, np.ndarray]):
        self.config = config
        self.weights = weights
        for arr in weights.values():
            arr.flags.writeable = False
        self.w = {name: arr.astype(np.float64) for name, arr in weights.items()}
        for arr in self.w.values():
            arr.flags.writeable = False

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in sorted(self.weights):
            h.update(name.encode())
            h.update(self.weights[name].tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Logits:
    """Post-softmax distributions for the requested positions (row i belongs
    to positions[i])."""

    positions: np.ndarray
    probs: np.ndarray

    def confidences(self) -> np.ndarray:
        return self.probs.max(axis=1)

    def best_tokens(self) -> np.ndarray:
        return self.probs.argmax(axis=1).astype(np.int32)

    def row_for(self, position: int) -> np.ndarray:
        idx = np.nonzero(self.positions == position)[0]
        if idx.size == 0:
            raise KeyError(f"no logits at position {position}")
        return self.probs[int(idx[0])]


def init_model(config: ModelConfig) -> ToyDlm:
    """Draw all parameters from a generator seeded by config.seed."""
    rng = np.random.default_rng(config.seed)
    d, v = config.hidden_dim, config.vocab.size
    attn_std = _ATTN_SCALE / np.sqrt(d)
    unemb_std = _UNEMB_SCALE / np.sqrt(d)

    def draw(shape, std):
        return (rng.standard_normal(shape) * std).astype(np.float32)

    w: dict[str, np.ndarray] = {
        "tok_emb": draw((v, d), _EMB_STD),
        "pos_emb": draw((config.max_seq_len, d), _EMB_STD),
        "lnf_g": np.ones(d, dtype=np.float32),
        "lnf_b": np.zeros(d, dtype=np.float32),
        "unemb": draw((d, v), unemb_std),
    }
    for i in range(config.layers):
        p = f"layer{i}."
        w[p + "ln1_g"] = np.ones(d, dtype=np.float32)
        w[p + "ln1_b"] = np.zeros(d, dtype=np.float32)
        w[p + "wq"] = draw((d, d), attn_std)
        w[p + "wk"] = draw((d, d), attn_std)
        w[p + "wv"] = draw((d, d), _PROJ_STD)
        w[p + "wo"] = draw((d, d), _PROJ_STD)
        w[p + "ln2_g"] = np.ones(d, dtype=np.float32)
        w[p + "ln2_b"] = np.zeros(d, dtype=np.float32)
        w[p + "w1"] = draw((d, 4 * d), _PROJ_STD)
        w[p + "w2"] = draw((4 * d, d), _PROJ_STD)
    return ToyDlm(config, w)


# -- forward pass internals --------------------------------------------------


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + _LN_EPS) * g + b


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    out = x - x.max(axis=axis, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=axis, keepdims=True)
    return out


def _attention(q, k, v, heads: int, counter: MacCounter | None) -> np.ndarray:
    lq, d = q.shape
    lk = k.shape[0]
    dh = d // heads
    qh = q.reshape(lq, heads, dh).transpose(1, 0, 2)
    kh = k.reshape(lk, heads, dh).transpose(1, 2, 0)
    vh = v.reshape(lk, heads, dh).transpose(1, 0, 2)
    scores = np.matmul(qh, kh) * (1.0 / np.sqrt(dh))
    if counter is not None:
        counter.add(heads * lq * lk * dh)
    attn = softmax(scores, axis=-1)
    ctx = np.matmul(attn, vh)
    if counter is not None:
        counter.add(heads * lq * lk * dh)
    return ctx.transpose(1, 0, 2).reshape(lq, d)


def _mlp(h, w, prefix, counter: MacCounter | None) -> np.ndarray:
    x = _layer_norm(h, w[prefix + "ln2_g"], w[prefix + "ln2_b"])
    inner = _gelu(x @ w[prefix + "w1"])
    out = inner @ w[prefix + "w2"]
    if counter is not None:
        n, d = x.shape
        counter.add(2 * n * d * 4 * d)
    return h + out


def full_hidden(
    model: ToyDlm,
    tokens: np.ndarray,
    counter: MacCounter | None = None,
    collect_kv: bool = False,
):
    """Hidden states for the whole sequence; optionally also per-layer K/V."""
    cfg, w = model.config, model.w
    n = len(tokens)
    h = w["tok_emb"][tokens] + w["pos_emb"][:n]
    kv: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(cfg.layers):
        p = f"layer{i}."
        x = _layer_norm(h, w[p + "ln1_g"], w[p + "ln1_b"])
        q = x @ w[p + "wq"]
        k = x @ w[p + "wk"]
        v = x @ w[p + "wv"]
        if counter is not None:
            counter.add(3 * n * cfg.hidden_dim * cfg.hidden_dim)
        if collect_kv:
            kv.append((k, v))
        ctx = _attention(q, k, v, cfg.heads, counter)
        h = h + ctx @ w[p + "wo"]
        if counter is not None:
            counter.add(n * cfg.hidden_dim * cfg.hidden_dim)
        h = _mlp(h, w, p, counter)
    hf = _layer_norm(h, w["lnf_g"], w["lnf_b"])
    return (hf, kv) if collect_kv else hf


def window_hidden(
    model: ToyDlm,
    tokens: np.ndarray,
    window: tuple[int, int],
    k_bufs: list[np.ndarray],
    v_bufs: list[np.ndarray],
    counter: MacCounter | None = None,
) -> np.ndarray:
    """Hidden states for the active window only. Keys/values for the window
    are recomputed each call and written into the caller's per-layer buffers;
    everything outside the window is read from those buffers as-is."""
    cfg, w = model.config, model.w
    s, e = window
    b = e - s
    h = w["tok_emb"][tokens[s:e]] + w["pos_emb"][s:e]
    for i in range(cfg.layers):
        p = f"layer{i}."
        x = _layer_norm(h, w[p + "ln1_g"], w[p + "ln1_b"])
        q = x @ w[p + "wq"]
        k_bufs[i][s:e] = x @ w[p + "wk"]
        v_bufs[i][s:e] = x @ w[p + "wv"]
        if counter is not None:
            counter.add(3 * b * cfg.hidden_dim * cfg.hidden_dim)
        ctx = _attention(q, k_bufs[i], v_bufs[i], cfg.heads, counter)
        h = h + ctx @ w[p + "wo"]
        if counter is not None:
            counter.add(b * cfg.hidden_dim * cfg.hidden_dim)
        h = _mlp(h, w, p, counter)
    return _layer_norm(h, w["lnf_g"], w["lnf_b"])


def project_vocab(
    model: ToyDlm,
    hidden_rows: np.ndarray,
    positions: np.ndarray,
    counter: MacCounter | None = None,
) -> Logits:
    logits = hidden_rows @ model.w["unemb"]
    if counter is not None:
        counter.add(hidden_rows.shape[0] * model.config.hidden_dim * model.config.vocab.size)
    return Logits(positions=positions, probs=softmax(logits, axis=-1))


def model_forward(
    model: ToyDlm,
    seq: SequenceState,
    positions=None,
    counter: MacCounter | None = None,
) -> Logits:
    """Full uncached forward pass; distributions for the requested positions.

    Pure function of (model, seq): repeated calls are bit-identical.
    """
    n = len(seq)
    if n > model.config.max_seq_len:
        raise ConfigError(f"sequence length {n} exceeds max_seq_len {model.config.max_seq_len}")
    if positions is None:
        positions = np.arange(n, dtype=np.int64)
    else:
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size and (positions.min() < 0 or positions.max() >= n):
            raise ConfigError("requested positions out of range")
    hf = full_hidden(model, seq.tokens, counter)
    return project_vocab(model, hf[positions], positions, counter)


# -- weight save/load --------------------------------------------------------

_MAGIC = b"DDLM"


def save_weights(model: ToyDlm, path: str) -> None:
    """Flat little-endian float32 arrays after a JSON header that names each
    tensor and its shape (plus the config needed to rebuild the model)."""
    tensors = []
    offset = 0
    for name in sorted(model.weights):
        arr = model.weights[name]
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 4
    cfg = model.config
    header = {
        "config": {
            "layers": cfg.layers,
            "hidden_dim": cfg.hidden_dim,
            "heads": cfg.heads,
            "max_seq_len": cfg.max_seq_len,
            "seed": cfg.seed,
            "vocab": {
                "size": cfg.vocab.size,
                "mask_id": cfg.vocab.mask_id,
                "pad_id": cfg.vocab.pad_id,
                "bos_id": cfg.vocab.bos_id,
                "sep_id": cfg.vocab.sep_id,
            },
        },
        "dtype": "<f4",
        "tensors": tensors,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in sorted(model.weights):
            f.write(np.ascontiguousarray(model.weights[name], dtype="<f4").tobytes())


def load_weights(path: str) -> ToyDlm:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ConfigError(f"{path}: not a weight file")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        data = f.read()
    c = header["config"]
    config = ModelConfig(
        layers=c["layers"],
        hidden_dim=c["hidden_dim"],
        heads=c["heads"],
        max_seq_len=c["max_seq_len"],
        vocab=Vocab(**c["vocab"]),
        seed=c["seed"],
    )
    weights: dict[str, np.ndarray] = {}
    for t in header["tensors"]:
        size = int(np.prod(t["shape"]))
        start = t["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=start)
        weights[t["name"]] = arr.reshape(t["shape"]).copy()
    return ToyDlm(config, weights)
