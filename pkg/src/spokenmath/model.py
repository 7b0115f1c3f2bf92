"""Character-level encoder/decoder model built on the autodiff engine.

One shared architecture serves both pipeline stages: embeddings plus
sinusoidal positions, a single pre-norm self-attention block on the encoder
side, and causal self-attention + cross-attention + feed-forward on the
decoder side.  The encoder input may be token ids or a probability mixture
over the vocabulary (soft input), in which case the embedding lookup
becomes a matmul against the embedding table and gradients flow through.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .autodiff import Tensor, embedding, gather_last, layer_norm, log_softmax, softmax
from .channel import MathSample

PAD, BOS, EOS, SEP, UNK = range(5)
SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<sep>", "<unk>")


class EmptyCorpusError(Exception):
    pass


class LengthExceededError(Exception):
    pass


@dataclass(frozen=True)
class Vocab:
    """Character vocabulary; specials occupy the fixed ids 0-4."""

    chars: str  # sorted, deduplicated

    @property
    def size(self) -> int:
        return len(SPECIAL_TOKENS) + len(self.chars)

    def encode(self, text: str) -> list[int]:
        base = len(SPECIAL_TOKENS)
        index = self._index()
        return [index.get(c, UNK) for c in text]

    def decode(self, ids) -> str:
        base = len(SPECIAL_TOKENS)
        return "".join(self.chars[i - base] for i in ids if i >= base)

    def _index(self) -> dict:
        cached = getattr(self, "_cached_index", None)
        if cached is None:
            base = len(SPECIAL_TOKENS)
            cached = {c: base + i for i, c in enumerate(self.chars)}
            object.__setattr__(self, "_cached_index", cached)
        return cached


def build_vocab(corpus: list[MathSample]) -> Vocab:
    """Collect every character in se/latex/asr fields, in sorted order."""
    if not corpus:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    chars: set[str] = set()
    for sample in corpus:
        chars.update(sample.se)
        chars.update(sample.latex)
        for text in sample.asr.values():
            chars.update(text)
    return Vocab("".join(sorted(chars)))


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    d_ff: int = 128
    max_src: int = 160
    max_tgt: int = 128
    dtype: str = "float32"


_LN_NAMES = ("enc_ln1", "enc_ln2", "dec_ln1", "dec_ln2", "dec_ln3", "dec_lnf")
_MATRIX_SHAPES = {
    "enc_wq": ("d", "d"), "enc_wk": ("d", "d"), "enc_wv": ("d", "d"), "enc_wo": ("d", "d"),
    "enc_w1": ("d", "f"), "enc_w2": ("f", "d"),
    "dec_wq": ("d", "d"), "dec_wk": ("d", "d"), "dec_wv": ("d", "d"), "dec_wo": ("d", "d"),
    "dec_cq": ("d", "d"), "dec_ck": ("d", "d"), "dec_cv": ("d", "d"), "dec_co": ("d", "d"),
    "dec_w1": ("d", "f"), "dec_w2": ("f", "d"),
}


class Seq2SeqParams:
    """All learnable arrays of one encoder/decoder model."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def named(self):
        return self.tensors.items()

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def grads(self) -> dict:
        return {name: t.grad for name, t in self.tensors.items() if t.grad is not None}

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def copy(self) -> "Seq2SeqParams":
        return Seq2SeqParams(self.config,
                             {n: Tensor(t.data.copy(), requires_grad=True)
                              for n, t in self.tensors.items()})

    def astype(self, dtype: str) -> "Seq2SeqParams":
        return Seq2SeqParams(
            replace(self.config, dtype=dtype),
            {n: Tensor(t.data.astype(dtype), requires_grad=True)
             for n, t in self.tensors.items()})

    def check_finite(self):
        for name, t in self.tensors.items():
            if not np.isfinite(t.data).all():
                raise FloatingPointError(f"non-finite values in parameter {name}")


def init_seq2seq_params(config: ModelConfig, seed: int) -> Seq2SeqParams:
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.dtype)
    d, f, v = config.d_model, config.d_ff, config.vocab_size

    def normal(shape, std):
        return Tensor(rng.normal(0.0, std, size=shape).astype(dtype), requires_grad=True)

    tensors: dict[str, Tensor] = {"emb": normal((v, d), 0.1)}
    sizes = {"d": d, "f": f}
    for name, (a, b) in _MATRIX_SHAPES.items():
        fan_in, fan_out = sizes[a], sizes[b]
        tensors[name] = normal((fan_in, fan_out), (2.0 / (fan_in + fan_out)) ** 0.5)
    tensors["enc_b1"] = Tensor(np.zeros(f, dtype=dtype), requires_grad=True)
    tensors["enc_b2"] = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
    tensors["dec_b1"] = Tensor(np.zeros(f, dtype=dtype), requires_grad=True)
    tensors["dec_b2"] = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
    for name in _LN_NAMES:
        tensors[name + "_g"] = Tensor(np.ones(d, dtype=dtype), requires_grad=True)
        tensors[name + "_b"] = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
    tensors["out_w"] = normal((d, v), 0.1)
    tensors["out_b"] = Tensor(np.zeros(v, dtype=dtype), requires_grad=True)
    return Seq2SeqParams(config, tensors)


# ---------------------------------------------------------------------------
# forward pass

@lru_cache(maxsize=16)
def _position_table(length: int, d_model: int, dtype: str) -> np.ndarray:
    positions = np.arange(length)[:, None]
    dims = np.arange(d_model)[None, :]
    angles = positions / np.power(10000.0, (2 * (dims // 2)) / d_model)
    table = np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))
    return table.astype(dtype)


def _positions(t: int, config: ModelConfig) -> Tensor:
    limit = max(config.max_src, config.max_tgt)
    return Tensor(_position_table(limit, config.d_model, config.dtype)[:t])


_NEG = -1e9


def _layer_norm(x: Tensor, g: Tensor, b: Tensor) -> Tensor:
    return layer_norm(x, g, b, eps=1e-5)


def _attention(q: Tensor, k: Tensor, v: Tensor, bias: np.ndarray | None) -> Tensor:
    scale = q.shape[-1] ** -0.5
    scores = (q @ k.swapaxes(-1, -2)) * scale
    if bias is not None:
        scores = scores + Tensor(bias)
    return softmax(scores, axis=-1) @ v


def _key_bias(mask: np.ndarray, dtype: str) -> np.ndarray:
    # mask: (B, Tk) True for real positions -> (B, 1, Tk) additive bias
    return np.where(mask[:, None, :], 0.0, _NEG).astype(dtype)


def _causal_bias(t: int, dtype: str) -> np.ndarray:
    return np.triu(np.full((1, t, t), _NEG, dtype=dtype), k=1)


def encode_source(params: Seq2SeqParams, src, src_mask: np.ndarray | None = None):
    """Run the encoder; src is an int id array (B, Ts) or a soft Tensor (B, Ts, V)."""
    cfg = params.config
    if isinstance(src, Tensor):
        if src_mask is None:
            raise ValueError("soft encoder input needs an explicit source mask")
        if src.shape[1] > cfg.max_src:
            raise LengthExceededError(f"source length {src.shape[1]} > {cfg.max_src}")
        x = src @ params["emb"]
    else:
        src = np.asarray(src)
        if src.shape[1] > cfg.max_src:
            raise LengthExceededError(f"source length {src.shape[1]} > {cfg.max_src}")
        if src_mask is None:
            src_mask = src != PAD
        x = embedding(params["emb"], src)
    x = x + _positions(x.shape[1], cfg)
    bias = _key_bias(src_mask, cfg.dtype)

    h = _layer_norm(x, params["enc_ln1_g"], params["enc_ln1_b"])
    attended = _attention(h @ params["enc_wq"], h @ params["enc_wk"], h @ params["enc_wv"], bias)
    x = x + attended @ params["enc_wo"]
    h = _layer_norm(x, params["enc_ln2_g"], params["enc_ln2_b"])
    x = x + (h @ params["enc_w1"] + params["enc_b1"]).relu() @ params["enc_w2"] + params["enc_b2"]
    return x, src_mask


def decode_logits(params: Seq2SeqParams, enc_h: Tensor, src_mask: np.ndarray,
                  tgt_in: np.ndarray) -> Tensor:
    """Teacher-forced decoder logits (B, Tt, V); position t sees target prefix < t."""
    cfg = params.config
    tgt_in = np.asarray(tgt_in)
    t = tgt_in.shape[1]
    if t > cfg.max_tgt:
        raise LengthExceededError(f"target length {t} > {cfg.max_tgt}")
    y = embedding(params["emb"], tgt_in) + _positions(t, cfg)

    h = _layer_norm(y, params["dec_ln1_g"], params["dec_ln1_b"])
    self_attended = _attention(h @ params["dec_wq"], h @ params["dec_wk"], h @ params["dec_wv"],
                               _causal_bias(t, cfg.dtype))
    y = y + self_attended @ params["dec_wo"]

    h = _layer_norm(y, params["dec_ln2_g"], params["dec_ln2_b"])
    cross = _attention(h @ params["dec_cq"], enc_h @ params["dec_ck"], enc_h @ params["dec_cv"],
                       _key_bias(src_mask, cfg.dtype))
    y = y + cross @ params["dec_co"]

    h = _layer_norm(y, params["dec_ln3_g"], params["dec_ln3_b"])
    y = y + (h @ params["dec_w1"] + params["dec_b1"]).relu() @ params["dec_w2"] + params["dec_b2"]
    h = _layer_norm(y, params["dec_lnf_g"], params["dec_lnf_b"])
    return h @ params["out_w"] + params["out_b"]


def forward(params: Seq2SeqParams, src, tgt_in, src_mask: np.ndarray | None = None) -> Tensor:
    """Teacher-forced forward pass returning unnormalized scores.

    Accepts either batched (B, T) id arrays or single (T,) sequences; the
    single form returns (T, V).  The source may also be a soft Tensor of
    per-position vocabulary distributions.
    """
    single = not isinstance(src, Tensor) and np.asarray(src).ndim == 1
    if single:
        src = np.asarray(src)[None, :]
        tgt_in = np.asarray(tgt_in)[None, :]
    enc_h, mask = encode_source(params, src, src_mask)
    logits = decode_logits(params, enc_h, mask, tgt_in)
    return logits.reshape(*logits.shape[1:]) if single else logits


def cross_entropy(logits: Tensor, target_ids: np.ndarray, pad_mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over non-PAD positions.

    The scalar is returned in float64 regardless of model dtype so that loss
    bookkeeping (e.g. weighted sums of stage losses) is exact; gradients are
    cast back to the model dtype on the way down.
    """
    target_ids = np.asarray(target_ids)
    pad_mask = np.asarray(pad_mask)
    log_probs = log_softmax(logits, axis=-1)
    picked = gather_last(log_probs, target_ids)
    weights = pad_mask.astype(logits.dtype)
    loss = -(picked * Tensor(weights)).sum() * (1.0 / weights.sum())
    return loss.astype(np.float64)


# ---------------------------------------------------------------------------
# optimization

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0


def adam_step(params: Seq2SeqParams, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One in-place adaptive-moment update; advances the step counter."""
    state.step_count += 1
    t = state.step_count
    for name, grad in grads.items():
        tensor = params.tensors[name]
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(tensor.data)
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * grad
        v *= beta2
        v += (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(tensor.data.dtype)


LR_MAX = 1e-4
LR_MIN = 1e-6


def lr_schedule(step: int, total_steps: int) -> float:
    """Linear decay from 1e-4 at step 0 to 1e-6 at the final step."""
    if not 0 <= step <= total_steps:
        raise ValueError("step must be within [0, total_steps]")
    if total_steps == 0:
        return LR_MAX
    return LR_MAX + (LR_MIN - LR_MAX) * (step / total_steps)


def linear_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    if total_steps == 0:
        return lr_max
    return lr_max + (lr_min - lr_max) * (step / total_steps)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_params(params: Seq2SeqParams, path) -> None:
    manifest = {"version": CHECKPOINT_VERSION, "config": params.config.__dict__}
    arrays = {name: t.data for name, t in params.named()}
    np.savez(path, __manifest__=np.array(json.dumps(manifest, sort_keys=True)), **arrays)


def load_params(path) -> Seq2SeqParams:
    with np.load(path) as blob:
        manifest = json.loads(str(blob["__manifest__"][()]))
        if manifest["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest['version']}")
        config = ModelConfig(**manifest["config"])
        tensors = {name: Tensor(blob[name].copy(), requires_grad=True)
                   for name in blob.files if name != "__manifest__"}
    return Seq2SeqParams(config, tensors)
