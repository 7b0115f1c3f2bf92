"""The two-stage system: an error corrector that fuses two recognizer
hypotheses into clean spoken English, and a translator that turns spoken
English into LaTeX, trained jointly.

The combined objective is a weighted sum of the two stage cross-entropies.
How the translator sees the corrector during training is the coupling mode:

* ``soft``: the translator's encoder consumes the probability-weighted
  mixture of embedding rows from the corrector's per-step output
  distributions, so translator loss gradients reach the corrector.
* ``detached``: same mixture, but gradient flow is severed at the boundary.
* ``just-connect``: the stages train independently (corrector on spoken
  English targets, translator on clean spoken English -> LaTeX) and are only
  composed at inference.
* ``translator-only``: no corrector; the translator consumes the first
  hypothesis directly.

Inference always hard-decodes text between the stages.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import latex as lx
from .autodiff import Tensor, no_grad, softmax
from .channel import MathSample
from .model import (
    BOS, EOS, PAD, SEP,
    AdamState, ModelConfig, Seq2SeqParams, Vocab,
    adam_step, build_vocab, cross_entropy, decode_logits, encode_source,
    init_seq2seq_params, linear_lr, load_params, save_params,
)
from .spoken import parse_spoken
from .util import derive_seed

COUPLING_MODES = ("soft", "detached", "just-connect", "translator-only")


class MissingHypothesesError(Exception):
    pass


class DivergedError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lambda_se: float = 0.3
    lambda_latex: float = 0.7
    coupling: str = "soft"
    epochs: int = 3
    batch_size: int = 32
    seed: int = 0
    d_model: int = 64
    d_ff: int = 128
    corrector_max_src: int = 160
    corrector_max_tgt: int = 128
    translator_max_src: int = 128
    translator_max_tgt: int = 128
    val_fraction: float = 0.1
    val_cer_samples: int = 128
    steps_per_epoch: int | None = None  # None: one pass over the training split
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    dtype: str = "float32"

    def __post_init__(self):
        if self.lambda_se < 0 or self.lambda_latex < 0 or self.lambda_se + self.lambda_latex <= 0:
            raise ValueError("loss weights must be nonnegative with a positive sum")
        if self.coupling not in COUPLING_MODES:
            raise ValueError(f"coupling must be one of {COUPLING_MODES}")
        if not 1 <= self.epochs <= 20:
            raise ValueError("epochs must be in 1..20")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "greedy"
    beam_width: int = 1
    max_len: int = 128

    def __post_init__(self):
        if self.mode not in ("greedy", "beam"):
            raise ValueError("mode must be 'greedy' or 'beam'")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


# ---------------------------------------------------------------------------
# batch assembly

def _pad_batch(rows: list[list[int]], width: int | None = None) -> np.ndarray:
    width = width or max(len(r) for r in rows)
    out = np.full((len(rows), width), PAD, dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, :len(row)] = row
    return out


def encode_hypothesis_pair(vocab: Vocab, asr1: str, asr2: str) -> list[int]:
    return vocab.encode(asr1) + [SEP] + vocab.encode(asr2) + [EOS]


def encode_text_source(vocab: Vocab, text: str) -> list[int]:
    return vocab.encode(text) + [EOS]


def _teacher_rows(vocab: Vocab, texts: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decoder input (BOS-prefixed), target (EOS-suffixed) and real-position mask."""
    ins, tgts = [], []
    for text in texts:
        ids = vocab.encode(text)
        ins.append([BOS] + ids)
        tgts.append(ids + [EOS])
    dec_in = _pad_batch(ins)
    dec_tgt = _pad_batch(tgts, width=dec_in.shape[1])
    mask = np.zeros_like(dec_tgt, dtype=bool)
    for i, row in enumerate(tgts):
        mask[i, :len(row)] = True
    return dec_in, dec_tgt, mask


def _clip(ids: list[int], limit: int) -> list[int]:
    return ids[:limit] if len(ids) > limit else ids


# ---------------------------------------------------------------------------
# joint loss

def joint_loss_batch(corrector: Seq2SeqParams | None, translator: Seq2SeqParams,
                     vocab: Vocab, samples: list[MathSample], cfg: TrainConfig):
    """Weighted two-stage loss over a batch; returns (L, L_se, L_latex) tensors."""
    for sample in samples:
        if len(sample.asr) < 2:
            raise MissingHypothesesError(f"record {sample.id} has {len(sample.asr)} hypotheses")

    lam1 = float(cfg.lambda_se)
    lam2 = float(cfg.lambda_latex)
    dec_in_lat, dec_tgt_lat, mask_lat = _teacher_rows(vocab, [s.latex for s in samples])

    if cfg.coupling == "translator-only":
        src = _pad_batch([_clip(encode_text_source(vocab, s.hypotheses()[0]), cfg.translator_max_src)
                          for s in samples])
        enc_h, enc_mask = encode_source(translator, src)
        loss_latex = cross_entropy(decode_logits(translator, enc_h, enc_mask, dec_in_lat),
                                   dec_tgt_lat, mask_lat)
        loss_se = Tensor(np.float64(0.0))
        return loss_se * lam1 + loss_latex * lam2, loss_se, loss_latex

    pair_src = _pad_batch([_clip(encode_hypothesis_pair(vocab, *s.hypotheses()[:2]),
                                 cfg.corrector_max_src) for s in samples])
    dec_in_se, dec_tgt_se, mask_se = _teacher_rows(vocab, [s.se for s in samples])
    enc_h, enc_mask = encode_source(corrector, pair_src)
    se_logits = decode_logits(corrector, enc_h, enc_mask, dec_in_se)
    loss_se = cross_entropy(se_logits, dec_tgt_se, mask_se)

    if cfg.coupling == "just-connect":
        src = _pad_batch([_clip(encode_text_source(vocab, s.se), cfg.translator_max_src)
                          for s in samples])
        g_enc, g_mask = encode_source(translator, src)
    else:  # soft or detached: feed the corrector's output distributions
        probs = softmax(se_logits, axis=-1)
        if cfg.coupling == "detached":
            probs = probs.detach()
        g_enc, g_mask = encode_source(translator, probs, src_mask=mask_se)
    loss_latex = cross_entropy(decode_logits(translator, g_enc, g_mask, dec_in_lat),
                               dec_tgt_lat, mask_lat)
    return loss_se * lam1 + loss_latex * lam2, loss_se, loss_latex


def joint_loss(corrector: Seq2SeqParams | None, translator: Seq2SeqParams,
               vocab: Vocab, sample: MathSample, cfg: TrainConfig):
    """Single-record form of joint_loss_batch."""
    return joint_loss_batch(corrector, translator, vocab, [sample], cfg)


# ---------------------------------------------------------------------------
# decoding

def greedy_decode_batch(params: Seq2SeqParams, src_rows: list[list[int]],
                        max_len: int) -> list[list[int]]:
    """Argmax decoding for a whole batch at once; output excludes BOS/EOS."""
    with no_grad():
        src = _pad_batch([_clip(r, params.config.max_src) for r in src_rows])
        enc_h, enc_mask = encode_source(params, src)
        n = len(src_rows)
        seqs = np.full((n, 1), BOS, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        for _ in range(min(max_len, params.config.max_tgt - 1)):
            logits = decode_logits(params, enc_h, enc_mask, seqs)
            nxt = logits.data[:, -1, :].argmax(axis=-1)
            nxt = np.where(done, PAD, nxt)
            seqs = np.concatenate([seqs, nxt[:, None]], axis=1)
            done |= nxt == EOS
            if done.all():
                break
    out = []
    for row in seqs[:, 1:]:
        ids = []
        for token in row:
            if token in (EOS, PAD):
                break
            ids.append(int(token))
        out.append(ids)
    return out


def beam_decode(params: Seq2SeqParams, src_row: list[int], beam_width: int,
                max_len: int) -> list[int]:
    """Beam search over one sequence; beam_width=1 matches greedy decoding."""
    with no_grad():
        src = _pad_batch([_clip(src_row, params.config.max_src)])
        enc_h, enc_mask = encode_source(params, src)
        live: list[tuple[float, tuple[int, ...]]] = [(0.0, (BOS,))]
        finished: list[tuple[float, tuple[int, ...]]] = []
        for _ in range(min(max_len, params.config.max_tgt - 1)):
            candidates: list[tuple[float, tuple[int, ...]]] = []
            seqs = _pad_batch([list(seq) for _, seq in live])
            enc_rep = Tensor(np.repeat(enc_h.data, len(live), axis=0))
            mask_rep = np.repeat(enc_mask, len(live), axis=0)
            logits = decode_logits(params, enc_rep, mask_rep, seqs)
            last = logits.data[:, -1, :]
            log_probs = last - np.log(np.exp(last - last.max(-1, keepdims=True))
                                      .sum(-1, keepdims=True)) - last.max(-1, keepdims=True)
            for (score, seq), row in zip(live, log_probs):
                top = np.argsort(-row, kind="stable")[:beam_width]
                for token in top:
                    candidates.append((score + float(row[token]), seq + (int(token),)))
            candidates.sort(key=lambda c: (-c[0], c[1]))
            live = []
            for score, seq in candidates:
                if seq[-1] == EOS:
                    finished.append((score, seq))
                elif len(live) < beam_width:
                    live.append((score, seq))
                if len(live) >= beam_width and len(finished) >= beam_width:
                    break
            if not live:
                break
        pool = finished or live
        pool.sort(key=lambda c: (-c[0], c[1]))
        best = pool[0][1]
    ids = []
    for token in best[1:]:
        if token in (EOS, PAD):
            break
        ids.append(int(token))
    return ids


def _decode_one(params: Seq2SeqParams, vocab: Vocab, src_row: list[int],
                dc: DecodeConfig) -> str:
    if dc.mode == "beam" and dc.beam_width > 1:
        ids = beam_decode(params, src_row, dc.beam_width, dc.max_len)
    else:
        ids = greedy_decode_batch(params, [src_row], dc.max_len)[0]
    return vocab.decode(ids)


def correct(corrector: Seq2SeqParams, vocab: Vocab, asr1: str, asr2: str,
            dc: DecodeConfig) -> str:
    """Fuse two recognizer hypotheses into a cleaned spoken-English string."""
    if not asr1 or not asr2:
        raise ValueError("both hypotheses must be non-empty")
    return _decode_one(corrector, vocab, encode_hypothesis_pair(vocab, asr1, asr2), dc)


def translate(translator: Seq2SeqParams, vocab: Vocab, se: str, dc: DecodeConfig) -> str:
    """Map spoken English to LaTeX."""
    return _decode_one(translator, vocab, encode_text_source(vocab, se), dc)


def infer(corrector: Seq2SeqParams, translator: Seq2SeqParams, vocab: Vocab,
          asr1: str, asr2: str, dc: DecodeConfig) -> str:
    """Full pipeline: correct, then translate the hard-decoded text."""
    return translate(translator, vocab, correct(corrector, vocab, asr1, asr2, dc), dc)


# ---------------------------------------------------------------------------
# systems (uniform evaluation interface)

class PipelineSystem:
    """Two-stage neural system over a record's first two hypotheses."""

    def __init__(self, corrector, translator, vocab, dc: DecodeConfig, chunk: int = 64):
        self.corrector = corrector
        self.translator = translator
        self.vocab = vocab
        self.dc = dc
        self.chunk = chunk

    def hypotheses(self, samples: list[MathSample]) -> list[str]:
        out = []
        for start in range(0, len(samples), self.chunk):
            batch = samples[start:start + self.chunk]
            if self.dc.mode == "beam" and self.dc.beam_width > 1:
                ses = [correct(self.corrector, self.vocab, *s.hypotheses()[:2], self.dc)
                       for s in batch]
                out.extend(translate(self.translator, self.vocab, se, self.dc) for se in ses)
                continue
            pair_rows = [encode_hypothesis_pair(self.vocab, *s.hypotheses()[:2]) for s in batch]
            ses = [self.vocab.decode(ids)
                   for ids in greedy_decode_batch(self.corrector, pair_rows, self.dc.max_len)]
            text_rows = [encode_text_source(self.vocab, se) for se in ses]
            out.extend(self.vocab.decode(ids)
                       for ids in greedy_decode_batch(self.translator, text_rows, self.dc.max_len))
        return out


class TranslatorOnlySystem:
    """Single-stage baseline: first hypothesis straight to LaTeX."""

    def __init__(self, translator, vocab, dc: DecodeConfig, chunk: int = 64):
        self.translator = translator
        self.vocab = vocab
        self.dc = dc
        self.chunk = chunk

    def hypotheses(self, samples: list[MathSample]) -> list[str]:
        out = []
        for start in range(0, len(samples), self.chunk):
            batch = samples[start:start + self.chunk]
            rows = [encode_text_source(self.vocab, s.hypotheses()[0]) for s in batch]
            if self.dc.mode == "beam" and self.dc.beam_width > 1:
                out.extend(translate(self.translator, self.vocab, s.hypotheses()[0], self.dc)
                           for s in batch)
            else:
                out.extend(self.vocab.decode(ids)
                           for ids in greedy_decode_batch(self.translator, rows, self.dc.max_len))
        return out


class OracleSystem:
    """Symbolic round-trip parser applied to the clean spoken field."""

    def hypotheses(self, samples: list[MathSample]) -> list[str]:
        return [parse_spoken(s.se) for s in samples]


# ---------------------------------------------------------------------------
# training

def _is_validation(sample_id: int, val_fraction: float) -> bool:
    return derive_seed("val-split", sample_id) % 1000 < int(round(val_fraction * 1000))


@dataclass
class TrainedPipeline:
    corrector: Seq2SeqParams | None
    translator: Seq2SeqParams
    vocab: Vocab
    config: TrainConfig
    history: list = field(default_factory=list)

    def system(self, dc: DecodeConfig | None = None):
        dc = dc or DecodeConfig()
        if self.corrector is None:
            return TranslatorOnlySystem(self.translator, self.vocab, dc)
        return PipelineSystem(self.corrector, self.translator, self.vocab, dc)

    def infer(self, asr1: str, asr2: str, dc: DecodeConfig | None = None) -> str:
        dc = dc or DecodeConfig()
        if self.corrector is None:
            return translate(self.translator, self.vocab, asr1, dc)
        return infer(self.corrector, self.translator, self.vocab, asr1, asr2, dc)


def train(corpus: list[MathSample], cfg: TrainConfig,
          log=None) -> TrainedPipeline:
    """End-to-end training; returns the checkpoint with the lowest validation loss."""
    if len(corpus) < 2 * cfg.batch_size:
        raise ValueError(f"corpus of {len(corpus)} records is too small for batch size {cfg.batch_size}")

    vocab = build_vocab(corpus)
    train_set = [s for s in corpus if not _is_validation(s.id, cfg.val_fraction)]
    val_set = [s for s in corpus if _is_validation(s.id, cfg.val_fraction)]
    if not train_set:
        raise ValueError("validation split consumed the whole corpus")

    needs_corrector = cfg.coupling != "translator-only"
    corrector = None
    if needs_corrector:
        corrector = init_seq2seq_params(
            ModelConfig(vocab.size, cfg.d_model, cfg.d_ff,
                        cfg.corrector_max_src, cfg.corrector_max_tgt, cfg.dtype),
            derive_seed(cfg.seed, "corrector-init"))
    translator = init_seq2seq_params(
        ModelConfig(vocab.size, cfg.d_model, cfg.d_ff,
                    cfg.translator_max_src, cfg.translator_max_tgt, cfg.dtype),
        derive_seed(cfg.seed, "translator-init"))

    state_c, state_t = AdamState(), AdamState()
    steps_per_epoch = cfg.steps_per_epoch or max(1, len(train_set) // cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    history: list[dict] = []
    best = None  # (val_loss, corrector copy, translator copy)
    step = 0

    for epoch in range(cfg.epochs):
        batches = _epoch_batches(train_set, cfg, epoch, steps_per_epoch)
        sums = {"loss": 0.0, "loss_se": 0.0, "loss_latex": 0.0}
        for b in range(steps_per_epoch):
            batch = next(batches)
            loss, loss_se, loss_latex = joint_loss_batch(corrector, translator, vocab, batch, cfg)
            if not np.isfinite(loss.data):
                raise DivergedError(f"non-finite loss at epoch {epoch} step {b}")
            loss.backward()
            lr = linear_lr(step, total_steps, cfg.lr_max, cfg.lr_min)
            if corrector is not None:
                _optimizer_step(corrector, state_c, lr)
            _optimizer_step(translator, state_t, lr)
            step += 1
            sums["loss"] += loss.item()
            sums["loss_se"] += loss_se.item()
            sums["loss_latex"] += loss_latex.item()

        record = {k: v / steps_per_epoch for k, v in sums.items()}
        record["epoch"] = epoch
        record["val_loss"] = _validation_loss(corrector, translator, vocab, val_set, cfg)
        record["val_cer"] = _validation_cer(corrector, translator, vocab, val_set, cfg)
        history.append(record)
        if log:
            log(f"epoch {epoch}: loss={record['loss']:.4f} "
                f"se={record['loss_se']:.4f} latex={record['loss_latex']:.4f} "
                f"val_loss={record['val_loss']:.4f} val_cer={record['val_cer']:.4f}")
        # no validation split: fall back to training loss for model selection
        selection = record["val_loss"] if val_set else record["loss"]
        if best is None or selection < best[0]:
            best = (selection,
                    corrector.copy() if corrector is not None else None,
                    translator.copy())

    return TrainedPipeline(best[1], best[2], vocab, cfg, history)


def _optimizer_step(params: Seq2SeqParams, state: AdamState, lr: float) -> None:
    adam_step(params, params.grads(), state, lr)
    params.zero_grad()


def _record_width(sample: MathSample) -> int:
    return len(sample.se) + len(sample.latex) + sum(len(t) for t in sample.asr.values())


def _epoch_batches(train_set, cfg: TrainConfig, epoch: int, steps: int):
    """Yield `steps` batches, reshuffling whenever the corpus is exhausted.

    Records are bucketed by length so a batch is not padded to the corpus
    maximum; batch order is shuffled.
    """
    import random as _random
    batches: list[list[int]] = []
    refill = 0
    while True:
        if not batches:
            rng = _random.Random(derive_seed(cfg.seed, "order", epoch, refill))
            order = list(range(len(train_set)))
            rng.shuffle(order)
            order.sort(key=lambda i: _record_width(train_set[i]))  # stable: ties stay shuffled
            batches = [order[p:p + cfg.batch_size]
                       for p in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size)]
            if not batches:
                batches = [order]
            rng.shuffle(batches)
            refill += 1
        yield [train_set[i] for i in batches.pop()]


def _validation_loss(corrector, translator, vocab, val_set, cfg) -> float:
    if not val_set:
        return float("nan")
    total = 0.0
    count = 0
    with no_grad():
        for start in range(0, len(val_set), cfg.batch_size):
            batch = val_set[start:start + cfg.batch_size]
            loss, _, _ = joint_loss_batch(corrector, translator, vocab, batch, cfg)
            total += loss.item() * len(batch)
            count += len(batch)
    return total / count


def _validation_cer(corrector, translator, vocab, val_set, cfg) -> float:
    from .metrics import cer
    if not val_set:
        return float("nan")
    probe = val_set[:cfg.val_cer_samples]
    dc = DecodeConfig(max_len=cfg.translator_max_tgt - 1)
    if corrector is None:
        system = TranslatorOnlySystem(translator, vocab, dc)
    else:
        system = PipelineSystem(corrector, translator, vocab, dc)
    hyps = system.hypotheses(probe)
    scores = [cer(h, s.latex) for h, s in zip(hyps, probe)]
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# persistence

PIPELINE_VERSION = 1


def save_pipeline(pipeline: TrainedPipeline, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab_hash = hashlib.sha256(pipeline.vocab.chars.encode("utf-8")).hexdigest()
    manifest = {
        "version": PIPELINE_VERSION,
        "coupling": pipeline.config.coupling,
        "vocab": pipeline.vocab.chars,
        "vocab_sha256": vocab_hash,
        "config": asdict(pipeline.config),
        "corrector": "corrector.npz" if pipeline.corrector is not None else None,
        "translator": "translator.npz",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    if pipeline.corrector is not None:
        save_params(pipeline.corrector, out / "corrector.npz")
    save_params(pipeline.translator, out / "translator.npz")
    (out / "history.json").write_text(json.dumps(pipeline.history, indent=2) + "\n",
                                      encoding="utf-8")


def load_pipeline(model_dir) -> TrainedPipeline:
    root = Path(model_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no pipeline manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest["version"] != PIPELINE_VERSION:
        raise ValueError(f"unsupported pipeline version {manifest['version']}")
    vocab = Vocab(manifest["vocab"])
    expected = hashlib.sha256(vocab.chars.encode("utf-8")).hexdigest()
    if manifest["vocab_sha256"] != expected:
        raise ValueError("vocab hash mismatch in manifest")
    cfg = TrainConfig(**manifest["config"])
    corrector = load_params(root / manifest["corrector"]) if manifest["corrector"] else None
    translator = load_params(root / manifest["translator"])
    history = []
    history_path = root / "history.json"
    if history_path.exists():
        history = json.loads(history_path.read_text(encoding="utf-8"))
    return TrainedPipeline(corrector, translator, vocab, cfg, history)
