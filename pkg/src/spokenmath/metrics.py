"""Evaluation metrics for LaTeX output: CER, WER, BLEU, ROUGE-1, ROUGE-L.

CER follows the convention that LaTeX spacing is meaningless: both strings
are normalized (all whitespace removed, outer '$' stripped) before the
character-level edit distance is taken.  BLEU and the ROUGE variants
operate on LaTeX tokens of the normalized strings, so a wrong command
counts as one error rather than many character errors.

Conventions pinned here because they change absolute scores:

* BLEU: modified n-gram precision for n = 1..4, uniform weights over the
  orders the hypothesis actually has (orders with zero hypothesis n-grams
  are dropped), add-one smoothing on zero match counts, brevity penalty
  exp(1 - r/c) when c < r.
* ROUGE-1/ROUGE-L: balanced F1 from clipped unigram counts / LCS length.
* Corpus scores are macro-averages over samples; BLEU is additionally
  reported corpus-level (aggregated counts).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass

from .latex import normalize_latex, tokenize_latex


class EmptyReferenceError(Exception):
    pass


def edit_distance(a, b) -> int:
    """Levenshtein distance between two sequences (strings or token lists)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (x != y)))
        previous = current
    return previous[len(b)]


def cer(hyp: str, ref: str) -> float:
    """Character error rate on normalized LaTeX; may exceed 1."""
    hyp_n = normalize_latex(hyp)
    ref_n = normalize_latex(ref)
    if not ref_n:
        raise EmptyReferenceError("reference is empty after normalization")
    return edit_distance(hyp_n, ref_n) / len(ref_n)


def wer(hyp: str, ref: str) -> float:
    """Word error rate over whitespace tokens."""
    ref_words = ref.split()
    if not ref_words:
        raise EmptyReferenceError("reference has no words")
    return edit_distance(hyp.split(), ref_words) / len(ref_words)


def latex_tokens(s: str) -> list[str]:
    """Token texts of the normalized string; the unit BLEU/ROUGE score over.

    Brace balance is not enforced: hypotheses are raw model output and must
    still be scoreable.
    """
    return [t.text for t in tokenize_latex(normalize_latex(s), check_braces=False)]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_counts(hyp_tokens: list[str], ref_tokens: list[str]) -> list[tuple[int, int]]:
    """(clipped matches, hypothesis n-gram count) for n = 1..4."""
    out = []
    for n in range(1, 5):
        hyp_ngrams = _ngram_counts(hyp_tokens, n)
        ref_ngrams = _ngram_counts(ref_tokens, n)
        matched = sum(min(count, ref_ngrams[gram]) for gram, count in hyp_ngrams.items())
        out.append((matched, sum(hyp_ngrams.values())))
    return out


def _bleu_from_counts(counts: list[tuple[int, int]], hyp_len: int, ref_len: int) -> float:
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for matched, total in counts:
        if total == 0:
            continue
        orders += 1
        if matched == 0:
            log_sum += math.log((matched + 1) / (total + 1))
        else:
            log_sum += math.log(matched / total)
    if orders == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_sum / orders)


def bleu(hyp_tokens: list[str], ref_tokens: list[str]) -> float:
    """Smoothed BLEU-4 over token sequences, in [0, 1]."""
    if not ref_tokens:
        raise EmptyReferenceError("reference token sequence is empty")
    return _bleu_from_counts(bleu_counts(hyp_tokens, ref_tokens),
                             len(hyp_tokens), len(ref_tokens))


def rouge1(hyp_tokens: list[str], ref_tokens: list[str]) -> float:
    """Unigram-overlap F1 with clipped counts."""
    if not ref_tokens:
        raise EmptyReferenceError("reference token sequence is empty")
    if not hyp_tokens:
        return 0.0
    overlap = sum((Counter(hyp_tokens) & Counter(ref_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(hyp_tokens)
    recall = overlap / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def lcs_length(a: list[str], b: list[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rougeL(hyp_tokens: list[str], ref_tokens: list[str]) -> float:
    """Longest-common-subsequence F1."""
    if not ref_tokens:
        raise EmptyReferenceError("reference token sequence is empty")
    if not hyp_tokens:
        return 0.0
    lcs = lcs_length(hyp_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(hyp_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# corpus-level evaluation

@dataclass(frozen=True)
class EvalReport:
    cer: float
    wer: float
    bleu: float
    rouge1_f: float
    rougeL_f: float
    exact_match_rate: float
    corpus_bleu: float
    samples: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def row(self) -> dict:
        return asdict(self)


TABLE_COLUMNS = ("CER", "ROUGE-1", "ROUGE-L", "BLEU")


def format_report_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table in the conventional column order."""
    header = f"{'system':<20}" + "".join(f"{c:>10}" for c in TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    for name, report in rows:
        values = (report.cer, report.rouge1_f, report.rougeL_f, report.bleu)
        lines.append(f"{name:<20}" + "".join(f"{v:>10.3f}" for v in values))
    return "\n".join(lines)


def evaluate_hypotheses(hyps: list[str], refs: list[str]) -> EvalReport:
    """Score aligned hypothesis/reference LaTeX lists."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch")
    if not refs:
        raise EmptyReferenceError("no references to evaluate against")
    cers, wers, bleus, r1s, rls = [], [], [], [], []
    exact = 0
    agg_counts = [(0, 0)] * 4
    agg_hyp_len = agg_ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_n, ref_n = normalize_latex(hyp), normalize_latex(ref)
        cers.append(cer(hyp, ref))
        hyp_toks, ref_toks = latex_tokens(hyp), latex_tokens(ref)
        wers.append(edit_distance(hyp_toks, ref_toks) / len(ref_toks))
        bleus.append(bleu(hyp_toks, ref_toks))
        r1s.append(rouge1(hyp_toks, ref_toks))
        rls.append(rougeL(hyp_toks, ref_toks))
        exact += hyp_n == ref_n
        counts = bleu_counts(hyp_toks, ref_toks)
        agg_counts = [(m + dm, t + dt) for (m, t), (dm, dt) in zip(agg_counts, counts)]
        agg_hyp_len += len(hyp_toks)
        agg_ref_len += len(ref_toks)
    n = len(refs)
    return EvalReport(
        cer=sum(cers) / n,
        wer=sum(wers) / n,
        bleu=sum(bleus) / n,
        rouge1_f=sum(r1s) / n,
        rougeL_f=sum(rls) / n,
        exact_match_rate=exact / n,
        corpus_bleu=_bleu_from_counts(agg_counts, agg_hyp_len, agg_ref_len),
        samples=n,
    )


def evaluate_corpus(system, corpus, dc=None) -> EvalReport:
    """Run a system over the corpus and score it against the latex field.

    The system either exposes hypotheses(samples) or is a callable mapping
    one sample to a hypothesis string.
    """
    if hasattr(system, "hypotheses"):
        hyps = system.hypotheses(corpus)
    else:
        hyps = [system(sample) for sample in corpus]
    return evaluate_hypotheses(hyps, [s.latex for s in corpus])
