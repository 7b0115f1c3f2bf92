"""Metric tests against independent oracles.

Every expected value here is either trivially known (identity, disjoint) or
was computed by the plain-DP / counting oracles defined at the top of this
file, which share no code with the implementations under test.
"""

import math
import random
from functools import lru_cache

import pytest

from spokenmath.metrics import (
    EmptyReferenceError,
    bleu,
    cer,
    edit_distance,
    evaluate_hypotheses,
    format_report_table,
    latex_tokens,
    lcs_length,
    rouge1,
    rougeL,
    wer,
)


# ---------------------------------------------------------------------------
# oracles: full-matrix DP and explicit counting, written independently

def oracle_edit_distance(a, b):
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        table[i][0] = i
    for j in range(n + 1):
        table[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(table[i - 1][j] + 1,
                              table[i][j - 1] + 1,
                              table[i - 1][j - 1] + cost)
    return table[m][n]


def oracle_bleu(hyp, ref):
    if len(hyp) == 0:
        return 0.0
    logs = []
    for n in range(1, 5):
        hyp_grams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
        ref_grams = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
        if not hyp_grams:
            continue
        matched = 0
        available = list(ref_grams)
        for gram in hyp_grams:
            if gram in available:
                available.remove(gram)
                matched += 1
        if matched == 0:
            logs.append(math.log((matched + 1) / (len(hyp_grams) + 1)))
        else:
            logs.append(math.log(matched / len(hyp_grams)))
    if not logs:
        return 0.0
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return bp * math.exp(sum(logs) / len(logs))


def oracle_lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def oracle_rouge1(hyp, ref):
    matched = 0
    available = list(ref)
    for token in hyp:
        if token in available:
            available.remove(token)
            matched += 1
    if matched == 0 or not hyp:
        return 0.0
    p, r = matched / len(hyp), matched / len(ref)
    return 2 * p * r / (p + r)


def _random_latex(rng):
    pieces = ["x", "y", "2", "10", "\\alpha", "\\frac{1}{2}", "x_0", "y^2",
              "\\cos(x)", "+z", "-1", "=0", "(a+b)"]
    return "".join(rng.choice(pieces) for _ in range(rng.randint(1, 6)))


# ---------------------------------------------------------------------------
# CER / WER

def test_cer_space_invariance():
    assert cer("$A B$", "$AB$") == 0.0


def test_cer_identity():
    assert cer("x", "x") == 0.0


def test_cer_single_substitution():
    # edit distance 1 over reference length 10
    assert cer("x+5y+10z=0", "x+5y+10y=0") == pytest.approx(0.1)


def test_cer_can_exceed_one():
    assert cer("abcdefgh", "x") == 8.0


def test_cer_empty_reference():
    with pytest.raises(EmptyReferenceError):
        cer("x", "$ $")


def test_wer_identity_and_single_edit():
    assert wer("a b c", "a b c") == 0.0
    ref = " ".join(f"w{i}" for i in range(10))
    hyp = ref.replace("w3", "q")
    assert wer(hyp, ref) == pytest.approx(0.1)


def test_wer_empty_reference():
    with pytest.raises(EmptyReferenceError):
        wer("a", "   ")


def test_edit_distance_matches_dp_oracle():
    rng = random.Random(7)
    alphabet = "abcx+="
    for _ in range(100):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
        assert edit_distance(a, b) == oracle_edit_distance(a, b)


def test_edit_distance_metric_properties():
    rng = random.Random(3)
    strings = ["".join(rng.choice("ab+") for _ in range(rng.randint(0, 8))) for _ in range(12)]
    for a in strings:
        for b in strings:
            d = edit_distance(a, b)
            assert d == edit_distance(b, a)
            assert (d == 0) == (a == b)
            for c in strings:
                assert edit_distance(a, c) <= d + edit_distance(b, c)


# ---------------------------------------------------------------------------
# BLEU

def test_bleu_identity():
    toks = latex_tokens("e^{ix}=\\cos(x)+i\\sin(x)")
    assert bleu(toks, toks) == pytest.approx(1.0)


def test_bleu_identity_short():
    # shorter than the max n-gram order still scores 1 against itself
    assert bleu(["x", "+"], ["x", "+"]) == pytest.approx(1.0)


def test_bleu_disjoint_matches_hand_formula():
    hyp = latex_tokens("a+b")
    ref = latex_tokens("x-y")
    # p1=1/4, p2=1/3, p3=1/2 smoothed; no 4-grams; BP=1
    expected = (0.25 * (1 / 3) * 0.5) ** (1 / 3)
    assert bleu(hyp, ref) == pytest.approx(expected)
    assert bleu(hyp, ref) == pytest.approx(0.34668063544441086)


def test_bleu_against_counting_oracle():
    rng = random.Random(11)
    for _ in range(100):
        hyp = latex_tokens(_random_latex(rng))
        ref = latex_tokens(_random_latex(rng))
        assert bleu(hyp, ref) == pytest.approx(oracle_bleu(hyp, ref), abs=1e-9)


def test_bleu_bounded():
    rng = random.Random(13)
    for _ in range(50):
        hyp = latex_tokens(_random_latex(rng))
        ref = latex_tokens(_random_latex(rng))
        assert 0.0 <= bleu(hyp, ref) <= 1.0


def test_bleu_empty_reference():
    with pytest.raises(EmptyReferenceError):
        bleu(["x"], [])


# ---------------------------------------------------------------------------
# ROUGE

def test_rouge_identity():
    toks = latex_tokens("\\frac{1}{2}+x_0")
    assert rouge1(toks, toks) == pytest.approx(1.0)
    assert rougeL(toks, toks) == pytest.approx(1.0)


def test_rouge_disjoint():
    assert rouge1(["a"], ["b"]) == 0.0
    assert rougeL(["a"], ["b"]) == 0.0


def test_rouge1_against_oracle():
    rng = random.Random(17)
    for _ in range(100):
        hyp = latex_tokens(_random_latex(rng))
        ref = latex_tokens(_random_latex(rng))
        assert rouge1(hyp, ref) == pytest.approx(oracle_rouge1(hyp, ref), abs=1e-9)


def test_rougeL_against_recursive_oracle():
    rng = random.Random(19)
    for _ in range(100):
        hyp = latex_tokens(_random_latex(rng))
        ref = latex_tokens(_random_latex(rng))
        lcs = oracle_lcs(tuple(hyp), tuple(ref))
        assert lcs_length(hyp, ref) == lcs
        if lcs and hyp:
            p, r = lcs / len(hyp), lcs / len(ref)
            assert rougeL(hyp, ref) == pytest.approx(2 * p * r / (p + r), abs=1e-9)


def test_lcs_at_most_clipped_unigram_overlap():
    rng = random.Random(23)
    for _ in range(200):
        hyp = latex_tokens(_random_latex(rng))
        ref = latex_tokens(_random_latex(rng))
        clipped = 0
        available = list(ref)
        for token in hyp:
            if token in available:
                available.remove(token)
                clipped += 1
        assert lcs_length(hyp, ref) <= clipped


def test_metrics_whitespace_invariance():
    a, b = "\\frac {1} {2} + x", "\\frac{1}{2}+x"
    assert cer(a, b) == 0.0
    assert latex_tokens(a) == latex_tokens(b)


# ---------------------------------------------------------------------------
# corpus aggregation

def test_evaluate_perfect_system():
    refs = ["x+1", "\\frac{1}{2}", "e^{ix}=\\cos(x)+i\\sin(x)"]
    report = evaluate_hypotheses(list(refs), refs)
    assert report.cer == 0.0
    assert report.wer == 0.0
    assert report.bleu == pytest.approx(1.0)
    assert report.rouge1_f == pytest.approx(1.0)
    assert report.rougeL_f == pytest.approx(1.0)
    assert report.exact_match_rate == 1.0
    assert report.corpus_bleu == pytest.approx(1.0)
    assert report.samples == 3


def test_evaluate_mixed():
    report = evaluate_hypotheses(["x+1", "y"], ["x+1", "x"])
    assert report.exact_match_rate == 0.5
    assert 0.0 < report.cer


def test_report_table_format():
    report = evaluate_hypotheses(["x"], ["x"])
    table = format_report_table([("oracle", report)])
    header = table.splitlines()[0]
    assert header.split() == ["system", "CER", "ROUGE-1", "ROUGE-L", "BLEU"]


def test_report_json_round_trip():
    import json

    report = evaluate_hypotheses(["x"], ["x"])
    payload = json.loads(report.to_json())
    assert payload["samples"] == 1
    assert payload["exact_match_rate"] == 1.0
