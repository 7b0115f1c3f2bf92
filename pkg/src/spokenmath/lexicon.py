"""Shared spoken-math vocabulary: one grammar definition for the verbalizer
and the spoken parser, so their round-trip agreement is structural.
"""

from __future__ import annotations

from .latex import FUNCTION_NAMES, GREEK_NAMES

# multi-word units, merged longest-first before parsing
PHRASES = (
    "to the power of",
    "open parenthesis",
    "close parenthesis",
    "the quantity",
    "end quantity",
    "the fraction",
    "end fraction",
    "natural log",
)

# spoken name -> latex function command
FUNCTION_WORDS = {
    "sine": "sin",
    "cosine": "cos",
    "tangent": "tan",
    "log": "log",
    "natural log": "ln",
    "exponential": "exp",
}
FUNCTION_NAME_TO_WORD = {v: k for k, v in FUNCTION_WORDS.items()}

OPERATOR_WORDS = ("plus", "minus", "equals", "times", "over", "sub", "of", "squared", "cubed")

ONES_WORDS = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen",
)
TENS_WORDS = ("twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety")

ONES_VALUE = {w: i for i, w in enumerate(ONES_WORDS)}
TENS_VALUE = {w: 20 + 10 * i for i, w in enumerate(TENS_WORDS)}
NUMBER_WORDS = frozenset(ONES_VALUE) | frozenset(TENS_VALUE)

LETTER_WORDS = frozenset("abcdefghijklmnopqrstuvwxyz")

KNOWN_WORDS = (
    LETTER_WORDS
    | frozenset(GREEK_NAMES)
    | frozenset(FUNCTION_WORDS)
    | frozenset(OPERATOR_WORDS)
    | NUMBER_WORDS
    | frozenset(PHRASES)
    | {","}
)


def number_to_words(n: int) -> list[str]:
    """Spell 0..99 as spoken words, e.g. 23 -> ['twenty', 'three']."""
    if not 0 <= n <= 99:
        raise ValueError(f"number out of spoken range: {n}")
    if n < 20:
        return [ONES_WORDS[n]]
    tens, ones = divmod(n, 10)
    words = [TENS_WORDS[tens - 2]]
    if ones:
        words.append(ONES_WORDS[ones])
    return words


def merge_phrases(words: list[str]) -> list[str]:
    """Collapse multi-word phrases into single tokens, longest match first."""
    by_length = sorted(PHRASES, key=lambda p: -len(p.split()))
    out: list[str] = []
    i = 0
    while i < len(words):
        for phrase in by_length:
            parts = phrase.split()
            if words[i:i + len(parts)] == parts:
                out.append(phrase)
                i += len(parts)
                break
        else:
            out.append(words[i])
            i += 1
    return out


# digit<->word pairs that a noise channel may swap without changing meaning;
# single-word numbers only, so word-by-word rewriting stays semantics-safe
EQUIVALENT_FORMS: dict[str, str] = {}
for _w, _v in list(ONES_VALUE.items()) + list(TENS_VALUE.items()):
    EQUIVALENT_FORMS[_w] = str(_v)
    EQUIVALENT_FORMS[str(_v)] = _w

assert FUNCTION_NAME_TO_WORD.keys() == set(FUNCTION_NAMES)
