"""Deterministic spoken-English -> LaTeX parser.

This is the symbolic counterpart of the learned translator: on clean
verbalizer output it always succeeds and reproduces the source LaTeX, which
makes it the round-trip oracle for the whole synthetic corpus.  On
channel-corrupted text it may (and should) fail loudly.

Parsing is case-insensitive and the emitted LaTeX uses lowercase
identifiers throughout.
"""

from __future__ import annotations

from . import latex as lx
from .lexicon import (
    FUNCTION_WORDS,
    KNOWN_WORDS,
    LETTER_WORDS,
    ONES_VALUE,
    TENS_VALUE,
    merge_phrases,
)


class SpokenParseError(Exception):
    """Base class for spoken-parser failures."""


class UnknownWordError(SpokenParseError):
    def __init__(self, word: str):
        super().__init__(f"unknown word: {word!r}")
        self.word = word


class AmbiguousParseError(SpokenParseError):
    def __init__(self, position: int, message: str):
        super().__init__(f"at word {position}: {message}")
        self.position = position


def _tokenize(se: str) -> list[str]:
    words: list[str] = []
    for raw in se.lower().split():
        while raw.startswith(","):
            words.append(",")
            raw = raw[1:]
        trailing = 0
        while raw.endswith(","):
            trailing += 1
            raw = raw[:-1]
        if raw:
            words.append(raw)
        words.extend([","] * trailing)
    tokens = merge_phrases(words)
    for tok in tokens:
        if tok not in KNOWN_WORDS and not tok.isdigit():
            raise UnknownWordError(tok)
    return tokens


class _Stream:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise AmbiguousParseError(self.i, "unexpected end of input")
        self.i += 1
        return tok

    def expect(self, token: str) -> None:
        tok = self.next()
        if tok != token:
            raise AmbiguousParseError(self.i - 1, f"expected {token!r}, found {tok!r}")

    def take(self, token: str) -> bool:
        if self.peek() == token:
            self.i += 1
            return True
        return False


_PRIMARY_STARTERS = frozenset(
    {"open parenthesis", "the quantity", "the fraction"}
) | LETTER_WORDS | frozenset(lx.GREEK_NAMES) | frozenset(FUNCTION_WORDS) \
    | frozenset(ONES_VALUE) | frozenset(TENS_VALUE)


def _starts_factor(tok: str | None) -> bool:
    return tok is not None and (tok in _PRIMARY_STARTERS or tok.isdigit())


def parse_spoken_ast(se: str) -> lx.Node:
    """Parse spoken English into a math AST."""
    stream = _Stream(_tokenize(se))
    node = _parse_seq(stream)
    if stream.peek() is not None:
        raise AmbiguousParseError(stream.i, f"trailing {stream.peek()!r}")
    return node


def parse_spoken(se: str) -> str:
    """Parse spoken English and return canonical (undelimited) LaTeX."""
    return lx.render_latex(parse_spoken_ast(se))


def _parse_seq(s: _Stream) -> lx.Node:
    items = [_parse_rel(s)]
    while s.take(","):
        items.append(_parse_rel(s))
    return items[0] if len(items) == 1 else lx.Seq(tuple(items))


def _parse_rel(s: _Stream) -> lx.Node:
    node = _parse_sum(s)
    while s.take("equals"):
        node = lx.BinOp("=", node, _parse_sum(s))
    return node


def _parse_sum(s: _Stream, allow_over: bool = True) -> lx.Node:
    # inside a "the fraction ... end fraction" block the single bare "over"
    # belongs to the block, so its operands skip the over level
    operand = _parse_over if allow_over else _parse_product
    node = operand(s)
    while (tok := s.peek()) in ("plus", "minus"):
        s.next()
        node = lx.BinOp("+" if tok == "plus" else "-", node, operand(s))
    return node


def _parse_over(s: _Stream) -> lx.Node:
    node = _parse_product(s)
    while s.take("over"):
        node = lx.Frac(node, _parse_product(s))
    return node


def _parse_product(s: _Stream) -> lx.Node:
    node = _parse_scripted(s)
    while True:
        if s.take("times"):
            node = lx.BinOp("*", node, _parse_scripted(s))
        elif _starts_factor(s.peek()):
            node = lx.BinOp("*", node, _parse_scripted(s))
        else:
            return node


def _parse_scripted(s: _Stream) -> lx.Node:
    node = _parse_primary(s)
    while True:
        tok = s.peek()
        if tok == "sub":
            s.next()
            node = lx.Sub(node, _parse_subscript_operand(s))
        elif tok == "to the power of":
            s.next()
            node = lx.Pow(node, _parse_product(s))
        elif tok == "squared":
            s.next()
            node = lx.Pow(node, lx.Number("2"))
        elif tok == "cubed":
            s.next()
            node = lx.Pow(node, lx.Number("3"))
        elif tok == "of":
            if not lx.applicable_head(node):
                raise AmbiguousParseError(s.i, "'of' after something that is not a function")
            s.next()
            return lx.Apply(node, _parse_scripted(s))
        else:
            break
    if isinstance(node, lx.Function):
        raise AmbiguousParseError(s.i, "function name without 'of'")
    return node


def _parse_primary(s: _Stream) -> lx.Node:
    tok = s.next()
    if tok.isdigit():
        return lx.Number(tok)
    if tok in ONES_VALUE or tok in TENS_VALUE:
        return lx.Number(str(_munch_number(s, tok)))
    if tok in LETTER_WORDS:
        return lx.Variable(tok)
    if tok in lx.GREEK_NAMES:
        return lx.Greek(tok)
    if tok in FUNCTION_WORDS:
        return lx.Function(FUNCTION_WORDS[tok])
    if tok == "the quantity":
        inner = _parse_seq(s)
        s.expect("end quantity")
        return inner  # disambiguation markers are transparent
    if tok == "open parenthesis":
        inner = _parse_seq(s)
        s.expect("close parenthesis")
        return lx.Group(inner)
    if tok == "the fraction":
        num = _parse_sum(s, allow_over=False)
        s.expect("over")
        den = _parse_sum(s, allow_over=False)
        s.expect("end fraction")
        return lx.Frac(num, den)
    raise AmbiguousParseError(s.i - 1, f"unexpected {tok!r}")


def _munch_number(s: _Stream, first: str) -> int:
    if first in ONES_VALUE:
        return ONES_VALUE[first]
    value = TENS_VALUE[first]
    nxt = s.peek()
    if nxt in ONES_VALUE and 1 <= ONES_VALUE[nxt] <= 9:
        s.next()
        value += ONES_VALUE[nxt]
    return value


def _parse_subscript_operand(s: _Stream) -> lx.Node:
    tok = s.peek()
    if tok is None:
        raise AmbiguousParseError(s.i, "missing subscript")
    if tok in ("the quantity", "open parenthesis", "the fraction"):
        node = _parse_primary(s)
    elif tok.isdigit() or tok in ONES_VALUE or tok in TENS_VALUE \
            or tok in LETTER_WORDS or tok in lx.GREEK_NAMES:
        node = _parse_primary(s)
    else:
        raise AmbiguousParseError(s.i, f"bad subscript {tok!r}")
    if s.take("sub"):
        return lx.Sub(node, _parse_subscript_operand(s))
    return node
