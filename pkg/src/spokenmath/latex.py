"""Tokenizer, parser, renderer and normalizer for a small LaTeX math subset.

The supported grammar covers single-letter variables, multi-digit numbers,
lowercase Greek letters by command name, ``+ - = /``, implicit and explicit
(``\\times``) multiplication, parenthesized groups, comma sequences,
``\\frac{}{}``, sub/superscripts (braces optional for single tokens), the
named functions ``\\sin \\cos \\tan \\log \\ln \\exp`` and generic ``f(x)``
application.

Two conventions worth knowing:

* Curly braces are *transparent* grouping: they shape the parse but produce
  no AST node, so the renderer can emit structure-preserving output for any
  tree (e.g. ``a+{b+c}`` for a right-nested sum).  Parentheses are *visible*
  and produce a ``Group`` node.
* A backslash followed by letters is matched against the known command
  lexicon longest-prefix-first, so canonical spaceless output such as
  ``\\phix`` splits back into ``\\phi`` and ``x``.  A letter run with no
  known prefix becomes a single unknown command token.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

GREEK_NAMES = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "pi", "rho", "sigma",
    "tau", "upsilon", "phi", "chi", "psi", "omega",
)

FUNCTION_NAMES = ("sin", "cos", "tan", "log", "ln", "exp")

# every \command the parser understands; the tokenizer prefers the longest
# of these as a prefix of a letter run
KNOWN_COMMANDS = frozenset(GREEK_NAMES) | frozenset(FUNCTION_NAMES) | {"frac", "times"}


class LatexError(Exception):
    """Base class for all latex tokenize/parse failures."""


class UnbalancedBraceError(LatexError):
    pass


class UnsupportedConstructError(LatexError):
    def __init__(self, token: str):
        super().__init__(f"unsupported construct: {token!r}")
        self.token = token


class LatexSyntaxError(LatexError):
    def __init__(self, position: int, message: str):
        super().__init__(f"at {position}: {message}")
        self.position = position


# ---------------------------------------------------------------------------
# tokens

TOKEN_KINDS = (
    "command", "symbol", "digit-run", "letter", "brace-open", "brace-close",
    "subscript-marker", "superscript-marker", "delimiter",
)


@dataclass(frozen=True)
class LatexToken:
    kind: str
    text: str
    pos: int


def tokenize_latex(src: str, check_braces: bool = True) -> list[LatexToken]:
    """Split a LaTeX string into tokens; whitespace separates but emits nothing.

    Raises UnbalancedBraceError if brace depth goes negative or ends nonzero;
    pass check_braces=False to lex malformed text (e.g. raw model output)
    anyway.
    """
    tokens: list[LatexToken] = []
    depth = 0
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c == "\\":
            j = i + 1
            while j < n and src[j].isalpha():
                j += 1
            run = src[i + 1:j]
            if not run:
                # control symbol such as "\," — keep the two chars together,
                # but never swallow whitespace into a token
                if i + 1 < n and not src[i + 1].isspace():
                    text = src[i:i + 2]
                else:
                    text = "\\"
                tokens.append(LatexToken("command", text, i))
                i += len(text)
                continue
            match = None
            for k in range(len(run), 0, -1):
                if run[:k] in KNOWN_COMMANDS:
                    match = run[:k]
                    break
            if match is None:
                match = run
            tokens.append(LatexToken("command", "\\" + match, i))
            i += 1 + len(match)
        elif c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            tokens.append(LatexToken("digit-run", src[i:j], i))
            i = j
        elif c.isalpha():
            tokens.append(LatexToken("letter", c, i))
            i += 1
        elif c == "{":
            depth += 1
            tokens.append(LatexToken("brace-open", c, i))
            i += 1
        elif c == "}":
            depth -= 1
            if depth < 0 and check_braces:
                raise UnbalancedBraceError(f"unmatched '}}' at {i}")
            tokens.append(LatexToken("brace-close", c, i))
            i += 1
        elif c == "_":
            tokens.append(LatexToken("subscript-marker", c, i))
            i += 1
        elif c == "^":
            tokens.append(LatexToken("superscript-marker", c, i))
            i += 1
        elif c in "()$":
            tokens.append(LatexToken("delimiter", c, i))
            i += 1
        else:
            tokens.append(LatexToken("symbol", c, i))
            i += 1
    if depth != 0 and check_braces:
        raise UnbalancedBraceError(f"{depth} unclosed brace(s)")
    return tokens


def normalize_latex(src: str) -> str:
    """Strip all whitespace and any leading/trailing '$' delimiters."""
    return "".join(src.split()).strip("$")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Number:
    digits: str


@dataclass(frozen=True)
class Variable:
    name: str  # single letter, case preserved


@dataclass(frozen=True)
class Greek:
    name: str  # e.g. "phi"


@dataclass(frozen=True)
class Function:
    name: str  # one of FUNCTION_NAMES; appears only as Apply.func


@dataclass(frozen=True)
class BinOp:
    op: str  # one of "+", "-", "=", "*", "/"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Frac:
    num: "Node"
    den: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exp: "Node"


@dataclass(frozen=True)
class Sub:
    base: "Node"
    script: "Node"


@dataclass(frozen=True)
class Apply:
    func: "Node"  # Variable, Greek, Sub over those, or Function
    arg: "Node"


@dataclass(frozen=True)
class Group:
    inner: "Node"


@dataclass(frozen=True)
class Seq:
    items: tuple["Node", ...]  # >= 2 comma-separated expressions


Node = Union[Number, Variable, Greek, Function, BinOp, Frac, Pow, Sub, Apply, Group, Seq]

BINARY_OPS = ("+", "-", "=", "*", "/")


def validate_ast(node: Node) -> None:
    """Check the structural invariants; raises ValueError on violation."""
    if isinstance(node, Number):
        if not node.digits or not node.digits.isdigit():
            raise ValueError(f"number must be a non-empty digit run: {node.digits!r}")
    elif isinstance(node, Variable):
        if len(node.name) != 1 or not node.name.isalpha():
            raise ValueError(f"variable must be a single letter: {node.name!r}")
    elif isinstance(node, Greek):
        if node.name not in GREEK_NAMES:
            raise ValueError(f"unknown greek letter: {node.name!r}")
    elif isinstance(node, Function):
        if node.name not in FUNCTION_NAMES:
            raise ValueError(f"unknown function: {node.name!r}")
    elif isinstance(node, BinOp):
        if node.op not in BINARY_OPS:
            raise ValueError(f"unknown operator: {node.op!r}")
        validate_ast(node.left)
        validate_ast(node.right)
    elif isinstance(node, (Frac, Pow, Sub)):
        a, b = _two_children(node)
        validate_ast(a)
        validate_ast(b)
    elif isinstance(node, Apply):
        if not applicable_head(node.func):
            raise ValueError("apply target must be a variable, greek, subscripted ident or named function")
        validate_ast(node.func)
        validate_ast(node.arg)
    elif isinstance(node, Group):
        validate_ast(node.inner)
    elif isinstance(node, Seq):
        if len(node.items) < 2:
            raise ValueError("sequence needs at least 2 items")
        for item in node.items:
            validate_ast(item)
    else:
        raise ValueError(f"not an AST node: {node!r}")


def _two_children(node):
    if isinstance(node, Frac):
        return node.num, node.den
    if isinstance(node, Pow):
        return node.base, node.exp
    return node.base, node.script


def applicable_head(node: Node) -> bool:
    """Whether f(x)-style application parentheses may follow this node."""
    if isinstance(node, (Variable, Greek, Function)):
        return True
    if isinstance(node, Sub):
        return applicable_head(node.base)
    return False


# ---------------------------------------------------------------------------
# parser

_LEVEL_SEQ = 0
_LEVEL_REL = 1
_LEVEL_SUM = 2
_LEVEL_PROD = 3
_LEVEL_TIGHT = 4

_OP_LEVEL = {"=": _LEVEL_REL, "+": _LEVEL_SUM, "-": _LEVEL_SUM, "*": _LEVEL_PROD, "/": _LEVEL_PROD}


class _Parser:
    def __init__(self, tokens: list[LatexToken]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> LatexToken | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> LatexToken:
        tok = self.peek()
        if tok is None:
            raise LatexSyntaxError(self._pos(), "unexpected end of input")
        self.i += 1
        return tok

    def _pos(self) -> int:
        if self.i < len(self.toks):
            return self.toks[self.i].pos
        return self.toks[-1].pos + len(self.toks[-1].text) if self.toks else 0

    def expect(self, kind: str, text: str | None = None) -> LatexToken:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise LatexSyntaxError(tok.pos, f"expected {text or kind}, found {tok.text!r}")
        return tok

    # grammar, loosest binding first

    def parse_seq(self) -> Node:
        items = [self.parse_rel()]
        while (tok := self.peek()) is not None and tok.kind == "symbol" and tok.text == ",":
            self.next()
            items.append(self.parse_rel())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def parse_rel(self) -> Node:
        node = self.parse_sum()
        while (tok := self.peek()) is not None and tok.kind == "symbol" and tok.text == "=":
            self.next()
            node = BinOp("=", node, self.parse_sum())
        return node

    def parse_sum(self) -> Node:
        node = self.parse_prod()
        while (tok := self.peek()) is not None and tok.kind == "symbol" and tok.text in "+-":
            self.next()
            node = BinOp(tok.text, node, self.parse_prod())
        return node

    def parse_prod(self) -> Node:
        node = self.parse_factor()
        while (tok := self.peek()) is not None:
            if tok.kind == "symbol" and tok.text == "/":
                self.next()
                node = BinOp("/", node, self.parse_factor())
            elif tok.kind == "command" and tok.text == "\\times":
                self.next()
                node = BinOp("*", node, self.parse_factor())
            elif self._starts_factor(tok):
                node = BinOp("*", node, self.parse_factor())
            else:
                break
        return node

    @staticmethod
    def _starts_factor(tok: LatexToken) -> bool:
        if tok.kind in ("letter", "digit-run", "brace-open"):
            return True
        if tok.kind == "delimiter" and tok.text == "(":
            return True
        if tok.kind == "command" and tok.text != "\\times":
            return True
        return False

    def parse_factor(self) -> Node:
        node = self.parse_primary()
        has_sub = has_sup = False
        while (tok := self.peek()) is not None:
            if tok.kind == "subscript-marker":
                if has_sub:
                    raise LatexSyntaxError(tok.pos, "double subscript")
                self.next()
                node = Sub(node, self.parse_script_arg())
                has_sub = True
            elif tok.kind == "superscript-marker":
                if has_sup:
                    raise LatexSyntaxError(tok.pos, "double superscript")
                self.next()
                node = Pow(node, self.parse_script_arg())
                has_sup = True
            elif tok.kind == "delimiter" and tok.text == "(" and applicable_head(node):
                self.next()
                arg = self.parse_seq()
                self.expect("delimiter", ")")
                node = Apply(node, arg)
                has_sub = has_sup = False
            else:
                break
        if isinstance(node, Function):
            raise LatexSyntaxError(self._pos(), f"\\{node.name} must be applied to an argument")
        return node

    def parse_primary(self) -> Node:
        tok = self.next()
        if tok.kind == "letter":
            return Variable(tok.text)
        if tok.kind == "digit-run":
            return Number(tok.text)
        if tok.kind == "command":
            name = tok.text[1:]
            if name in GREEK_NAMES:
                return Greek(name)
            if name in FUNCTION_NAMES:
                return Function(name)
            if name == "frac":
                self.expect("brace-open")
                num = self.parse_seq()
                self.expect("brace-close")
                self.expect("brace-open")
                den = self.parse_seq()
                self.expect("brace-close")
                return Frac(num, den)
            raise UnsupportedConstructError(tok.text)
        if tok.kind == "brace-open":
            inner = self.parse_seq()
            self.expect("brace-close")
            return inner  # braces are transparent
        if tok.kind == "delimiter" and tok.text == "(":
            inner = self.parse_seq()
            self.expect("delimiter", ")")
            return Group(inner)
        raise LatexSyntaxError(tok.pos, f"unexpected {tok.text!r}")

    def parse_script_arg(self) -> Node:
        tok = self.peek()
        if tok is None:
            raise LatexSyntaxError(self._pos(), "missing script argument")
        if tok.kind == "brace-open":
            self.next()
            inner = self.parse_seq()
            self.expect("brace-close")
            return inner
        # unbraced script: exactly one token
        self.next()
        if tok.kind == "letter":
            return Variable(tok.text)
        if tok.kind == "digit-run":
            return Number(tok.text)
        if tok.kind == "command" and tok.text[1:] in GREEK_NAMES:
            return Greek(tok.text[1:])
        raise LatexSyntaxError(tok.pos, f"bad script argument {tok.text!r}")


def parse_latex(src: str) -> Node:
    """Parse a LaTeX string into a MathAst node.

    Raises UnsupportedConstructError for out-of-grammar commands and
    LatexSyntaxError for anything else that does not parse.
    """
    tokens = tokenize_latex(src)
    # leading/trailing $ delimiters are presentation, not structure
    while tokens and tokens[0].kind == "delimiter" and tokens[0].text == "$":
        tokens.pop(0)
    while tokens and tokens[-1].kind == "delimiter" and tokens[-1].text == "$":
        tokens.pop()
    if not tokens:
        raise LatexSyntaxError(0, "empty expression")
    parser = _Parser(tokens)
    node = parser.parse_seq()
    if parser.peek() is not None:
        raise LatexSyntaxError(parser.peek().pos, f"trailing {parser.peek().text!r}")
    return node


# ---------------------------------------------------------------------------
# renderer

def _natural_level(node: Node) -> int:
    if isinstance(node, Seq):
        return _LEVEL_SEQ
    if isinstance(node, BinOp):
        return _OP_LEVEL[node.op]
    return _LEVEL_TIGHT


def _has_sup(node: Node) -> bool:
    if isinstance(node, Pow):
        return True
    if isinstance(node, Sub):
        return _has_sup(node.base)
    return False


def _has_sub(node: Node) -> bool:
    if isinstance(node, Sub):
        return True
    if isinstance(node, Pow):
        return _has_sub(node.base)
    return False


def _applicable_tail(node: Node) -> bool:
    # True when the rendered text ends in something the parser would treat
    # as an application head if '(' follows
    if isinstance(node, (Variable, Greek)):
        return True
    if isinstance(node, Sub):
        return applicable_head(node)
    if isinstance(node, BinOp):
        return _applicable_tail(node.right)
    if isinstance(node, Seq):
        return _applicable_tail(node.items[-1])
    return False


def render_latex(ast: Node) -> str:
    """Render an AST to canonical LaTeX: no spaces, braces only where needed."""
    return _render(ast, _LEVEL_SEQ)


def _render(node: Node, required: int) -> str:
    if _natural_level(node) < required:
        return "{" + _render(node, _LEVEL_SEQ) + "}"
    if isinstance(node, Number):
        return node.digits
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Greek):
        return "\\" + node.name
    if isinstance(node, Function):
        return "\\" + node.name
    if isinstance(node, BinOp):
        level = _OP_LEVEL[node.op]
        left = _render(node.left, level)
        right = _render(node.right, level + 1)
        if node.op == "*":
            return left + _times_separator(node.left, left, right) + right
        return left + node.op + right
    if isinstance(node, Frac):
        return "\\frac{" + _render(node.num, _LEVEL_SEQ) + "}{" + _render(node.den, _LEVEL_SEQ) + "}"
    if isinstance(node, Pow):
        base = _render_script_base(node.base, _has_sup)
        return base + "^" + _render_script(node.exp)
    if isinstance(node, Sub):
        base = _render_script_base(node.base, _has_sub)
        return base + "_" + _render_script(node.script)
    if isinstance(node, Apply):
        return _render(node.func, _LEVEL_TIGHT) + "(" + _render(node.arg, _LEVEL_SEQ) + ")"
    if isinstance(node, Group):
        return "(" + _render(node.inner, _LEVEL_SEQ) + ")"
    if isinstance(node, Seq):
        return ",".join(_render(item, _LEVEL_REL) for item in node.items)
    raise ValueError(f"not an AST node: {node!r}")


def _times_separator(left_node: Node, left: str, right: str) -> str:
    if left[-1].isdigit() and right[0].isdigit():
        return "\\times"  # juxtaposition would fuse the digit runs
    if right[0] == "(" and _applicable_tail(left_node):
        return "\\times"  # juxtaposition would read as function application
    return ""


def _render_script_base(base: Node, conflicting) -> str:
    text = _render(base, _LEVEL_TIGHT)
    if conflicting(base):
        return "{" + text + "}"  # avoid double sub/superscript
    return text


def _render_script(script: Node) -> str:
    text = _render(script, _LEVEL_SEQ)
    return text if len(text) == 1 else "{" + text + "}"
