"""Spoken-English generation from math ASTs, plus random expression sampling.

The verbalizer is the exact inverse of the spoken parser: wherever a naive
word-for-word reading would parse to a different tree, it brackets the
offending operand with "the quantity ... end quantity".  Those markers are
transparent on the parse side, so round-tripping reproduces the tree itself,
not a parenthesized variant of it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import latex as lx
from .lexicon import FUNCTION_NAME_TO_WORD, NUMBER_WORDS, number_to_words

NUMBER_MODES = ("digits", "words")
POWER_MODES = ("to-the-power-of", "shortcuts")
FRACTION_MODES = ("over", "the-fraction")


@dataclass(frozen=True)
class VerbalStyle:
    """One way of reading an expression aloud.

    The style alone fixes the output for a given AST.  The seed gives each
    style a distinct identity when corpus generation picks among styles; the
    wording itself is not randomized.
    """

    number_mode: str = "digits"
    power_mode: str = "to-the-power-of"
    fraction_mode: str = "over"
    seed: int = 0

    def __post_init__(self):
        if self.number_mode not in NUMBER_MODES:
            raise ValueError(f"number_mode must be one of {NUMBER_MODES}")
        if self.power_mode not in POWER_MODES:
            raise ValueError(f"power_mode must be one of {POWER_MODES}")
        if self.fraction_mode not in FRACTION_MODES:
            raise ValueError(f"fraction_mode must be one of {FRACTION_MODES}")


def default_styles() -> list[VerbalStyle]:
    """The style inventory used for corpus generation."""
    return [
        VerbalStyle("digits", "to-the-power-of", "over", seed=1),
        VerbalStyle("words", "to-the-power-of", "over", seed=2),
        VerbalStyle("digits", "shortcuts", "over", seed=3),
        VerbalStyle("words", "shortcuts", "the-fraction", seed=4),
    ]


def all_styles() -> list[VerbalStyle]:
    """Every combination of the style axes."""
    styles = []
    seed = 0
    for nm in NUMBER_MODES:
        for pm in POWER_MODES:
            for fm in FRACTION_MODES:
                styles.append(VerbalStyle(nm, pm, fm, seed=seed))
                seed += 1
    return styles


# precedence levels of the spoken grammar, loosest first
_SEQ, _REL, _SUM, _OVER, _PROD, _TIGHT = range(6)

_WORD_OF_OP = {"+": "plus", "-": "minus", "=": "equals"}


def verbalize(ast: lx.Node, style: VerbalStyle) -> str:
    """Render an AST as lowercase spoken English words."""
    return " ".join(_words(ast, _SEQ, style))


def _natural(node: lx.Node, style: VerbalStyle) -> int:
    if isinstance(node, lx.Seq):
        return _SEQ
    if isinstance(node, lx.BinOp):
        if node.op == "=":
            return _REL
        if node.op in "+-":
            return _SUM
        if node.op == "/":
            return _OVER
        return _PROD
    if isinstance(node, lx.Frac):
        return _OVER if style.fraction_mode == "over" else _TIGHT
    return _TIGHT


def _quantity(node: lx.Node, style: VerbalStyle) -> list[str]:
    return ["the quantity", *_words(node, _SEQ, style), "end quantity"]


def _fraction_child(node: lx.Node, style: VerbalStyle) -> list[str]:
    # numerator/denominator of a "the fraction ... end fraction" block: the
    # block's own "over" must be the only bare one inside it
    if _natural(node, style) == _OVER or _natural(node, style) < _SUM:
        return _quantity(node, style)
    return _words(node, _SUM, style)


def _words(node: lx.Node, required: int, style: VerbalStyle) -> list[str]:
    if _natural(node, style) < required:
        return _quantity(node, style)

    if isinstance(node, lx.Number):
        return _number_words(node, style)
    if isinstance(node, lx.Variable):
        return [node.name.lower()]
    if isinstance(node, lx.Greek):
        return [node.name]
    if isinstance(node, lx.BinOp):
        if node.op == "*":
            return _product_words(node, style)
        if node.op == "/":
            return [*_words(node.left, _OVER, style), "over", *_words(node.right, _PROD, style)]
        return [
            *_words(node.left, _OP_LEFT[node.op], style),
            _WORD_OF_OP[node.op],
            *_words(node.right, _OP_LEFT[node.op] + 1, style),
        ]
    if isinstance(node, lx.Frac):
        if style.fraction_mode == "over":
            return [*_words(node.num, _OVER, style), "over", *_words(node.den, _PROD, style)]
        return [
            "the fraction", *_fraction_child(node.num, style),
            "over", *_fraction_child(node.den, style), "end fraction",
        ]
    if isinstance(node, lx.Pow):
        base = _script_base_words(node.base, style)
        if style.power_mode == "shortcuts" and node.exp == lx.Number("2"):
            return [*base, "squared"]
        if style.power_mode == "shortcuts" and node.exp == lx.Number("3"):
            return [*base, "cubed"]
        return [*base, "to the power of", *_words(node.exp, _PROD, style)]
    if isinstance(node, lx.Sub):
        base = _script_base_words(node.base, style)
        if _is_subscript_operand(node.script, style):
            script = _words(node.script, _TIGHT, style)
        else:
            script = _quantity(node.script, style)
        return [*base, "sub", *script]
    if isinstance(node, lx.Apply):
        if isinstance(node.func, lx.Function):
            func = [FUNCTION_NAME_TO_WORD[node.func.name]]
        else:
            func = _words(node.func, _TIGHT, style)
        return [*func, "of", *_words(node.arg, _TIGHT, style)]
    if isinstance(node, lx.Group):
        return ["open parenthesis", *_words(node.inner, _SEQ, style), "close parenthesis"]
    if isinstance(node, lx.Seq):
        out: list[str] = []
        for i, item in enumerate(node.items):
            if i:
                out.append(",")
            out.extend(_words(item, _REL, style))
        return out
    raise ValueError(f"not an AST node: {node!r}")


_OP_LEFT = {"=": _REL, "+": _SUM, "-": _SUM}


def _number_words(node: lx.Number, style: VerbalStyle) -> list[str]:
    digits = node.digits
    if style.number_mode == "words" and digits == str(int(digits)) and int(digits) <= 99:
        return number_to_words(int(digits))
    return [digits]


def _product_words(node: lx.BinOp, style: VerbalStyle) -> list[str]:
    factors: list[lx.Node] = []
    cursor: lx.Node = node
    while isinstance(cursor, lx.BinOp) and cursor.op == "*":
        factors.append(cursor.right)
        cursor = cursor.left
    factors.append(cursor)
    factors.reverse()

    out: list[str] = []
    for i, factor in enumerate(factors):
        last = i == len(factors) - 1
        if not last and _extends_rightward(factor, style):
            part = _quantity(factor, style)
        else:
            part = _words(factor, _TIGHT, style)
        if out and _is_number_word(out[-1]) and _is_number_word(part[0]):
            out.append("times")  # keep adjacent numbers from fusing
        out.extend(part)
    return out


def _is_number_word(word: str) -> bool:
    return word.isdigit() or word in NUMBER_WORDS


def _extends_rightward(node: lx.Node, style: VerbalStyle) -> bool:
    """True when the node's spoken form would swallow a following factor."""
    if isinstance(node, lx.Pow):
        return True  # the exponent reads on as a product chain
    if isinstance(node, lx.Frac):
        return style.fraction_mode == "over"
    if isinstance(node, lx.BinOp):
        if node.op == "/":
            return True
        return _extends_rightward(node.right, style)
    if isinstance(node, lx.Apply):
        return _extends_rightward(node.arg, style)
    if isinstance(node, lx.Seq):
        return _extends_rightward(node.items[-1], style)
    return False


def _script_base_words(base: lx.Node, style: VerbalStyle) -> list[str]:
    # a power or application base would capture the script into its own
    # trailing operand, so those need explicit bracketing
    if isinstance(base, (lx.Pow, lx.Apply)) or _natural(base, style) < _TIGHT:
        return _quantity(base, style)
    return _words(base, _TIGHT, style)


def _is_subscript_operand(node: lx.Node, style: VerbalStyle) -> bool:
    # what "sub" can take without bracketing: atoms and chains of them
    if isinstance(node, (lx.Number, lx.Variable, lx.Greek, lx.Group)):
        return True
    if isinstance(node, lx.Frac) and style.fraction_mode == "the-fraction":
        return True
    if isinstance(node, lx.Sub):
        return _is_subscript_operand(node.base, style) and not isinstance(node.base, (lx.Sub, lx.Group, lx.Frac)) \
            and _is_subscript_operand(node.script, style)
    return False


# ---------------------------------------------------------------------------
# random expression sampling

_KIND_MIN_DEPTH = {
    "number": 1, "variable": 1, "greek": 1,
    "group": 2, "fraction": 2, "power": 2, "subscript": 2, "apply": 2,
    "sum": 2, "product": 2, "equality": 2, "sequence": 2,
}

_DEFAULT_WEIGHTS = {
    "number": 2.0, "variable": 5.0, "greek": 2.0,
    "sum": 5.0, "product": 4.0, "equality": 3.0,
    "fraction": 1.5, "power": 2.0, "subscript": 2.0, "apply": 2.0,
    "group": 0.7, "sequence": 0.4,
}


@dataclass(frozen=True)
class GrammarConfig:
    """Controls the shape distribution of sampled expressions."""

    max_depth: int = 4
    weights: dict = field(default_factory=lambda: dict(_DEFAULT_WEIGHTS))
    variables: str = "abcdefghijklmnopqrstuvwxyz"
    greeks: tuple = ("alpha", "beta", "gamma", "delta", "theta", "lambda",
                     "mu", "pi", "phi", "psi", "sigma", "omega")
    max_number: int = 20

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        unknown = set(self.weights) - set(_KIND_MIN_DEPTH)
        if unknown:
            raise ValueError(f"unknown node kinds in weights: {sorted(unknown)}")
        if not any(w > 0 for w in self.weights.values()):
            raise ValueError("at least one weight must be positive")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be nonnegative")


def root_kind_probability(cfg: GrammarConfig, kind: str) -> float:
    """Probability that a sampled root is the given kind (depth permitting)."""
    eligible = _eligible_kinds(cfg, cfg.max_depth)
    total = sum(cfg.weights.get(k, 0.0) for k in eligible)
    return cfg.weights.get(kind, 0.0) / total


def _eligible_kinds(cfg: GrammarConfig, depth: int) -> list[str]:
    return [k for k, d in _KIND_MIN_DEPTH.items()
            if d <= depth and cfg.weights.get(k, 0.0) > 0]


def sample_expression(cfg: GrammarConfig, seed: int) -> lx.Node:
    """Draw a random in-grammar AST; deterministic for a given seed."""
    rng = random.Random(seed)
    return _sample(cfg, rng, cfg.max_depth, top=True)


def _pick(rng: random.Random, cfg: GrammarConfig, kinds: list[str]) -> str:
    weights = [cfg.weights.get(k, 0.0) for k in kinds]
    if sum(weights) <= 0:
        return rng.choice(kinds)
    return rng.choices(kinds, weights=weights, k=1)[0]


def _sample(cfg: GrammarConfig, rng: random.Random, depth: int, top: bool = False) -> lx.Node:
    kinds = _eligible_kinds(cfg, depth)
    if not top:
        # '=' chains and comma lists only ever appear at the root
        kinds = [k for k in kinds if k not in ("equality", "sequence")]
    if not kinds:
        return _sample_leaf(cfg, rng)
    kind = _pick(rng, cfg, kinds)

    if kind == "number":
        return lx.Number(str(rng.randint(0, cfg.max_number)))
    if kind == "variable":
        return lx.Variable(rng.choice(cfg.variables))
    if kind == "greek":
        return lx.Greek(rng.choice(cfg.greeks))
    if kind == "equality":
        return lx.BinOp("=", _sample(cfg, rng, depth - 1), _sample(cfg, rng, depth - 1))
    if kind == "sequence":
        return lx.Seq(tuple(_sample(cfg, rng, depth - 1) for _ in range(2)))
    if kind == "sum":
        joins = 2 if depth >= 3 and rng.random() < 0.5 else 1
        node = _sample(cfg, rng, depth - joins)
        for _ in range(joins):
            node = lx.BinOp(rng.choice("+-"), node, _sample(cfg, rng, depth - joins))
        return node
    if kind == "product":
        joins = 2 if depth >= 3 and rng.random() < 0.4 else 1
        node = _sample_factor(cfg, rng, depth - joins)
        for _ in range(joins):
            node = lx.BinOp("*", node, _sample_factor(cfg, rng, depth - joins))
        return node
    if kind == "fraction":
        return lx.Frac(_sample(cfg, rng, depth - 1), _sample(cfg, rng, depth - 1))
    if kind == "power":
        return lx.Pow(_sample_script_base(cfg, rng, depth - 1), _sample_exponent(cfg, rng, depth - 1))
    if kind == "subscript":
        return lx.Sub(_sample_ident(cfg, rng), _sample_subscript(cfg, rng, depth - 1))
    if kind == "apply":
        return lx.Apply(_sample_head(cfg, rng, depth - 1), _sample(cfg, rng, depth - 1))
    if kind == "group":
        return lx.Group(_sample(cfg, rng, depth - 1))
    raise AssertionError(kind)


def _sample_leaf(cfg: GrammarConfig, rng: random.Random) -> lx.Node:
    kinds = _eligible_kinds(cfg, 1) or ["variable"]
    kind = _pick(rng, cfg, kinds)
    if kind == "number":
        return lx.Number(str(rng.randint(0, cfg.max_number)))
    if kind == "variable":
        return lx.Variable(rng.choice(cfg.variables))
    return lx.Greek(rng.choice(cfg.greeks))


def _sample_ident(cfg: GrammarConfig, rng: random.Random) -> lx.Node:
    if rng.random() < 0.4:
        return lx.Greek(rng.choice(cfg.greeks))
    return lx.Variable(rng.choice(cfg.variables))


def _sample_head(cfg: GrammarConfig, rng: random.Random, depth: int) -> lx.Node:
    # something application parentheses can follow: f(x), x(t), phi_k(y)
    roll = rng.random()
    if roll < 0.5:
        return lx.Function(rng.choice(lx.FUNCTION_NAMES))
    if roll < 0.8 or depth < 2:
        return _sample_ident(cfg, rng)
    return lx.Sub(_sample_ident(cfg, rng), _sample_subscript(cfg, rng, depth - 1))


def _sample_factor(cfg: GrammarConfig, rng: random.Random, depth: int) -> lx.Node:
    kinds = [k for k in _eligible_kinds(cfg, depth)
             if k in ("number", "variable", "greek", "power", "subscript", "apply", "group", "fraction")]
    if not kinds:
        return _sample_leaf(cfg, rng)
    kind = _pick(rng, cfg, kinds)
    if kind == "power":
        return lx.Pow(_sample_script_base(cfg, rng, depth - 1), _sample_exponent(cfg, rng, depth - 1))
    if kind == "subscript":
        return lx.Sub(_sample_ident(cfg, rng), _sample_subscript(cfg, rng, depth - 1))
    if kind == "apply":
        return lx.Apply(_sample_head(cfg, rng, depth - 1), _sample(cfg, rng, depth - 1))
    if kind == "group":
        return lx.Group(_sample(cfg, rng, depth - 1))
    if kind == "fraction":
        return lx.Frac(_sample(cfg, rng, depth - 1), _sample(cfg, rng, depth - 1))
    return _sample_leaf(cfg, rng)


def _sample_script_base(cfg: GrammarConfig, rng: random.Random, depth: int) -> lx.Node:
    if depth >= 2 and rng.random() < 0.25:
        return lx.Group(_sample(cfg, rng, depth - 1))
    return _sample_leaf(cfg, rng)


def _sample_exponent(cfg: GrammarConfig, rng: random.Random, depth: int) -> lx.Node:
    roll = rng.random()
    if roll < 0.25:
        return lx.Number(str(rng.randint(2, max(2, min(cfg.max_number, 9)))))
    if roll < 0.5 or depth < 2:
        return _sample_leaf(cfg, rng)
    return lx.BinOp("*", _sample_leaf(cfg, rng), _sample_leaf(cfg, rng))


def _sample_subscript(cfg: GrammarConfig, rng: random.Random, depth: int) -> lx.Node:
    if depth >= 2 and rng.random() < 0.3:
        return lx.Sub(_sample_ident(cfg, rng), _sample_subscript(cfg, rng, depth - 1))
    if rng.random() < 0.5:
        return lx.Number(str(rng.randint(0, min(cfg.max_number, 9))))
    return _sample_ident(cfg, rng)


def ast_depth(node: lx.Node) -> int:
    """Nesting depth with leaves at 1."""
    if isinstance(node, (lx.Number, lx.Variable, lx.Greek, lx.Function)):
        return 1
    if isinstance(node, lx.BinOp):
        return 1 + max(ast_depth(node.left), ast_depth(node.right))
    if isinstance(node, lx.Frac):
        return 1 + max(ast_depth(node.num), ast_depth(node.den))
    if isinstance(node, lx.Pow):
        return 1 + max(ast_depth(node.base), ast_depth(node.exp))
    if isinstance(node, lx.Sub):
        return 1 + max(ast_depth(node.base), ast_depth(node.script))
    if isinstance(node, lx.Apply):
        return 1 + max(ast_depth(node.func), ast_depth(node.arg))
    if isinstance(node, lx.Group):
        return 1 + ast_depth(node.inner)
    if isinstance(node, lx.Seq):
        return 1 + max(ast_depth(item) for item in node.items)
    raise ValueError(f"not an AST node: {node!r}")
