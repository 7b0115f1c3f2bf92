import pytest

from spokenmath import latex as lx
from spokenmath.spoken import (
    AmbiguousParseError,
    SpokenParseError,
    UnknownWordError,
    parse_spoken,
    parse_spoken_ast,
)
from spokenmath.verbalize import GrammarConfig, all_styles, sample_expression, verbalize


class TestExamples:
    def test_subscript_and_application(self):
        assert parse_spoken("x sub zero equals x of t") == "x_0=x(t)"

    def test_single_variable(self):
        assert parse_spoken("x") == "x"

    def test_nested_subscript_application(self):
        assert parse_spoken("phi sub h sub k of y equals e y") == "\\phi_{h_k}(y)=ey"

    def test_case_insensitive(self):
        assert parse_spoken("Phi sub H sub K of y equals E y") == "\\phi_{h_k}(y)=ey"

    def test_euler(self):
        text = "e to the power of i x equals cosine of x plus i sine of x"
        assert parse_spoken(text) == "e^{ix}=\\cos(x)+i\\sin(x)"

    def test_table3_comma_with_attached_comma(self):
        # punctuation attached to a word, as recognizers emit it
        out = parse_spoken("cosine of psi sub i, psi sub j")
        assert out == "\\cos(\\psi_i),\\psi_j"

    def test_explicit_sequence_argument(self):
        out = parse_spoken("cosine of the quantity psi sub i , psi sub j end quantity")
        assert out == "\\cos(\\psi_i,\\psi_j)"

    def test_number_words_merge(self):
        assert parse_spoken("x sub twenty three") == "x_{23}"
        assert parse_spoken("twenty plus three") == "20+3"

    def test_fraction_block(self):
        assert parse_spoken("the fraction a plus b over c end fraction") == "\\frac{a+b}{c}"

    def test_parentheses(self):
        assert parse_spoken("open parenthesis x plus one close parenthesis squared") == "(x+1)^2"

    def test_natural_log(self):
        assert parse_spoken("natural log of x") == "\\ln(x)"


class TestErrors:
    def test_unknown_word_carries_word(self):
        with pytest.raises(UnknownWordError) as err:
            parse_spoken("x plus 5 y plus 10 z école 0")
        assert err.value.word == "école"

    def test_truncated_input(self):
        with pytest.raises(AmbiguousParseError):
            parse_spoken("x plus")

    def test_of_after_number(self):
        with pytest.raises(AmbiguousParseError):
            parse_spoken("5 of x")

    def test_function_without_of(self):
        with pytest.raises(AmbiguousParseError):
            parse_spoken("cosine plus x")

    def test_unbalanced_quantity(self):
        with pytest.raises(AmbiguousParseError):
            parse_spoken("the quantity x plus y")

    def test_stray_phrase_word(self):
        with pytest.raises(UnknownWordError):
            parse_spoken("the x")

    def test_errors_are_spoken_parse_errors(self):
        for bad in ("x plus", "école", "the x"):
            with pytest.raises(SpokenParseError):
                parse_spoken(bad)


class TestRoundTripOracle:
    def test_round_trip_over_sampled_grammar(self):
        cfg = GrammarConfig(max_depth=4)
        styles = all_styles()
        for seed in range(1500):
            ast = sample_expression(cfg, seed)
            reference = lx.normalize_latex(lx.render_latex(ast))
            for style in styles:
                spoken = verbalize(ast, style)
                assert lx.normalize_latex(parse_spoken(spoken)) == reference, \
                    (seed, style, spoken)

    def test_round_trip_is_ast_exact(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(500):
            ast = sample_expression(cfg, seed)
            for style in all_styles():
                assert parse_spoken_ast(verbalize(ast, style)) == ast

    def test_styles_share_one_latex(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(300):
            ast = sample_expression(cfg, seed)
            outputs = {lx.normalize_latex(parse_spoken(verbalize(ast, s)))
                       for s in all_styles()}
            assert len(outputs) == 1

    def test_non_canonical_shapes_round_trip(self):
        # shapes the sampler never produces still invert exactly
        cases = [
            lx.BinOp("+", lx.Variable("a"),
                     lx.BinOp("+", lx.Variable("b"), lx.Variable("c"))),
            lx.Pow(lx.Pow(lx.Variable("a"), lx.Variable("b")), lx.Variable("c")),
            lx.Sub(lx.Variable("x"), lx.Pow(lx.Variable("y"), lx.Number("2"))),
            lx.Pow(lx.Apply(lx.Function("cos"), lx.Variable("x")), lx.Number("2")),
            lx.BinOp("*", lx.Pow(lx.Variable("x"), lx.Number("2")), lx.Variable("y")),
            lx.BinOp("*", lx.Variable("a"), lx.BinOp("*", lx.Variable("b"), lx.Variable("c"))),
            lx.Frac(lx.Frac(lx.Variable("a"), lx.Variable("b")), lx.Variable("c")),
            lx.Frac(lx.Variable("a"), lx.Frac(lx.Variable("b"), lx.Variable("c"))),
            lx.Seq((lx.BinOp("=", lx.Variable("a"), lx.Variable("b")), lx.Variable("c"))),
            lx.Apply(lx.Sub(lx.Greek("phi"), lx.Sub(lx.Variable("h"), lx.Variable("k"))),
                     lx.Variable("y")),
        ]
        for ast in cases:
            for style in all_styles():
                assert parse_spoken_ast(verbalize(ast, style)) == ast, (ast, style)

    def test_totality_on_clean_input(self):
        cfg = GrammarConfig(max_depth=5)
        for seed in range(300):
            ast = sample_expression(cfg, seed)
            for style in all_styles():
                parse_spoken(verbalize(ast, style))  # must not raise
