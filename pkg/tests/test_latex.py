import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spokenmath import latex as lx
from spokenmath.verbalize import GrammarConfig, sample_expression


def kinds(tokens):
    return [t.kind for t in tokens]


def texts(tokens):
    return [t.text for t in tokens]


class TestTokenize:
    def test_table10_example(self):
        toks = lx.tokenize_latex("$x_0=x(t)$")
        assert texts(toks) == ["$", "x", "_", "0", "=", "x", "(", "t", ")", "$"]
        assert kinds(toks) == ["delimiter", "letter", "subscript-marker", "digit-run",
                               "symbol", "letter", "delimiter", "letter", "delimiter",
                               "delimiter"]

    def test_empty(self):
        assert lx.tokenize_latex("") == []

    def test_function_call(self):
        assert texts(lx.tokenize_latex("\\cos(x)")) == ["\\cos", "(", "x", ")"]

    def test_commands_start_with_backslash(self):
        for tok in lx.tokenize_latex("\\frac{\\alpha}{2}+\\sin(x)"):
            if tok.kind == "command":
                assert tok.text.startswith("\\")

    def test_whitespace_emits_nothing(self):
        toks = lx.tokenize_latex("  x  + \t y \n")
        assert texts(toks) == ["x", "+", "y"]

    def test_known_command_prefix_split(self):
        # canonical spaceless output glues letters onto commands
        assert texts(lx.tokenize_latex("\\phix")) == ["\\phi", "x"]
        assert texts(lx.tokenize_latex("\\pis")) == ["\\pi", "s"]

    def test_unknown_command_kept_whole(self):
        assert texts(lx.tokenize_latex("\\qquad")) == ["\\qquad"]

    def test_unbalanced_braces(self):
        with pytest.raises(lx.UnbalancedBraceError):
            lx.tokenize_latex("{x")
        with pytest.raises(lx.UnbalancedBraceError):
            lx.tokenize_latex("x}")

    def test_coverage_excludes_only_whitespace(self):
        src = "\\frac{1}{2} + x_0 ^ {i j}"
        toks = lx.tokenize_latex(src)
        assert sum(len(t.text) for t in toks) == len(src) - sum(c.isspace() for c in src)

    @given(st.text(alphabet="xy01+=_^{}() $\\abc", max_size=40))
    @settings(max_examples=300, deadline=None)
    def test_coverage_property(self, src):
        try:
            toks = lx.tokenize_latex(src)
        except lx.UnbalancedBraceError:
            return
        assert sum(len(t.text) for t in toks) == len(src) - sum(c.isspace() for c in src)


class TestNormalize:
    def test_strips_spaces(self):
        assert lx.normalize_latex("$A B$") == "AB"

    def test_idempotent_simple(self):
        assert lx.normalize_latex("AB") == "AB"

    def test_strips_dollar_and_spaces(self):
        assert lx.normalize_latex("$ x_0=x(t) $") == "x_0=x(t)"

    @given(st.text(max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_idempotent_property(self, src):
        once = lx.normalize_latex(src)
        assert lx.normalize_latex(once) == once

    def test_no_whitespace_in_output(self):
        assert " " not in lx.normalize_latex("a \t b \n c")


class TestParse:
    def test_table3_sum(self):
        ast = lx.parse_latex("x+5y+10z=0")
        assert ast == lx.BinOp(
            "=",
            lx.BinOp("+",
                     lx.BinOp("+", lx.Variable("x"),
                              lx.BinOp("*", lx.Number("5"), lx.Variable("y"))),
                     lx.BinOp("*", lx.Number("10"), lx.Variable("z"))),
            lx.Number("0"))

    def test_single_leaf(self):
        assert lx.parse_latex("x") == lx.Variable("x")

    def test_table10_subscript_chain(self):
        ast = lx.parse_latex("\\phi_{H_k}(y)=Ey")
        expected = lx.BinOp(
            "=",
            lx.Apply(lx.Sub(lx.Greek("phi"), lx.Sub(lx.Variable("H"), lx.Variable("k"))),
                     lx.Variable("y")),
            lx.BinOp("*", lx.Variable("E"), lx.Variable("y")))
        assert ast == expected

    def test_unsupported_command(self):
        with pytest.raises(lx.UnsupportedConstructError):
            lx.parse_latex("\\sqrt{x}")

    def test_syntax_error_position(self):
        with pytest.raises(lx.LatexSyntaxError) as err:
            lx.parse_latex("x+")
        assert err.value.position >= 1

    def test_double_superscript_rejected(self):
        with pytest.raises(lx.LatexSyntaxError):
            lx.parse_latex("x^2^3")

    def test_dollar_delimiters_accepted(self):
        assert lx.parse_latex("$x+1$") == lx.parse_latex("x+1")

    def test_function_requires_argument(self):
        with pytest.raises(lx.LatexSyntaxError):
            lx.parse_latex("\\sin+2")

    def test_number_times_group_is_not_application(self):
        ast = lx.parse_latex("2(x)")
        assert ast == lx.BinOp("*", lx.Number("2"), lx.Group(lx.Variable("x")))

    def test_identifier_group_is_application(self):
        assert lx.parse_latex("x(t)") == lx.Apply(lx.Variable("x"), lx.Variable("t"))

    def test_comma_sequence(self):
        ast = lx.parse_latex("\\cos(\\psi_i,\\psi_j)")
        assert isinstance(ast, lx.Apply)
        assert isinstance(ast.arg, lx.Seq)
        assert len(ast.arg.items) == 2


class TestRender:
    def test_euler_power(self):
        ast = lx.Pow(lx.Variable("e"), lx.BinOp("*", lx.Variable("i"), lx.Variable("x")))
        assert lx.render_latex(ast) == "e^{ix}"

    def test_leaf(self):
        assert lx.render_latex(lx.Variable("x")) == "x"

    def test_fraction_canonical(self):
        assert lx.render_latex(lx.Frac(lx.Number("1"), lx.Number("2"))) == "\\frac{1}{2}"

    def test_digit_fusion_guard(self):
        ast = lx.BinOp("*", lx.Number("2"), lx.Number("3"))
        rendered = lx.render_latex(ast)
        assert rendered == "2\\times3"
        assert lx.parse_latex(rendered) == ast

    def test_application_guard(self):
        ast = lx.BinOp("*", lx.Variable("x"), lx.Group(lx.Variable("y")))
        rendered = lx.render_latex(ast)
        assert lx.parse_latex(rendered) == ast

    def test_right_nested_sum_uses_transparent_braces(self):
        ast = lx.BinOp("+", lx.Variable("a"),
                       lx.BinOp("+", lx.Variable("b"), lx.Variable("c")))
        rendered = lx.render_latex(ast)
        assert rendered == "a+{b+c}"
        assert lx.parse_latex(rendered) == ast

    def test_deterministic(self):
        ast = lx.parse_latex("\\frac{x+1}{y}=z_0^2")
        assert lx.render_latex(ast) == lx.render_latex(ast)

    def test_no_spaces(self):
        for seed in range(50):
            ast = sample_expression(GrammarConfig(max_depth=4), seed)
            assert " " not in lx.render_latex(ast)


class TestRoundTrip:
    def test_parse_render_identity_on_sampled_asts(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(2000):
            ast = sample_expression(cfg, seed)
            rendered = lx.render_latex(ast)
            assert lx.parse_latex(rendered) == ast, (seed, rendered)

    def test_render_parse_normalize_fixpoint(self):
        for src in ["x+5y+10z=0", "$ e^{ix} = \\cos(x) + i \\sin(x) $",
                    "\\phi_{H_k}(y)=Ey", "\\frac{1}{2}", "x_0=x(t)",
                    "a+{b+c}", "2\\times3", "(x+1)^2"]:
            ast = lx.parse_latex(src)
            assert lx.normalize_latex(lx.render_latex(ast)) == lx.normalize_latex(src)


class TestValidate:
    def test_rejects_bad_number(self):
        with pytest.raises(ValueError):
            lx.validate_ast(lx.Number(""))

    def test_rejects_bad_apply_head(self):
        with pytest.raises(ValueError):
            lx.validate_ast(lx.Apply(lx.Number("2"), lx.Variable("x")))

    def test_rejects_short_sequence(self):
        with pytest.raises(ValueError):
            lx.validate_ast(lx.Seq((lx.Variable("x"),)))

    def test_accepts_sampled(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(200):
            lx.validate_ast(sample_expression(cfg, seed))
