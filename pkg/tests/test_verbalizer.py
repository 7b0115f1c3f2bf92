import math

import pytest

from spokenmath import latex as lx
from spokenmath.verbalize import (
    GrammarConfig,
    VerbalStyle,
    all_styles,
    ast_depth,
    default_styles,
    root_kind_probability,
    sample_expression,
    verbalize,
)

DIGITS = VerbalStyle("digits", "to-the-power-of", "over")
WORDS = VerbalStyle("words", "to-the-power-of", "over")


class TestVerbalize:
    def test_euler_formula_matches_expected_reading(self):
        ast = lx.parse_latex("e^{ix}=\\cos(x)+i\\sin(x)")
        assert verbalize(ast, DIGITS) == \
            "e to the power of i x equals cosine of x plus i sine of x"

    def test_leaf(self):
        assert verbalize(lx.Variable("x"), DIGITS) == "x"

    def test_number_mode_variants_share_one_latex(self):
        ast = lx.parse_latex("x+5y+10z=0")
        assert verbalize(ast, WORDS) == "x plus five y plus ten z equals zero"
        assert verbalize(ast, DIGITS) == "x plus 5 y plus 10 z equals 0"

    def test_output_is_lowercase_single_spaced(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(100):
            for style in all_styles():
                text = verbalize(sample_expression(cfg, seed), style)
                assert text == text.lower()
                assert "  " not in text
                assert text == " ".join(text.split())

    def test_uppercase_variables_verbalize_lowercase(self):
        ast = lx.parse_latex("Ey")
        assert verbalize(ast, DIGITS) == "e y"

    def test_deterministic(self):
        ast = sample_expression(GrammarConfig(), 9)
        for style in all_styles():
            assert verbalize(ast, style) == verbalize(ast, style)

    def test_power_shortcuts(self):
        s = VerbalStyle("digits", "shortcuts", "over")
        assert verbalize(lx.parse_latex("x^2"), s) == "x squared"
        assert verbalize(lx.parse_latex("x^3"), s) == "x cubed"
        assert verbalize(lx.parse_latex("x^4"), s) == "x to the power of 4"

    def test_fraction_modes(self):
        frac = lx.parse_latex("\\frac{1}{2}")
        assert verbalize(frac, DIGITS) == "1 over 2"
        block = VerbalStyle("digits", "to-the-power-of", "the-fraction")
        assert verbalize(frac, block) == "the fraction 1 over 2 end fraction"

    def test_over_binds_tighter_than_plus(self):
        ast = lx.parse_latex("a+\\frac{b}{c}")
        assert verbalize(ast, DIGITS) == "a plus b over c"

    def test_ambiguous_operands_get_quantity_markers(self):
        nested = lx.BinOp("+", lx.Variable("a"),
                          lx.BinOp("+", lx.Variable("b"), lx.Variable("c")))
        assert verbalize(nested, DIGITS) == "a plus the quantity b plus c end quantity"

    def test_adjacent_numbers_get_times(self):
        ast = lx.BinOp("*", lx.Number("20"), lx.Number("3"))
        assert verbalize(ast, WORDS) == "twenty times three"
        assert verbalize(ast, DIGITS) == "20 times 3"

    def test_invalid_style_rejected(self):
        with pytest.raises(ValueError):
            VerbalStyle(number_mode="roman")


class TestSampler:
    def test_depth_one_forces_leaf(self):
        cfg = GrammarConfig(max_depth=1)
        for seed in range(50):
            ast = sample_expression(cfg, seed)
            assert isinstance(ast, (lx.Number, lx.Variable, lx.Greek))

    def test_determinism(self):
        cfg = GrammarConfig(max_depth=4)
        for seed in range(50):
            assert sample_expression(cfg, seed) == sample_expression(cfg, seed)

    def test_depth_bound(self):
        for depth in (1, 2, 3, 4, 5):
            cfg = GrammarConfig(max_depth=depth)
            for seed in range(300):
                assert ast_depth(sample_expression(cfg, seed)) <= depth

    def test_root_distribution_tracks_weights(self):
        weights = dict(GrammarConfig().weights)
        weights["equality"] = 60.0
        cfg = GrammarConfig(max_depth=4, weights=weights)
        p = root_kind_probability(cfg, "equality")
        assert p >= 0.6
        n = 10_000
        roots = sum(
            isinstance(sample_expression(cfg, seed), lx.BinOp)
            and sample_expression(cfg, seed).op == "="
            for seed in range(n))
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(roots - n * p) <= 3 * sigma
        assert roots / n >= 0.6 - 3 * sigma / n

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            GrammarConfig(weights={"variable": 0.0})
        with pytest.raises(ValueError):
            GrammarConfig(weights={"nonsense": 1.0})
        with pytest.raises(ValueError):
            GrammarConfig(max_depth=0)

    def test_sampled_asts_are_valid(self):
        cfg = GrammarConfig(max_depth=5)
        for seed in range(300):
            lx.validate_ast(sample_expression(cfg, seed))

    def test_style_inventories(self):
        assert len(default_styles()) >= 2
        assert len(all_styles()) == 8
        assert len({(s.number_mode, s.power_mode, s.fraction_mode)
                    for s in all_styles()}) == 8
