import random
from fractions import Fraction

import pytest

from jetmech.dsl import (
    BinOp,
    DuplicateDeclarationError,
    ExprContext,
    ParseError,
    PRESETS,
    SigRef,
    UndeclaredSymbolError,
    format_expr,
    parse_expr,
    parse_system,
    preset,
    text_to_expr,
)
from jetmech.errors import ReconstructionError
from jetmech.formcalc import VerticalOneForm
from jetmech.symexpr import (
    TAU,
    Expr,
    acc,
    PolynomialSignal,
    SinusoidSignal,
    ZERO,
    coord,
    param,
    polynomial_signal,
    signal_symbol,
    sinusoid_signal,
    vel,
)
from jetmech.verify import random_expr

X, V = Expr.var(coord(0)), Expr.var(vel(0))
K, M, B = Expr.var(param("k")), Expr.var(param("m")), Expr.var(param("b"))

CTX = ExprContext(
    coords=("x", "y", "z"),
    params=frozenset({"k", "m", "b", "p", "q"}),
    signals={
        "f": sinusoid_signal("f", Fraction(3, 10), Fraction(6, 5), 0),
        "w": polynomial_signal("w", 1, Fraction(-1, 2), Fraction(1, 3)),
    },
)


class TestParseExpr:
    def test_force_law_tree(self):
        tree = parse_expr("-k*x - b*x' + sig(f)")
        assert isinstance(tree, BinOp) and tree.op == "+"
        assert isinstance(tree.rhs, SigRef) and tree.rhs.name == "f"
        value = text_to_expr("-k*x - b*x' + sig(f)", CTX)
        f = CTX.signals["f"]
        assert value == -K * X - B * V + Expr.var(signal_symbol(f))

    def test_lagrangian_surface_form(self):
        value = text_to_expr("m*x'^2/2 - k*x^2/2", CTX)
        assert value == Expr.const(Fraction(1, 2)) * M * V**2 - Expr.const(
            Fraction(1, 2)
        ) * K * X**2

    def test_missing_operand_position(self):
        with pytest.raises(ParseError) as err:
            parse_expr("x +")
        assert (err.value.line, err.value.col) == (1, 4)
        assert "expected operand" in err.value.message

    def test_precedence_and_unary_minus(self):
        assert text_to_expr("-k*x^2", CTX) == -K * X**2
        assert text_to_expr("2 + 3*4", CTX) == Expr.const(14)
        assert text_to_expr("(2 + 3)*4", CTX) == Expr.const(20)
        assert text_to_expr("-x^2", CTX) == -(X**2)

    def test_division_by_literal_only(self):
        assert text_to_expr("x/4", CTX) == X / 4
        with pytest.raises(ParseError) as err:
            parse_expr("x/y")
        assert "numeric literal" in err.value.message
        with pytest.raises(ParseError):
            parse_expr("x/0")

    def test_exponent_must_be_nonnegative_integer(self):
        with pytest.raises(ParseError):
            parse_expr("x^y")
        with pytest.raises(ParseError):
            parse_expr("x^1.5")

    def test_decimal_literals_are_exact(self):
        assert text_to_expr("1.25", CTX) == Expr.const(Fraction(5, 4))
        assert text_to_expr("1e-3", CTX) == Expr.const(Fraction(1, 1000))
        assert text_to_expr("2.5e2", CTX) == Expr.const(250)

    def test_time_reserved(self):
        assert text_to_expr("t^2", CTX) == Expr.var(TAU) ** 2
        with pytest.raises(ParseError):
            parse_expr("t'")

    def test_nested_signal_derivatives(self):
        w = CTX.signals["w"]
        assert text_to_expr("dsig(w)", CTX) == Expr.var(signal_symbol(w, 1))
        assert text_to_expr("dsig(dsig(w))", CTX) == Expr.var(signal_symbol(w, 2))

    def test_undeclared_symbol(self):
        with pytest.raises(UndeclaredSymbolError) as err:
            text_to_expr("k*q2", CTX)
        assert "q2" in str(err.value)

    def test_acceleration_allowed_only_when_permitted(self):
        assert text_to_expr("x''", ExprContext(coords=("x",))) == Expr.var(acc(0))
        with pytest.raises(ParseError):
            text_to_expr("x''", ExprContext(coords=("x",), allow_acceleration=False))

    def test_error_positions_battery(self):
        cases = [
            ("x +", 1, 4),
            ("(x", 1, 3),
            ("x ^ y", 1, 5),
            ("* x", 1, 1),
            ("x 2", 1, 3),
            ("sig()", 1, 5),
            ("sig(f", 1, 6),
            ("x @ 2", 1, 3),
            ("x +\n y *", 2, 5),
        ]
        for text, line, col in cases:
            with pytest.raises(ParseError) as err:
                parse_expr(text)
            assert (err.value.line, err.value.col) == (line, col), text
            # position indexes a real character or one-past-end of its line
            lines = text.split("\n")
            assert 1 <= err.value.line <= len(lines)
            assert 1 <= err.value.col <= len(lines[err.value.line - 1]) + 1


class TestFormatExpr:
    def test_oscillator_rendering(self):
        e = -K * X**2 + M * V**2
        assert format_expr(e, ("x",)) == "-k*x^2 + m*x'^2"

    def test_zero(self):
        assert format_expr(ZERO) == "0"

    def test_round_trip_random(self):
        rng = random.Random(101)
        for _ in range(100):
            n = rng.randint(1, 3)
            e = random_expr(rng, n, with_signal=rng.random() < 0.4)
            rt_ctx = ExprContext(
                coords=("x", "y", "z")[:n],
                params=frozenset({"p", "q"}),
                signals={"w": PolynomialSignal("w", (Fraction(1), Fraction(-1, 2), Fraction(1, 3)))},
            )
            text = format_expr(e, rt_ctx.coords)
            assert text_to_expr(text, rt_ctx) == e

    def test_round_trip_signal_orders(self):
        w = CTX.signals["w"]
        e = Expr.var(signal_symbol(w, 2)) * X - Expr.const(Fraction(3, 7))
        assert text_to_expr(format_expr(e, ("x",)), CTX) == e


DAMPED_HO_TEXT = PRESETS["damped_ho"]


class TestParseSystem:
    def test_damped_ho_block(self):
        spec = parse_system(DAMPED_HO_TEXT)
        assert spec.name == "damped_ho"
        assert spec.coords == ("x",)
        assert spec.params["b"] == Fraction(1, 10)
        f = spec.signals["f"]
        assert isinstance(f, SinusoidSignal)
        assert (f.amplitude, f.omega, f.phase) == (
            Fraction(3, 10),
            Fraction(6, 5),
            Fraction(0),
        )
        fe = Expr.var(signal_symbol(f))
        assert spec.phi == VerticalOneForm((-K * X - B * V + fe,), (M * V,))
        assert spec.init == ((1.0,), (0.0,))
        assert spec.time == (0.0, 20.0, 1e-3)

    def test_momentum_default_uses_mass_parameter(self):
        text = """
system "default-momentum" {
  parameter m = 2
  parameter k = 1
  coordinate x
  force x: -k*x
}
"""
        spec = parse_system(text)
        assert spec.phi.Pi == (M * V,)

    def test_no_mass_no_momentum_is_zero(self):
        text = 'system "massless" { parameter k = 1; coordinate x; force x: -k*x }'
        spec = parse_system(text)
        assert spec.phi.Pi == (ZERO,)

    def test_undeclared_symbol_named(self):
        text = 'system "bad" { parameter k = 1; coordinate x; force x: -k*x + q }'
        with pytest.raises(UndeclaredSymbolError) as err:
            parse_system(text)
        assert "'q'" in str(err.value)

    def test_duplicate_declaration(self):
        text = 'system "dup" { parameter k = 1; coordinate k; force k: 0 }'
        with pytest.raises(DuplicateDeclarationError):
            parse_system(text)

    def test_duplicate_clause(self):
        text = 'system "dup2" { coordinate x; force x: x; force x: 2*x }'
        with pytest.raises(DuplicateDeclarationError):
            parse_system(text)

    def test_reserved_names_rejected(self):
        with pytest.raises(ParseError):
            parse_system('system "r" { coordinate t }')
        with pytest.raises(ParseError):
            parse_system('system "r" { parameter sig = 1; coordinate x }')

    def test_semicolons_and_comments(self):
        text = (
            'system "compact" { parameter m = 1; coordinate x # trailing comment\n'
            "  force x: -x; momentum x: m*x' }"
        )
        spec = parse_system(text)
        assert spec.phi.F == (-X,)

    def test_polynomial_signal_and_fraction_args(self):
        text = (
            'system "poly" { parameter m = 1; coordinate x;\n'
            "  signal g = polynomial(1, -1/2, 1/3)\n"
            "  force x: sig(g) }"
        )
        spec = parse_system(text)
        g = spec.signals["g"]
        assert isinstance(g, PolynomialSignal)
        assert g.coeffs == (Fraction(1), Fraction(-1, 2), Fraction(1, 3))

    def test_acceleration_rejected_in_force(self):
        text = 'system "acc" { parameter m = 1; coordinate x; force x: x\'\' }'
        with pytest.raises(ParseError) as err:
            parse_system(text)
        assert "acceleration" in err.value.message

    def test_empty_input(self):
        with pytest.raises(ParseError):
            parse_system("")

    def test_missing_brace_position(self):
        text = 'system "open" {\n  coordinate x\n'
        with pytest.raises(ParseError) as err:
            parse_system(text)
        assert err.value.line == 3

    def test_declared_split_deferred_validation(self):
        # parse succeeds; validation reports the residual on demand
        text = """
system "badsplit" {
  parameter m = 1
  coordinate x
  force x: x
  momentum x: m*x'
  lagrangian: m*x'^2/2
}
"""
        spec = parse_system(text)
        assert spec.has_declared_split
        with pytest.raises(ReconstructionError) as err:
            spec.declared_decomposition()
        assert "x" in str(err.value)
        assert err.value.residual == VerticalOneForm((X,), (ZERO,))

    def test_time_clause_validation(self):
        with pytest.raises(ParseError):
            parse_system('system "t" { coordinate x; time 5 .. 1 step 0.1 }')
        with pytest.raises(ParseError):
            parse_system('system "t" { coordinate x; time 0 .. 1 step 0 }')

    def test_integrator_clause(self):
        spec = parse_system('system "i" { coordinate x; integrator rkf45 }')
        assert spec.integrator == "rkf45"
        with pytest.raises(ParseError):
            parse_system('system "i" { coordinate x; integrator euler }')

    def test_antiexact_dv_component(self):
        text = """
system "split2" {
  parameter m = 1
  parameter b = 1
  coordinate x
  force x: -b*x'/2
  momentum x: m*x' + b*x/2
  lagrangian: m*x'^2/2
  antiexact x: -b*x'/2
  antiexact x': b*x/2
}
"""
        spec = parse_system(text)
        dec = spec.declared_decomposition()
        assert dec.anti_exact == VerticalOneForm(
            (-B * V / 2,), (B * X / 2,)
        )


class TestPresets:
    def test_all_presets_parse(self):
        for name in PRESETS:
            spec = preset(name)
            assert spec.n == 1
            assert spec.init is not None and spec.time is not None

    def test_damped_ho_equation(self):
        spec = preset("damped_ho")
        f = spec.signals["f"]
        fe = Expr.var(signal_symbol(f))
        A = Expr.var(acc(0))
        assert spec.eom().normalized() == (M * A + K * X + B * V - fe,)

    def test_duffing_equation(self):
        spec = preset("duffing")
        A = Expr.var(acc(0))
        a_p = Expr.var(param("a"))
        assert spec.eom().normalized() == (M * A + a_p * X**3 + B * V,)

    def test_vanderpol_equation(self):
        spec = preset("vanderpol")
        A = Expr.var(acc(0))
        b0 = Expr.var(param("b0"))
        expected = M * A + K * X + b0 * (X**2 - 1) * V
        assert spec.eom().normalized() == (expected,)
