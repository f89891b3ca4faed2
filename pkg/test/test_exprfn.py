import numpy as np
import pytest

from src.errors import (
    AmbiguousPointError,
    DomainError,
    ExpressionSyntaxError,
    SingularPointError,
    UnknownIdentifierError,
)
from src.exprfn import (
    Binary,
    Const,
    PartitionedFunction,
    Piece,
    Unary,
    Var,
    differentiate,
    evaluate,
    evaluate_expression,
    evaluate_many,
    format_expression,
    inverse_derivative,
    invert_many,
    invert_piece,
    parse_expression,
    reflect,
    validate,
)


def sawtooth():
    return PartitionedFunction.from_pieces(
        (0, 1), [((0, 0.5), "2*x"), ((0.5, 1), "2 - 2*x")]
    )


def test_parse_examples():
    assert parse_expression("2*x") == Binary("*", Const(2.0), Var("x"))
    assert parse_expression("x^2") == Binary("^", Var("x"), Const(2.0))
    assert parse_expression("x**2") == parse_expression("x^2")


def test_parse_unclosed_paren_reports_offset():
    with pytest.raises(ExpressionSyntaxError) as error:
        parse_expression("sin(")
    assert error.value.offset == 4
    assert "(" in error.value.expected


def test_parse_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as error:
        parse_expression("2*y")
    assert error.value.name == "y"
    assert error.value.offset == 2


def test_parse_rejects_variable_exponent():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("x^x")


def test_parse_precedence():
    assert evaluate_expression(parse_expression("-x^2"), 3.0) == -9.0
    assert evaluate_expression(parse_expression("2^3^2"), 0.0) == 512.0
    assert evaluate_expression(parse_expression("1 - 2 - 3"), 0.0) == -4.0
    assert evaluate_expression(parse_expression("8/4/2"), 0.0) == 1.0
    assert evaluate_expression(parse_expression("2*pi"), 0.0) == pytest.approx(2 * np.pi)


def test_differentiate_examples():
    assert differentiate(parse_expression("x^2")) == Binary("*", Const(2.0), Var("x"))
    assert differentiate(parse_expression("sin(x)")) == Unary("cos", Var("x"))
    assert differentiate(parse_expression("2*x + 1")) == Const(2.0)


@pytest.mark.parametrize(
    "source",
    ["x^3 - 2*x", "sin(x)*exp(x)", "sqrt(x)/(1 + x)", "log(1 + x^2)", "abs(x - 0.3)", "cos(3*x)^2"],
)
def test_derivative_matches_central_differences(source):
    tree = parse_expression(source)
    derivative = differentiate(tree)
    xs = np.linspace(0.05, 0.95, 103)[1:-1]
    h = 1e-6
    numeric = (evaluate_expression(tree, xs + h) - evaluate_expression(tree, xs - h)) / (2 * h)
    symbolic = evaluate_expression(derivative, xs)
    assert np.all(np.abs(symbolic - numeric) <= 1e-6 * np.maximum(1.0, np.abs(numeric)))


def test_format_expression_reparses():
    for source in ["2 - (x - 1)", "x^2/(1 + x)", "-(x + 1)^3", "exp(-x)*sin(2*x)"]:
        tree = parse_expression(source)
        assert parse_expression(format_expression(tree)) == tree


def test_evaluate_sawtooth():
    u = sawtooth()
    assert evaluate(u, 0.25) == 0.5
    assert evaluate(u, 0.75) == 0.5
    with pytest.raises(DomainError):
        evaluate(u, 1.5)
    with pytest.raises(AmbiguousPointError):
        evaluate(u, 0.5)


def test_evaluate_many_matches_pointwise():
    u = sawtooth()
    xs = np.array([0.1, 0.3, 0.6, 0.9])
    assert np.allclose(evaluate_many(u, xs), [evaluate(u, x) for x in xs])


def test_validate_sawtooth_passes():
    report = validate(sawtooth(), (0.0, 1.0))
    assert report.passed
    assert report.onto


def test_validate_detects_non_monotone_piece():
    u = PartitionedFunction.from_pieces((-1, 1), [((-1, 1), "x^2")])
    report = validate(u, (0.0, 1.0))
    assert "piece[0].monotone" in [check.name for check in report.failures]
    assert not report.structurally_valid


def test_validate_detects_overlap():
    u = PartitionedFunction.from_pieces((0, 1), [((0, 0.5), "2*x"), ((0.4, 1), "2 - 2*x")])
    report = validate(u)
    assert "partition.disjoint" in [check.name for check in report.failures]


def test_validate_detects_gap_and_onto():
    u = PartitionedFunction.from_pieces((0, 1), [((0, 0.4), "x"), ((0.5, 1), "x")])
    report = validate(u, (0.0, 1.0))
    names = [check.name for check in report.failures]
    assert "partition.covering" in names
    assert "piece[0].onto" in names


def test_invert_piece_examples():
    square = Piece.build(0, 1, "x^2")
    assert invert_piece(square, 0.25) == pytest.approx(0.5, abs=1e-12)
    assert invert_piece(Piece.build(0, 0.5, "2*x"), 0.8) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(DomainError):
        invert_piece(square, 2.0)


def test_inverse_derivative_examples():
    square = Piece.build(0, 1, "x^2")
    assert inverse_derivative(square, 0.25) == pytest.approx(1.0, rel=1e-12)
    assert inverse_derivative(Piece.build(0, 0.5, "2*x"), 0.3) == pytest.approx(0.5, rel=1e-12)
    assert inverse_derivative(square, 1e-8) == pytest.approx(1 / (2 * np.sqrt(1e-8)), rel=1e-6)
    assert square.singular_values == (0.0,)
    with pytest.raises(SingularPointError):
        inverse_derivative(square, 0.0)


@pytest.mark.parametrize("power", [10, 20])
@pytest.mark.parametrize("y", [1e-50, 1e-93, 1e-200, 0.3])
def test_invert_flat_power_near_zero(power, y):
    piece = Piece.build(0, 1, f"x^{power}")
    x = invert_piece(piece, y)
    assert x == pytest.approx(y ** (1 / power), rel=1e-12)
    assert x**power == pytest.approx(y, rel=1e-10)
    xs = invert_many(piece, np.geomspace(1e-250, 1.0, 64))
    assert np.all(np.diff(xs) > 0)


@pytest.mark.parametrize(
    "interval, source",
    [((0, 0.5), "2*x"), ((0.5, 1), "2 - 2*x"), ((0, 1), "x^2"), ((0, 1), "sqrt(x)"), ((0, 1), "exp(x)")],
)
def test_inversion_round_trip(interval, source):
    piece = Piece.build(*interval, source)
    lo, hi = piece.image
    ys = np.random.default_rng(7).uniform(lo, hi, 10_000)
    xs = invert_many(piece, ys)
    residual = np.abs(evaluate_expression(piece.expr, xs) - ys)
    assert np.all(residual <= 1e-12 * np.maximum(1.0, np.abs(ys)))
    slopes = np.abs(evaluate_expression(piece.derivative, xs))
    product = np.array([inverse_derivative(piece, y) for y in ys[:50]]) * slopes[:50]
    assert np.allclose(product, 1.0, atol=1e-9)


def test_reflect_turns_decreasing_into_increasing():
    u = PartitionedFunction.from_pieces((0, 1), [((0, 1), "1 - x^2")])
    mirrored = reflect(u)
    assert u.pieces[0].direction == -1
    assert mirrored.pieces[0].direction == 1
    assert evaluate(mirrored, 0.3) == pytest.approx(evaluate(u, 0.7))
