import math
import unittest
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

# If you see a linter error here, ensure the package is installed with `pip install -e .` from the project root.
from fefferman_tractor.exprkit import (
    DomainEvaluationException,
    ExprPool,
    ExprSyntaxException,
    InvalidPointException,
    NonIntegerExponentException,
    UndeclaredIdentifierException,
    diff,
    diff_multi,
    evaluate,
    evaluate_many,
    free_symbols,
    parse,
    to_source,
)

##  python -m unittest tests/exprkit_tests.py -v

coords = ["x", "y"]

sources = {
    "polynomial": "x^3*y - 2*x*y^2 + 1/3",
    "trig": "sin(x)*cos(y) + tan(x/2)",
    "exponential": "exp(x^2) - x*exp(-y)",
    "roots": "sqrt(2 + x^2)*log(3 + y)",
    "hyperbolic": "sinh(x)*cosh(y) - 0.5*x",
}

points = [[0.3, -0.2], [-0.7, 0.4], [0.1, 0.9]]


def build(pool, node):
    if isinstance(node, str):
        return pool.symbol(node)
    if isinstance(node, int):
        return pool.constant(node)
    op = node[0]
    children = [build(pool, child) for child in node[1:]]
    if op == "sq":
        return pool.pow(children[0], 2)
    if op in ("sin", "cos"):
        return pool.function(op, children[0])
    return getattr(pool, op)(*children)


leaves = st.sampled_from(["x", "y"]) | st.integers(min_value=-3, max_value=3)
trees = st.recursive(
    leaves,
    lambda children: st.tuples(st.sampled_from(["add", "sub", "mul"]), children, children)
    | st.tuples(st.sampled_from(["sin", "cos", "sq"]), children),
    max_leaves=8,
)


class ExprKitTests(unittest.TestCase):
    def setUp(self) -> None:
        self.pool = ExprPool()
        self.exprs = {name: parse(source, coords, self.pool) for name, source in sources.items()}
        return super().setUp()

    def test_hash_consing_returns_same_node(self):
        first = parse("x*y + sin(x)", coords, self.pool)
        second = parse("x*y + sin(x)", coords, self.pool)
        self.assertIs(first, second)
        self.assertIs(self.pool.symbol("x"), self.pool.symbol("x"))
        size = len(self.pool)
        parse("x*y + sin(x)", coords, self.pool)
        self.assertEqual(len(self.pool), size)

    def test_constant_folding(self):
        self.assertEqual(parse("2*3 + 1", coords, self.pool).value, Fraction(7))
        self.assertIs(parse("x*1", coords, self.pool), self.pool.symbol("x"))
        self.assertIs(parse("x + 0", coords, self.pool), self.pool.symbol("x"))
        self.assertEqual(parse("0*x", coords, self.pool).value, Fraction(0))
        self.assertEqual(parse("x - x", coords, self.pool).value, Fraction(0))
        self.assertIs(parse("-(-x)", coords, self.pool), self.pool.symbol("x"))
        self.assertIs(parse("x^1", coords, self.pool), self.pool.symbol("x"))
        self.assertEqual(parse("y^0", coords, self.pool).value, Fraction(1))

    def test_rational_and_decimal_literals(self):
        third = parse("1/3", coords, self.pool)
        self.assertTrue(third.is_constant)
        self.assertEqual(third.value, Fraction(1, 3))
        self.assertEqual(parse("0.5", coords, self.pool).value, 0.5)
        with self.assertRaises(ExprSyntaxException):
            parse("1/0", coords, self.pool)
        with self.assertRaises(ExprSyntaxException):
            parse("x/(2 - 2)", coords, self.pool)

    def test_division_is_left_associative(self):
        self.assertAlmostEqual(evaluate(parse("x/2/3", ["x"], self.pool), [6.0], ["x"]), 1.0, places=14)
        self.assertEqual(parse("3/4^2", coords, self.pool).value, Fraction(3, 16))
        self.assertEqual(parse("1/2/4", coords, self.pool).value, Fraction(1, 8))
        self.assertEqual(parse("-3/4", coords, self.pool).value, Fraction(-3, 4))
        self.assertIs(parse("x/2/3", coords, self.pool), parse("(x/2)/3", coords, self.pool))
        self.assertIsNot(parse("x/2/3", coords, self.pool), parse("x/(2/3)", coords, self.pool))

    def test_rejects_syntax_errors_with_position(self):
        with self.assertRaises(ExprSyntaxException) as context:
            parse("x +* y", coords, self.pool)
        self.assertEqual(context.exception.line, 1)
        with self.assertRaises(ExprSyntaxException):
            parse("sin(x", coords, self.pool)
        with self.assertRaises(ExprSyntaxException):
            parse("", coords, self.pool)

    def test_rejects_undeclared_identifier(self):
        with self.assertRaises(UndeclaredIdentifierException) as context:
            parse("x + z", coords, self.pool)
        self.assertEqual(context.exception.name, "z")

    def test_rejects_non_integer_exponent(self):
        with self.assertRaises(NonIntegerExponentException):
            parse("x^2.5", coords, self.pool)
        with self.assertRaises(NonIntegerExponentException):
            parse("x^y", coords, self.pool)

    def test_to_source_parses_back_to_same_node(self):
        for name, e in self.exprs.items():
            with self.subTest(name=name):
                self.assertIs(parse(to_source(e), coords, self.pool), e)
                derivative = diff(e, "x")
                self.assertIs(parse(to_source(derivative), coords, self.pool), derivative)

    def test_free_symbols(self):
        self.assertEqual(free_symbols(self.exprs["polynomial"]), {"x", "y"})
        self.assertEqual(free_symbols(parse("x^2 + 1", coords, self.pool)), {"x"})
        self.assertEqual(free_symbols(parse("2", coords, self.pool)), set())

    def test_derivative_values(self):
        sin_x = parse("sin(x)", coords, self.pool)
        self.assertAlmostEqual(evaluate(diff(sin_x, "x"), [0.3, 0.0], coords), 0.955336489125606, places=12)
        gauss = parse("exp(x^2)", coords, self.pool)
        self.assertAlmostEqual(evaluate(diff(gauss, "x"), [1.0, 0.0], coords), 2 * math.e, places=12)
        self.assertEqual(diff(sin_x, "y").value, Fraction(0))

    def test_derivative_is_memoized(self):
        e = self.exprs["trig"]
        self.assertIs(diff(e, "x"), diff(e, "x"))

    def test_mixed_partials_commute(self):
        for name, e in self.exprs.items():
            with self.subTest(name=name):
                xy = evaluate_many([diff_multi(e, ["x", "y"])], points, coords)[0]
                yx = evaluate_many([diff_multi(e, ["y", "x"])], points, coords)[0]
                for a, b in zip(xy, yx):
                    self.assertAlmostEqual(a, b, delta=1e-12 * (1 + abs(a)))

    def test_derivatives_match_central_differences(self):
        h = 1e-5
        for name, e in self.exprs.items():
            for point in points:
                for axis, coord in enumerate(coords):
                    with self.subTest(name=name, point=point, coord=coord):
                        up = list(point)
                        down = list(point)
                        up[axis] += h
                        down[axis] -= h
                        numeric = (evaluate(e, up, coords) - evaluate(e, down, coords)) / (2 * h)
                        exact = evaluate(diff(e, coord), point, coords)
                        self.assertAlmostEqual(exact, numeric, delta=1e-7 * (1 + abs(exact)))

    def test_domain_errors_name_the_node(self):
        with self.assertRaises(DomainEvaluationException):
            evaluate(parse("log(x)", coords, self.pool), [-1.0, 0.0], coords)
        with self.assertRaises(DomainEvaluationException):
            evaluate(parse("sqrt(x)", coords, self.pool), [-1.0, 0.0], coords)
        with self.assertRaises(DomainEvaluationException):
            evaluate(parse("1/x", coords, self.pool), [0.0, 0.0], coords)

    def test_rejects_bad_points(self):
        e = self.exprs["polynomial"]
        with self.assertRaises(InvalidPointException):
            evaluate(e, [0.1, 0.2, 0.3], coords)
        with self.assertRaises(InvalidPointException):
            evaluate(e, [float("nan"), 0.2], coords)

    def test_evaluate_many_shares_points(self):
        values = evaluate_many(list(self.exprs.values()), points, coords)
        self.assertEqual(len(values), len(sources))
        for column in values:
            self.assertEqual(len(column), len(points))
        self.assertAlmostEqual(values[0][0], 0.3**3 * -0.2 - 2 * 0.3 * 0.04 + 1 / 3, places=12)

    @settings(max_examples=1000, deadline=None)
    @given(tree=trees, x=st.floats(min_value=-1, max_value=1), y=st.floats(min_value=-1, max_value=1))
    def test_random_trees_match_central_differences(self, tree, x, y):
        pool = ExprPool()
        e = build(pool, tree)
        h = 1e-5
        value = evaluate(e, [x, y], coords)
        exact = evaluate(diff(e, "x"), [x, y], coords)
        numeric = (evaluate(e, [x + h, y], coords) - evaluate(e, [x - h, y], coords)) / (2 * h)
        self.assertLessEqual(abs(exact - numeric), 1e-5 * (1 + abs(exact) + abs(value)))


if __name__ == "__main__":
    unittest.main()
