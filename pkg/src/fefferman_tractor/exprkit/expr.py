import math
import logging
from fractions import Fraction

import numpy as np

logger = logging.getLogger(__name__)

UNARY_FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh")
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}

_FLOAT_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sinh": math.sinh,
    "cosh": math.cosh,
}


class Expr:
    """Node of an immutable expression DAG.

    Nodes are only created through an ExprPool, which interns them: building
    the same kind/value/children twice returns the very same object, so node
    identity is structural equality.
    """

    __slots__ = ("pool", "kind", "value", "children")

    def __init__(self, pool, kind, value, children):
        self.pool = pool
        self.kind = kind
        self.value = value
        self.children = children

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def __add__(self, other):
        return self.pool.add(self, self.pool.coerce(other))

    def __radd__(self, other):
        return self.pool.add(self.pool.coerce(other), self)

    def __sub__(self, other):
        return self.pool.sub(self, self.pool.coerce(other))

    def __rsub__(self, other):
        return self.pool.sub(self.pool.coerce(other), self)

    def __mul__(self, other):
        return self.pool.mul(self, self.pool.coerce(other))

    def __rmul__(self, other):
        return self.pool.mul(self.pool.coerce(other), self)

    def __truediv__(self, other):
        return self.pool.div(self, self.pool.coerce(other))

    def __rtruediv__(self, other):
        return self.pool.div(self.pool.coerce(other), self)

    def __neg__(self):
        return self.pool.neg(self)

    def __pow__(self, exponent):
        return self.pool.pow(self, exponent)

    def __repr__(self):
        text = to_source(self)
        if len(text) > 120:
            text = text[:117] + "..."
        return f"Expr({text})"


class ExprPool:
    """Interning table plus the derivative memo for one family of expressions.

    Construction is single threaded; once built, nodes are never mutated and
    can be read from any number of workers.
    """

    def __init__(self):
        self._nodes = {}
        self._derivatives = {}

    def __len__(self):
        return len(self._nodes)

    def _intern(self, kind, value, children=()):
        key = (kind, _value_key(value), tuple(id(child) for child in children))
        node = self._nodes.get(key)
        if node is None:
            node = Expr(self, kind, value, tuple(children))
            self._nodes[key] = node
        return node

    # leaves

    def constant(self, value):
        if isinstance(value, bool):
            raise ExprException(f"Boolean is not a valid constant: {value}")
        if isinstance(value, int):
            value = Fraction(value)
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise ExprException(f"Non-finite constant: {value}")
            if value == 0.0:
                value = 0.0
        elif not isinstance(value, Fraction):
            raise ExprException(f"Unsupported constant type: {type(value).__name__}")
        return self._intern("const", value)

    def symbol(self, name: str):
        return self._intern("sym", name)

    def coerce(self, value):
        if isinstance(value, Expr):
            if value.pool is not self:
                raise ExprException("Cannot combine expressions from different pools")
            return value
        return self.constant(value)

    # unary

    def neg(self, a):
        if a.is_constant:
            return self.constant(-a.value)
        if a.kind == "neg":
            return a.children[0]
        return self._intern("neg", None, (a,))

    def function(self, name: str, a):
        if name not in _FLOAT_FUNCTIONS:
            raise ExprException(f"Unknown function: {name}")
        if a.is_constant:
            folded = _fold_function(name, float(a.value))
            if folded is not None:
                return self.constant(folded)
        return self._intern(name, None, (a,))

    def sin(self, a):
        return self.function("sin", a)

    def cos(self, a):
        return self.function("cos", a)

    def tan(self, a):
        return self.function("tan", a)

    def exp(self, a):
        return self.function("exp", a)

    def log(self, a):
        return self.function("log", a)

    def sqrt(self, a):
        return self.function("sqrt", a)

    def sinh(self, a):
        return self.function("sinh", a)

    def cosh(self, a):
        return self.function("cosh", a)

    # binary

    def add(self, a, b):
        if a.is_constant and b.is_constant:
            return self.constant(a.value + b.value)
        if _is_zero(a):
            return b
        if _is_zero(b):
            return a
        return self._intern("add", None, (a, b))

    def sub(self, a, b):
        if a.is_constant and b.is_constant:
            return self.constant(a.value - b.value)
        if _is_zero(b):
            return a
        if _is_zero(a):
            return self.neg(b)
        if a is b:
            return self.constant(0)
        return self._intern("sub", None, (a, b))

    def mul(self, a, b):
        if a.is_constant and b.is_constant:
            return self.constant(a.value * b.value)
        if _is_zero(a) or _is_zero(b):
            return self.constant(0)
        if _is_one(a):
            return b
        if _is_one(b):
            return a
        return self._intern("mul", None, (a, b))

    def div(self, a, b):
        if _is_zero(b):
            # left in the graph; evaluation reports the division by zero
            return self._intern("div", None, (a, b))
        if a.is_constant and b.is_constant:
            return self.constant(a.value / b.value)
        if _is_zero(a):
            return self.constant(0)
        if _is_one(b):
            return a
        return self._intern("div", None, (a, b))

    def pow(self, a, exponent):
        if isinstance(exponent, Expr):
            if not exponent.is_constant or Fraction(exponent.value).denominator != 1:
                raise NonIntegerExponentException(f"Exponent must be an integer literal, got {to_source(exponent)}")
            exponent = int(exponent.value)
        if isinstance(exponent, bool) or not isinstance(exponent, int):
            raise NonIntegerExponentException(f"Exponent must be an integer literal, got {exponent!r}")
        if exponent < 0:
            raise NonIntegerExponentException(f"Exponent must be non-negative, got {exponent}")
        if exponent == 0:
            return self.constant(1)
        if exponent == 1:
            return a
        if a.is_constant:
            return self.constant(a.value ** exponent)
        return self._intern("pow", exponent, (a,))

    # calculus

    def diff(self, e, coord: str):
        key = (id(e), coord)
        cached = self._derivatives.get(key)
        if cached is not None:
            return cached
        result = self._diff_node(e, coord)
        self._derivatives[key] = result
        return result

    def _diff_node(self, e, coord):
        kind = e.kind
        if kind == "const":
            return self.constant(0)
        if kind == "sym":
            return self.constant(1 if e.value == coord else 0)
        if kind == "neg":
            return self.neg(self.diff(e.children[0], coord))
        if kind == "add":
            a, b = e.children
            return self.add(self.diff(a, coord), self.diff(b, coord))
        if kind == "sub":
            a, b = e.children
            return self.sub(self.diff(a, coord), self.diff(b, coord))
        if kind == "mul":
            a, b = e.children
            return self.add(self.mul(self.diff(a, coord), b), self.mul(a, self.diff(b, coord)))
        if kind == "div":
            a, b = e.children
            numerator = self.sub(self.mul(self.diff(a, coord), b), self.mul(a, self.diff(b, coord)))
            return self.div(numerator, self.pow(b, 2))
        if kind == "pow":
            (a,) = e.children
            k = e.value
            return self.mul(self.mul(self.constant(k), self.pow(a, k - 1)), self.diff(a, coord))
        (a,) = e.children
        da = self.diff(a, coord)
        if _is_zero(da):
            return da
        if kind == "sin":
            return self.mul(self.cos(a), da)
        if kind == "cos":
            return self.neg(self.mul(self.sin(a), da))
        if kind == "tan":
            return self.mul(self.add(self.constant(1), self.pow(self.tan(a), 2)), da)
        if kind == "exp":
            return self.mul(e, da)
        if kind == "log":
            return self.div(da, a)
        if kind == "sqrt":
            return self.div(da, self.mul(self.constant(2), e))
        if kind == "sinh":
            return self.mul(self.cosh(a), da)
        if kind == "cosh":
            return self.mul(self.sinh(a), da)
        raise ExprException(f"No derivative rule for node kind {kind}")


DEFAULT_POOL = ExprPool()


def diff(e: Expr, coord: str) -> Expr:
    """Exact derivative of e with respect to the coordinate named coord."""
    return e.pool.diff(e, coord)


def diff_multi(e: Expr, coords) -> Expr:
    for coord in coords:
        e = diff(e, coord)
    return e


def free_symbols(e: Expr) -> set:
    seen = set()
    names = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.kind == "sym":
            names.add(node.value)
        stack.extend(node.children)
    return names


def to_source(e: Expr) -> str:
    """Print e in the input grammar; parsing the text gives back e itself."""
    kind = e.kind
    if kind == "const":
        return _constant_source(e.value)
    if kind == "sym":
        return e.value
    if kind == "neg":
        return f"(-{to_source(e.children[0])})"
    if kind in BINARY_SYMBOLS:
        a, b = e.children
        return f"({to_source(a)}{BINARY_SYMBOLS[kind]}{to_source(b)})"
    if kind == "pow":
        return f"({to_source(e.children[0])})^{e.value}"
    return f"{kind}({to_source(e.children[0])})"


def _constant_source(value) -> str:
    if isinstance(value, Fraction):
        magnitude = abs(value)
        if magnitude.denominator == 1:
            text = str(magnitude.numerator)
        else:
            text = f"({magnitude.numerator}/{magnitude.denominator})"
    else:
        text = np.format_float_positional(abs(value), unique=True, trim="0")
    if value < 0:
        return f"(-{text})"
    return text


def _value_key(value):
    if isinstance(value, Fraction):
        return ("q", value)
    if isinstance(value, float):
        return ("f", value)
    return value


def _is_zero(e) -> bool:
    return e.kind == "const" and e.value == 0


def _is_one(e) -> bool:
    return e.kind == "const" and e.value == 1


def _fold_function(name, x):
    try:
        folded = _FLOAT_FUNCTIONS[name](x)
    except (ValueError, OverflowError):
        return None
    if not math.isfinite(folded):
        return None
    return folded


class ExprException(Exception):
    pass


class NonIntegerExponentException(ExprException):
    pass
