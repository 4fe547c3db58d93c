"""Recursive descent parser for the closed-form expression grammar.

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := ("-")? power
    power  := atom ("^" integer)?
    atom   := number | ident | func "(" expr ")" | "(" expr ")"
    number := decimal | integer
"""
import re

from .expr import DEFAULT_POOL, UNARY_FUNCTIONS, ExprException, NonIntegerExponentException

_TOKEN_PATTERN = re.compile(
    r"(?P<space>[ \t\r\n]+)"
    r"|(?P<decimal>[0-9]+\.[0-9]*)"
    r"|(?P<integer>[0-9]+)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


class Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def tokenize(source: str) -> list:
    tokens = []
    position = 0
    line = 1
    line_start = 0
    while position < len(source):
        match = _TOKEN_PATTERN.match(source, position)
        column = position - line_start + 1
        if match is None:
            raise ExprSyntaxException(f"Unexpected character {source[position]!r}", line, column)
        kind = match.lastgroup
        text = match.group()
        if kind == "space":
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = position + text.rfind("\n") + 1
        else:
            tokens.append(Token(kind, text, line, column))
        position = match.end()
    tokens.append(Token("eof", "", line, position - line_start + 1))
    return tokens


class Parser:
    def __init__(self, source: str, coords, pool=None):
        self.pool = pool if pool is not None else DEFAULT_POOL
        self.coords = list(coords)
        self.tokens = tokenize(source)
        self.index = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def at_op(self, text: str, offset: int = 0) -> bool:
        token = self.peek(offset)
        return token.kind == "op" and token.text == text

    def expect_op(self, text: str) -> Token:
        token = self.peek()
        if not self.at_op(text):
            raise self.error(f"Expected {text!r}", token)
        return self.advance()

    def error(self, message, token):
        found = token.text if token.kind != "eof" else "end of input"
        return ExprSyntaxException(f"{message}, found {found!r}", token.line, token.column)

    def parse(self):
        result = self.parse_expr()
        token = self.peek()
        if token.kind != "eof":
            raise self.error("Unexpected token", token)
        return result

    def parse_expr(self):
        result = self.parse_term()
        while self.at_op("+") or self.at_op("-"):
            op = self.advance().text
            right = self.parse_term()
            result = self.pool.add(result, right) if op == "+" else self.pool.sub(result, right)
        return result

    def parse_term(self):
        result = self.parse_factor()
        while self.at_op("*") or self.at_op("/"):
            token = self.advance()
            right = self.parse_factor()
            if token.text == "*":
                result = self.pool.mul(result, right)
                continue
            if right.is_constant and right.value == 0:
                raise ExprSyntaxException("Division by a zero constant", token.line, token.column)
            # left associative: a/b/c is (a/b)/c; constant quotients fold to exact rationals
            result = self.pool.div(result, right)
        return result

    def parse_factor(self):
        if self.at_op("-"):
            self.advance()
            return self.pool.neg(self.parse_power())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.at_op("^"):
            self.advance()
            token = self.peek()
            if token.kind != "integer":
                raise NonIntegerExponentException(
                    f"Exponent must be an integer literal at line {token.line}, column {token.column}, "
                    f"found {token.text or 'end of input'!r}"
                )
            self.advance()
            return self.pool.pow(base, int(token.text))
        return base

    def parse_atom(self):
        token = self.peek()
        if token.kind == "integer":
            self.advance()
            return self.pool.constant(int(token.text))
        if token.kind == "decimal":
            self.advance()
            return self.pool.constant(float(token.text))
        if token.kind == "ident":
            self.advance()
            if token.text in UNARY_FUNCTIONS:
                self.expect_op("(")
                argument = self.parse_expr()
                self.expect_op(")")
                return self.pool.function(token.text, argument)
            if token.text not in self.coords:
                raise UndeclaredIdentifierException(
                    f"Undeclared identifier {token.text!r} at line {token.line}, column {token.column}; "
                    f"declared coordinates are {self.coords}",
                    token.text,
                    token.line,
                    token.column,
                )
            return self.pool.symbol(token.text)
        if self.at_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise self.error("Expected a number, identifier, function or '('", token)


def parse(source: str, coords, pool=None):
    """Parse source into a hash-consed expression over the declared coordinates."""
    return Parser(source, coords, pool).parse()


class ExprSyntaxException(ExprException):
    def __init__(self, message, line, column):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class UndeclaredIdentifierException(ExprException):
    def __init__(self, message, name, line, column):
        super().__init__(message)
        self.name = name
        self.line = line
        self.column = column
