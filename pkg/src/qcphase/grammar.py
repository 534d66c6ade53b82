"""Expression text format: parsing and canonical printing.

Grammar: variables ``qQ<i>``/``pQ<i>``/``qC<i>``/``pC<i>`` (index optional,
default 0), the symbol ``hbar``, the imaginary unit ``i``, integer literals,
operators ``+ - * / ^`` and parentheses.  ``^`` takes a non-negative integer
exponent; ``/`` divides by a nonzero constant (so ``5/2`` is the expected
rational).  Whitespace is insignificant.  ``parse(format_expression(e))``
returns ``e`` exactly for every canonical expression.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import Coefficient, Expression, VariableId

_OPERATORS = "+-*/^()"


class ParseError(ValueError):
    """Syntax error with a 1-based column and the set of expected tokens."""

    def __init__(self, message: str, column: int, expected: tuple = ()):
        self.column = column
        self.expected = tuple(expected)
        detail = f"{message} at column {column}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)


def _tokenize(src: str) -> list:
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        ch = src[pos]
        if ch.isspace():
            pos += 1
            continue
        col = pos + 1
        if ch in _OPERATORS:
            tokens.append((ch, ch, col))
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < n and src[pos].isdigit():
                pos += 1
            tokens.append(("number", src[start:pos], col))
        elif ch.isalpha() or ch == "_":
            start = pos
            while pos < n and (src[pos].isalnum() or src[pos] == "_"):
                pos += 1
            tokens.append(("name", src[start:pos], col))
        else:
            raise ParseError(f"unexpected character {ch!r}", col)
    tokens.append(("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, expected: tuple):
        kind, value, col = self.peek()
        shown = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {shown}", col, expected)

    def parse(self) -> Expression:
        e = self.expression()
        if self.peek()[0] != "end":
            self.fail(("operator", "end of input"))
        return e

    def expression(self) -> Expression:
        e = self.term()
        while self.peek()[0] in "+-":
            op = self.advance()[0]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self.peek()[0] in "*/":
            op, _value, col = self.advance()
            rhs = self.factor()
            if op == "*":
                e = e * rhs
            else:
                if not rhs.is_constant():
                    raise ParseError("division only by constants", col)
                denom = rhs.constant_value()
                if not denom:
                    raise ParseError("division by zero", col)
                e = e * (Coefficient.of(1) / denom)
        return e

    def factor(self) -> Expression:
        kind, _value, _col = self.peek()
        if kind in "+-":
            op = self.advance()[0]
            inner = self.factor()
            return inner if op == "+" else -inner
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            kind, value, col = self.peek()
            if kind != "number":
                self.fail(("non-negative integer exponent",))
            self.advance()
            return base ** int(value)
        return base

    def atom(self) -> Expression:
        kind, value, col = self.peek()
        if kind == "number":
            self.advance()
            return Expression.constant(int(value))
        if kind == "name":
            self.advance()
            if value == "hbar":
                return Expression.hbar()
            if value == "i":
                return Expression.constant(Coefficient(Fraction(0), Fraction(1)))
            try:
                var = VariableId.from_name(value)
            except ValueError:
                raise ParseError(
                    f"unknown symbol {value!r}",
                    col,
                    ("qQ<i>", "pQ<i>", "qC<i>", "pC<i>", "hbar", "i", "number"),
                ) from None
            return Expression.variable(var)
        if kind == "(":
            self.advance()
            inner = self.expression()
            if self.peek()[0] != ")":
                self.fail((")",))
            self.advance()
            return inner
        self.fail(("number", "variable", "hbar", "i", "("))


def parse(src: str) -> Expression:
    """Parse expression text into a canonical expression."""
    return _Parser(src).parse()


def parse_coefficient(src: str) -> Coefficient:
    """Parse text that must denote an exact constant (e.g. '1/2', '-1+2*i')."""
    e = parse(src)
    if not e.is_constant():
        raise ParseError(f"{src!r} is not a constant", 1)
    return e.constant_value()


def _format_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _coefficient_pieces(c: Coefficient) -> tuple:
    """(prefix pieces, negate) for a coefficient multiplying a monomial."""
    if c.im == 0:
        mag = abs(c.re)
        return ([] if mag == 1 else [_format_fraction(mag)]), c.re < 0
    if c.re == 0:
        mag = abs(c.im)
        pieces = [] if mag == 1 else [_format_fraction(mag)]
        return pieces + ["i"], c.im < 0
    re, im = _format_fraction(c.re), _format_fraction(abs(c.im))
    sign = "+" if c.im > 0 else "-"
    im_part = "i" if abs(c.im) == 1 else f"{im}*i"
    return [f"({re}{sign}{im_part})"], False


def format_expression(e: Expression) -> str:
    """Deterministic canonical text that parses back to exactly ``e``."""
    if e.is_zero:
        return "0"

    def sort_key(item):
        (mono, h), _c = item
        degree = sum(exp for _v, exp in mono)
        return (-degree, mono, h)

    rendered = []
    for (mono, h), coeff in sorted(e.terms.items(), key=sort_key):
        pieces, negate = _coefficient_pieces(coeff)
        if h:
            pieces.append("hbar" if h == 1 else f"hbar^{h}")
        for var, exp in mono:
            pieces.append(var.name if exp == 1 else f"{var.name}^{exp}")
        if not pieces:
            pieces = [_format_fraction(abs(coeff.re))]
        body = "*".join(pieces)
        rendered.append(("-" if negate else "+", body))

    sign, body = rendered[0]
    out = body if sign == "+" else f"-{body}"
    for sign, body in rendered[1:]:
        out += f" {sign} {body}"
    return out
