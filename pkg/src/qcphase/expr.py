"""Exact polynomial algebra over canonical phase-space variables.

Observables, Hamiltonians and residuals are all multivariate polynomials in
the canonical variables of two sectors (Q and C), with Gaussian-rational
coefficients and a formal, non-negative hbar grading.  All arithmetic is
exact, so "this residual is zero" is a decidable statement and identity
tests can run at zero tolerance.

Expressions are immutable values; every operation returns a new canonical
expression (no stored zero coefficients, monomials sorted by variable).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Mapping, Union

_ZERO = Fraction(0)
_ONE = Fraction(1)


class NonQuantizedResidual(ValueError):
    """Raised when dividing by i*hbar an expression with an hbar-free term."""


class Sector(IntEnum):
    Q = 0
    C = 1


class Kind(IntEnum):
    POSITION = 0
    MOMENTUM = 1


@dataclass(frozen=True)
class Coefficient:
    """Exact complex number with rational real and imaginary parts."""

    re: Fraction = _ZERO
    im: Fraction = _ZERO

    def __post_init__(self) -> None:
        if not isinstance(self.re, Fraction):
            object.__setattr__(self, "re", Fraction(self.re))
        if not isinstance(self.im, Fraction):
            object.__setattr__(self, "im", Fraction(self.im))

    @staticmethod
    def of(value: CoefficientLike) -> "Coefficient":
        if isinstance(value, Coefficient):
            return value
        if isinstance(value, (int, Fraction)):
            return Coefficient(Fraction(value))
        raise TypeError(f"cannot build an exact coefficient from {value!r}")

    @property
    def is_zero(self) -> bool:
        return not self.re and not self.im

    def __bool__(self) -> bool:
        return not self.is_zero

    def __add__(self, other: "CoefficientLike") -> "Coefficient":
        other = Coefficient.of(other)
        return Coefficient(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self) -> "Coefficient":
        return Coefficient(-self.re, -self.im)

    def __sub__(self, other: "CoefficientLike") -> "Coefficient":
        other = Coefficient.of(other)
        return Coefficient(self.re - other.re, self.im - other.im)

    def __rsub__(self, other: "CoefficientLike") -> "Coefficient":
        return Coefficient.of(other) - self

    def __mul__(self, other: "CoefficientLike") -> "Coefficient":
        other = Coefficient.of(other)
        if not self.im and not other.im:
            return Coefficient(self.re * other.re)
        return Coefficient(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: "CoefficientLike") -> "Coefficient":
        other = Coefficient.of(other)
        if other.is_zero:
            raise ZeroDivisionError("division by zero coefficient")
        if not other.im:
            return Coefficient(self.re / other.re, self.im / other.re)
        norm = other.re * other.re + other.im * other.im
        return Coefficient(
            (self.re * other.re + self.im * other.im) / norm,
            (self.im * other.re - self.re * other.im) / norm,
        )

    def __pow__(self, n: int) -> "Coefficient":
        if n < 0:
            raise ValueError("negative coefficient powers are not used")
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "Coefficient":
        return Coefficient(self.re, -self.im)

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def __str__(self) -> str:
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"

    def __repr__(self) -> str:
        return f"Coefficient({self.re!s}, {self.im!s})"


CoefficientLike = Union[int, Fraction, Coefficient]

ZERO = Coefficient()
ONE = Coefficient(_ONE)
I = Coefficient(_ZERO, _ONE)
MINUS_I = Coefficient(_ZERO, -_ONE)


@dataclass(frozen=True, order=True)
class VariableId:
    """A canonical phase-space variable: sector, position/momentum, dof index.

    The field order gives a stable total ordering (sector, kind, index) used
    for canonical monomial sorting.
    """

    sector: Sector
    kind: Kind
    index: int = 0

    @property
    def name(self) -> str:
        letter = "q" if self.kind == Kind.POSITION else "p"
        suffix = "" if self.index == 0 else str(self.index)
        return f"{letter}{self.sector.name}{suffix}"

    @staticmethod
    def from_name(name: str) -> "VariableId":
        if len(name) < 2 or name[0] not in "qp" or name[1] not in "QC":
            raise ValueError(f"not a canonical variable name: {name!r}")
        index = 0
        if len(name) > 2:
            if not name[2:].isdigit():
                raise ValueError(f"not a canonical variable name: {name!r}")
            index = int(name[2:])
        kind = Kind.POSITION if name[0] == "q" else Kind.MOMENTUM
        sector = Sector.Q if name[1] == "Q" else Sector.C
        return VariableId(sector, kind, index)

    def conjugate_partner(self) -> "VariableId":
        other = Kind.MOMENTUM if self.kind == Kind.POSITION else Kind.POSITION
        return VariableId(self.sector, other, self.index)

    def __repr__(self) -> str:
        return self.name


# monomial = sorted tuple of (variable, exponent>=1); term key = (monomial, hbar power)
Monomial = tuple
TermKey = tuple


def _mul_monomials(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    merged: dict = {}
    for var, exp in m1:
        merged[var] = exp
    for var, exp in m2:
        merged[var] = merged.get(var, 0) + exp
    return tuple(sorted(merged.items()))


class Expression:
    """Canonical multivariate polynomial with exact coefficients.

    Terms map (monomial, hbar_power) to a nonzero Coefficient.  The pointwise
    product (``*``) is the ordinary commutative product of phase-space
    functions; the deformed products live in :mod:`qcphase.products`.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[TermKey, Coefficient] | None = None):
        canonical: dict = {}
        if terms:
            for key, coeff in terms.items():
                if coeff:
                    canonical[key] = coeff
        self._terms = canonical
        self._hash = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def zero() -> "Expression":
        return _EXPR_ZERO

    @staticmethod
    def one() -> "Expression":
        return _EXPR_ONE

    @staticmethod
    def constant(value: CoefficientLike) -> "Expression":
        c = Coefficient.of(value)
        if not c:
            return _EXPR_ZERO
        return Expression({((), 0): c})

    @staticmethod
    def variable(var: VariableId) -> "Expression":
        return Expression({(((var, 1),), 0): ONE})

    @staticmethod
    def hbar(power: int = 1) -> "Expression":
        if power < 0:
            raise ValueError("hbar powers must be non-negative")
        return Expression({((), power): ONE})

    @staticmethod
    def term(
        coeff: CoefficientLike,
        powers: Mapping[VariableId, int] | None = None,
        hbar_power: int = 0,
    ) -> "Expression":
        mono = tuple(sorted((v, e) for v, e in (powers or {}).items() if e))
        return Expression({(mono, hbar_power): Coefficient.of(coeff)})

    # -- views --------------------------------------------------------------

    @property
    def terms(self) -> Mapping[TermKey, Coefficient]:
        return dict(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_constant(self) -> bool:
        return all(not mono and not h for mono, h in self._terms)

    def constant_value(self) -> Coefficient:
        if not self.is_constant():
            raise ValueError("expression is not a constant")
        return self._terms.get(((), 0), ZERO)

    def variables(self) -> frozenset:
        out = set()
        for mono, _ in self._terms:
            for var, _exp in mono:
                out.add(var)
        return frozenset(out)

    def dof_indices(self, sector: Sector) -> tuple:
        out = {v.index for v in self.variables() if v.sector == sector}
        return tuple(sorted(out))

    def degree(self, sector: Sector | None = None) -> int:
        best = 0
        for mono, _ in self._terms:
            if sector is None:
                d = sum(exp for _v, exp in mono)
            else:
                d = sum(exp for v, exp in mono if v.sector == sector)
            best = max(best, d)
        return best

    def hbar_degree(self) -> int:
        return max((h for _m, h in self._terms), default=0)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other) -> "Expression":
        other = _as_expression(other)
        if other is NotImplemented:
            return NotImplemented
        if not self._terms:
            return other
        if not other._terms:
            return self
        out = dict(self._terms)
        for key, coeff in other._terms.items():
            cur = out.get(key)
            if cur is None:
                out[key] = coeff
            else:
                s = cur + coeff
                if s:
                    out[key] = s
                else:
                    del out[key]
        return _raw(out)

    __radd__ = __add__

    def __neg__(self) -> "Expression":
        return _raw({key: -c for key, c in self._terms.items()})

    def __sub__(self, other) -> "Expression":
        other = _as_expression(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Expression":
        other = _as_expression(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "Expression":
        if isinstance(other, (int, Fraction, Coefficient)):
            c = Coefficient.of(other)
            if not c:
                return _EXPR_ZERO
            return _raw({key: coeff * c for key, coeff in self._terms.items()})
        other = _as_expression(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict = {}
        for (m1, h1), c1 in self._terms.items():
            for (m2, h2), c2 in other._terms.items():
                key = (_mul_monomials(m1, m2), h1 + h2)
                prod = c1 * c2
                cur = out.get(key)
                if cur is None:
                    out[key] = prod
                else:
                    s = cur + prod
                    if s:
                        out[key] = s
                    else:
                        del out[key]
        return _raw(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Expression":
        if not isinstance(n, int) or n < 0:
            raise ValueError("expression powers must be non-negative integers")
        out = _EXPR_ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, Expression):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction, Coefficient)):
            return self == Expression.constant(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- calculus -----------------------------------------------------------

    def diff(self, var: VariableId) -> "Expression":
        """Formal partial derivative; a derivation for the pointwise product."""
        out: dict = {}
        for (mono, h), coeff in self._terms.items():
            for pos, (v, exp) in enumerate(mono):
                if v == var:
                    if exp == 1:
                        new_mono = mono[:pos] + mono[pos + 1 :]
                    else:
                        new_mono = mono[:pos] + ((v, exp - 1),) + mono[pos + 1 :]
                    key = (new_mono, h)
                    add = coeff * exp
                    cur = out.get(key)
                    if cur is None:
                        out[key] = add
                    else:
                        s = cur + add
                        if s:
                            out[key] = s
                        else:
                            del out[key]
                    break
        return _raw(out)

    def div_ihbar(self) -> "Expression":
        """Divide by i*hbar, decrementing the hbar grade of every term.

        Commutators of the deformed products always carry an overall hbar;
        an hbar-free term signals a malformed commutator and raises
        :class:`NonQuantizedResidual`.
        """
        out: dict = {}
        for (mono, h), coeff in self._terms.items():
            if h == 0:
                raise NonQuantizedResidual(
                    f"term {coeff!s}*{mono!r} carries no hbar factor"
                )
            out[(mono, h - 1)] = coeff * MINUS_I
        return _raw(out)

    def subs(
        self,
        mapping: Mapping[VariableId, "Expression"],
        strict: bool = False,
    ) -> "Expression":
        """Simultaneous substitution of variables by expressions.

        Unmapped variables are kept as themselves unless ``strict`` is set,
        in which case they raise KeyError.  Substitution is a ring
        homomorphism: subs(a*b) == subs(a)*subs(b).
        """
        power_cache: dict = {}

        def powered(var: VariableId, exp: int) -> "Expression":
            key = (var, exp)
            got = power_cache.get(key)
            if got is None:
                if var in mapping:
                    got = mapping[var] ** exp
                elif strict:
                    raise KeyError(f"no substitution provided for {var.name}")
                else:
                    got = Expression.variable(var) ** exp
                power_cache[key] = got
            return got

        total = _EXPR_ZERO
        for (mono, h), coeff in self._terms.items():
            piece = Expression({((), h): coeff})
            for var, exp in mono:
                piece = piece * powered(var, exp)
            total = total + piece
        return total

    def evaluate(
        self,
        point: Mapping[VariableId, complex],
        hbar: float = 1.0,
    ) -> complex:
        """Numeric value with every variable and hbar bound."""
        total = 0j
        for (mono, h), coeff in self._terms.items():
            value = coeff.to_complex() * (hbar ** h)
            for var, exp in mono:
                if var not in point:
                    raise KeyError(f"no value provided for {var.name}")
                value *= complex(point[var]) ** exp
            total += value
        return total

    def split_re_im(self) -> tuple:
        """Exact split into expressions with the real/imaginary coefficients."""
        re_terms: dict = {}
        im_terms: dict = {}
        for key, coeff in self._terms.items():
            if coeff.re:
                re_terms[key] = Coefficient(coeff.re)
            if coeff.im:
                im_terms[key] = Coefficient(coeff.im)
        return _raw(re_terms), _raw(im_terms)

    def sector_decompose(self) -> list:
        """Write the expression as a sum of (pure Q) * (pure C) factor pairs.

        Terms are grouped by their C-sector monomial; the coefficient and the
        hbar grade travel with the Q factor, and each C factor is a bare
        monomial with unit coefficient.  The pairs multiply and sum back to
        the original expression exactly, in a deterministic order.
        """
        groups: dict = {}
        for (mono, h), coeff in self._terms.items():
            q_part = tuple((v, e) for v, e in mono if v.sector == Sector.Q)
            c_part = tuple((v, e) for v, e in mono if v.sector == Sector.C)
            bucket = groups.setdefault(c_part, {})
            key = (q_part, h)
            cur = bucket.get(key)
            bucket[key] = coeff if cur is None else cur + coeff
        out = []
        for c_part in sorted(groups):
            q_expr = _raw({k: c for k, c in groups[c_part].items() if c})
            if q_expr.is_zero:
                continue
            out.append((q_expr, _raw({(c_part, 0): ONE})))
        return out

    # -- display ------------------------------------------------------------

    def __str__(self) -> str:
        from .grammar import format_expression

        return format_expression(self)

    def __repr__(self) -> str:
        return f"<Expression {self}>"


def _raw(terms: dict) -> Expression:
    """Wrap an already-canonical term dict without re-checking."""
    e = Expression.__new__(Expression)
    e._terms = terms
    e._hash = None
    return e


def _as_expression(value):
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, Fraction, Coefficient)):
        return Expression.constant(value)
    return NotImplemented


_EXPR_ZERO = _raw({})
_EXPR_ONE = _raw({((), 0): ONE})

HBAR = Expression.hbar()


def qQ(index: int = 0) -> Expression:
    return Expression.variable(VariableId(Sector.Q, Kind.POSITION, index))


def pQ(index: int = 0) -> Expression:
    return Expression.variable(VariableId(Sector.Q, Kind.MOMENTUM, index))


def qC(index: int = 0) -> Expression:
    return Expression.variable(VariableId(Sector.C, Kind.POSITION, index))


def pC(index: int = 0) -> Expression:
    return Expression.variable(VariableId(Sector.C, Kind.MOMENTUM, index))


def canonical_pairs(expressions: Iterable[Expression]) -> tuple:
    """All canonical variables touched by the given expressions, with both
    members of each (sector, index) pair present, in canonical order."""
    pairs = set()
    for e in expressions:
        for v in e.variables():
            pairs.add((v.sector, v.index))
    out = []
    for sector, index in sorted(pairs):
        out.append(VariableId(sector, Kind.POSITION, index))
        out.append(VariableId(sector, Kind.MOMENTUM, index))
    return tuple(out)
