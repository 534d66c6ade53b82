"""Seeded random generators shared across the test modules."""

from __future__ import annotations

import random
from fractions import Fraction

from qcphase.expr import Coefficient, Expression, Kind, Sector, VariableId

ALL_VARS = tuple(
    VariableId(sector, kind, 0)
    for sector in (Sector.Q, Sector.C)
    for kind in (Kind.POSITION, Kind.MOMENTUM)
)
Q_VARS = tuple(v for v in ALL_VARS if v.sector == Sector.Q)
C_VARS = tuple(v for v in ALL_VARS if v.sector == Sector.C)


def rand_coefficient(rng: random.Random, imag: bool = True) -> Coefficient:
    re = Fraction(rng.randint(-3, 3), rng.choice((1, 1, 2)))
    im = Fraction(rng.randint(-2, 2)) if imag and rng.random() < 0.4 else Fraction(0)
    c = Coefficient(re, im)
    return c if c else Coefficient(1)


def rand_expr(
    rng: random.Random,
    degree: int = 4,
    terms: int = 3,
    variables=ALL_VARS,
    hbar_max: int = 0,
    imag: bool = True,
) -> Expression:
    out = Expression.zero()
    for _ in range(rng.randint(1, terms)):
        powers: dict = {}
        for _ in range(rng.randint(0, degree)):
            v = rng.choice(variables)
            powers[v] = powers.get(v, 0) + 1
        h = rng.randint(0, hbar_max) if hbar_max else 0
        out = out + Expression.term(rand_coefficient(rng, imag), powers, h)
    if out.is_zero:
        out = Expression.variable(rng.choice(variables))
    return out


def rand_pure(rng: random.Random, sector: Sector, degree: int = 3, terms: int = 3):
    variables = Q_VARS if sector == Sector.Q else C_VARS
    return rand_expr(rng, degree=degree, terms=terms, variables=variables)


def rand_sigma(rng: random.Random, complex_ok: bool = True):
    from qcphase.products import SigmaSpec

    def component():
        re = Fraction(rng.randint(-2, 2), rng.choice((1, 2)))
        im = Fraction(rng.randint(-1, 1)) if complex_ok and rng.random() < 0.3 else 0
        return Coefficient(re, Fraction(im))

    return SigmaSpec(component(), component(), component())
