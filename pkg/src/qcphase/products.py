"""Deformed products and brackets on phase-space polynomials.

Implements the Poisson bidifferential, the symmetric first-order family
sigma(a, b, c), the half-sum G = (P + sigma)/2, the order-hbar composition
product on the C sector, the exponential star product on the Q sector, the
combined hybrid product, and the hybrid bracket in four independently
computed forms (their exact agreement is a test, not a construction).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterator, Union

from .expr import (
    Coefficient,
    Expression,
    I,
    Kind,
    ONE,
    Sector,
    VariableId,
)

SectorLike = Union[Sector, str, None]

BRACKET_FORMS = ("F1", "F2", "F3", "F4")


@dataclass(frozen=True)
class SigmaSpec:
    """Constants (a, b, c) of a symmetric first-order bidifferential operator.

    The induced operator is
        a dq(.)dq(.) + b dp(.)dp(.) + c (dq(.)dp(.) + dp(.)dq(.))
    summed over C-sector degree-of-freedom pairs.  It is symmetric by
    construction and annihilates constants, so it is compatible with the
    bracket reduction requirements for any (a, b, c).
    """

    a: Coefficient = Coefficient()
    b: Coefficient = Coefficient()
    c: Coefficient = Coefficient()

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", Coefficient.of(self.a))
        object.__setattr__(self, "b", Coefficient.of(self.b))
        object.__setattr__(self, "c", Coefficient.of(self.c))

    @staticmethod
    def of(value) -> "SigmaSpec":
        if isinstance(value, SigmaSpec):
            return value
        a, b, c = value
        return SigmaSpec(Coefficient.of(a), Coefficient.of(b), Coefficient.of(c))

    @staticmethod
    def zero() -> "SigmaSpec":
        return SigmaSpec()

    @property
    def triple(self) -> tuple:
        return (self.a, self.b, self.c)

    @property
    def is_zero(self) -> bool:
        return self.a.is_zero and self.b.is_zero and self.c.is_zero

    def __str__(self) -> str:
        return f"({self.a}, {self.b}, {self.c})"


@dataclass(frozen=True)
class ProductSpec:
    """Scheme bundle: sigma on the C sector, sigma_q for the Q-sector star.

    The default Q-sector scheme (all-zero sigma_q) is the exponential of the
    Poisson bidifferential alone.  The two sectors act on disjoint variable
    sets, so the corresponding operators commute.
    """

    sigma_c: SigmaSpec = SigmaSpec()
    sigma_q: SigmaSpec = SigmaSpec()

    @staticmethod
    def of(sigma_c=None, sigma_q=None) -> "ProductSpec":
        return ProductSpec(
            SigmaSpec.of(sigma_c) if sigma_c is not None else SigmaSpec(),
            SigmaSpec.of(sigma_q) if sigma_q is not None else SigmaSpec(),
        )


def _as_sector(sector: SectorLike) -> Sector | None:
    if sector is None or sector == "both":
        return None
    if isinstance(sector, Sector):
        return sector
    if isinstance(sector, str):
        return Sector[sector]
    raise TypeError(f"bad sector {sector!r}")


def _pair_indices(u: Expression, v: Expression, sector: Sector) -> tuple:
    got = set(u.dof_indices(sector)) | set(v.dof_indices(sector))
    return tuple(sorted(got))


def poisson(u: Expression, v: Expression, sector: SectorLike = None) -> Expression:
    """Poisson bracket over the canonical pairs of the selected sector(s)."""
    which = _as_sector(sector)
    sectors = (Sector.Q, Sector.C) if which is None else (which,)
    out = Expression.zero()
    for s in sectors:
        for i in _pair_indices(u, v, s):
            q = VariableId(s, Kind.POSITION, i)
            p = VariableId(s, Kind.MOMENTUM, i)
            out = out + u.diff(q) * v.diff(p) - u.diff(p) * v.diff(q)
    return out


def sigma_product(u: Expression, v: Expression, sigma) -> Expression:
    """Symmetric first-order bidifferential on the C sector."""
    s = SigmaSpec.of(sigma)
    out = Expression.zero()
    for i in _pair_indices(u, v, Sector.C):
        q = VariableId(Sector.C, Kind.POSITION, i)
        p = VariableId(Sector.C, Kind.MOMENTUM, i)
        uq, up = u.diff(q), u.diff(p)
        vq, vp = v.diff(q), v.diff(p)
        if s.a:
            out = out + uq * vq * s.a
        if s.b:
            out = out + up * vp * s.b
        if s.c:
            out = out + (uq * vp + up * vq) * s.c
    return out


def g_product(u: Expression, v: Expression, sigma) -> Expression:
    """Half-sum of the C-sector Poisson bidifferential and sigma.

    Its antisymmetric part is always the Poisson bracket; the symmetric part
    carries the quantization scheme.
    """
    s = SigmaSpec.of(sigma)
    half = Coefficient(Fraction(1, 2))
    return (poisson(u, v, Sector.C) + sigma_product(u, v, s)) * half


def composition_product(u: Expression, v: Expression, sigma) -> Expression:
    """C-sector composition product: pointwise product plus i*hbar*G.

    The order-hbar truncation of a star product; it composes the classical
    factors of hybrid variables and its commutator builds the hybrid bracket.
    """
    g = g_product(u, v, sigma)
    return u * v + Expression.hbar() * g * I


def _star_elementary(sigma_q: SigmaSpec, indices) -> list:
    """Merged elementary (left var, right var, weight) derivative pairs for
    the Q-sector bidifferential P + sigma_q."""
    terms = []
    for i in indices:
        q = VariableId(Sector.Q, Kind.POSITION, i)
        p = VariableId(Sector.Q, Kind.MOMENTUM, i)
        for lv, rv, w in (
            (q, p, ONE + sigma_q.c),
            (p, q, sigma_q.c - ONE),
            (q, q, sigma_q.a),
            (p, p, sigma_q.b),
        ):
            if w:
                terms.append((lv, rv, w))
    return terms


def _derivative(cache: dict, base: Expression, multiset: tuple) -> Expression:
    got = cache.get(multiset)
    if got is None:
        got = _derivative(cache, base, multiset[:-1]).diff(multiset[-1])
        cache[multiset] = got
    return got


def _star_terms(
    u: Expression, v: Expression, sigma_q: SigmaSpec
) -> Iterator[tuple]:
    """Termwise expansion of the Q-sector star product of (u, v).

    Yields (coefficient, hbar_power, derived u, derived v) with
    star(u, v) = sum coeff * hbar**power * du * dv.  The series terminates
    because each order differentiates both arguments once on the Q sector.
    """
    yield (ONE, 0, u, v)
    indices = _pair_indices(u, v, Sector.Q)
    if not indices:
        return
    elementary = _star_elementary(sigma_q, indices)
    if not elementary:
        return
    n_max = min(u.degree(Sector.Q), v.degree(Sector.Q))
    left_cache: dict = {(): u}
    right_cache: dict = {(): v}
    half_i = I * Coefficient(Fraction(1, 2))
    for n in range(1, n_max + 1):
        prefactor = half_i ** n
        for combo in combinations_with_replacement(range(len(elementary)), n):
            weight = ONE
            lvars = []
            rvars = []
            denom = 1
            run = 1
            prev = None
            for idx in combo:
                lv, rv, w = elementary[idx]
                weight = weight * w
                lvars.append(lv)
                rvars.append(rv)
                if idx == prev:
                    run += 1
                else:
                    run = 1
                    prev = idx
                denom *= run
            du = _derivative(left_cache, u, tuple(sorted(lvars)))
            if du.is_zero:
                continue
            dv = _derivative(right_cache, v, tuple(sorted(rvars)))
            if dv.is_zero:
                continue
            coeff = prefactor * weight * Coefficient(Fraction(1, denom))
            yield (coeff, n, du, dv)


def star_product(u: Expression, v: Expression, spec: ProductSpec) -> Expression:
    """Q-sector star product exp((i hbar/2)(P_Q + sigma_Q)) applied to (u, v).

    Acts only on Q-sector variables; C-sector factors ride along pointwise,
    so the function is directly applicable to hybrid arguments.
    """
    out = Expression.zero()
    for coeff, h, du, dv in _star_terms(u, v, spec.sigma_q):
        out = out + du * dv * Expression.hbar(h) * coeff
    return out


def hybrid_product(u: Expression, v: Expression, spec: ProductSpec) -> Expression:
    """Star product on Q factors combined with the composition product on C
    factors, across the sector decomposition of both arguments."""
    out = Expression.zero()
    dec_v = v.sector_decompose()
    for u_q, u_c in u.sector_decompose():
        for v_q, v_c in dec_v:
            out = out + star_product(u_q, v_q, spec) * composition_product(
                u_c, v_c, spec.sigma_c
            )
    return out


def quantum_bracket(u: Expression, v: Expression, spec: ProductSpec) -> Expression:
    """Commutator of the Q-sector star product divided by i*hbar."""
    return (star_product(u, v, spec) - star_product(v, u, spec)).div_ihbar()


def hybrid_bracket(
    u: Expression,
    v,
    spec: ProductSpec,
    form: str = "F3",
) -> Expression:
    """The hybrid quantum-classical bracket {[u, v]}.

    Four forms are computed along genuinely different routes and agree
    exactly:

    * ``F1`` - quantum bracket plus the G-weighted cross terms, assembled
      from the sector decomposition.
    * ``F2`` - quantum bracket plus symmetrized-star/Poisson and
      antisymmetrized-star/sigma terms, assembled by operator composition.
    * ``F3`` - commutator of the hybrid product divided by i*hbar.
    * ``F4`` - pull-out form; ``v`` must be supplied as a ``(v_q, v_c)``
      pure-factor pair.
    """
    if form == "F4":
        if not (isinstance(v, tuple) and len(v) == 2):
            raise TypeError("form F4 needs v as a (pure Q, pure C) factor pair")
        return _bracket_form4(u, v[0], v[1], spec)
    if isinstance(v, tuple):
        raise TypeError(f"factored v is only accepted by form F4, not {form}")
    if form == "F1":
        return _bracket_form1(u, v, spec)
    if form == "F2":
        return _bracket_form2(u, v, spec)
    if form == "F3":
        return (hybrid_product(u, v, spec) - hybrid_product(v, u, spec)).div_ihbar()
    raise ValueError(f"unknown bracket form {form!r}; expected one of {BRACKET_FORMS}")


def _bracket_form1(u: Expression, v: Expression, spec: ProductSpec) -> Expression:
    out = quantum_bracket(u, v, spec)
    dec_v = v.sector_decompose()
    for u_q, u_c in u.sector_decompose():
        for v_q, v_c in dec_v:
            out = out + star_product(u_q, v_q, spec) * g_product(u_c, v_c, spec.sigma_c)
            out = out - star_product(v_q, u_q, spec) * g_product(v_c, u_c, spec.sigma_c)
    return out


def _bracket_form2(
    u: Expression,
    v: Expression,
    spec: ProductSpec,
    sigma_zeroth: Coefficient | None = None,
) -> Expression:
    """Operator-composition route.

    ``sigma_zeroth`` adds a deliberate zeroth-order term t*u*v to sigma; it
    exists so tests can demonstrate that such a term breaks the reduction of
    the bracket on pure quantum arguments.
    """
    half = Coefficient(Fraction(1, 2))
    out = quantum_bracket(u, v, spec)

    def c_parts(du: Expression, dv: Expression) -> tuple:
        p = poisson(du, dv, Sector.C)
        s = sigma_product(du, dv, spec.sigma_c)
        if sigma_zeroth is not None and sigma_zeroth:
            s = s + du * dv * sigma_zeroth
        return p, s

    for coeff, h, du, dv in _star_terms(u, v, spec.sigma_q):
        p, s = c_parts(du, dv)
        out = out + (p + s) * Expression.hbar(h) * (coeff * half)
    for coeff, h, dv, du in _star_terms(v, u, spec.sigma_q):
        p, s = c_parts(du, dv)
        out = out + (p - s) * Expression.hbar(h) * (coeff * half)
    return out


def _bracket_form4(
    u: Expression, v_q: Expression, v_c: Expression, spec: ProductSpec
) -> Expression:
    if v_q.dof_indices(Sector.C):
        raise ValueError("v_q factor must be pure Q sector")
    if v_c.dof_indices(Sector.Q):
        raise ValueError("v_c factor must be pure C sector")
    out = Expression.zero()
    for a_q, a_c in quantum_bracket(u, v_q, spec).sector_decompose():
        out = out + a_q * composition_product(a_c, v_c, spec.sigma_c)
    for b_q, b_c in poisson(u, v_c, Sector.C).sector_decompose():
        out = out + star_product(v_q, b_q, spec) * b_c
    return out
