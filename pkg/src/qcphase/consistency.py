"""Executable consistency verdicts for hybrid dynamics.

Associators, Jacobi and Leibniz residuals, reduction checks, the
scheme-family no-go scan, subalgebra certification and the minimal
subalgebra (kappa) machinery.  All verdicts are exact: a residual either is
or is not the zero polynomial.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .expr import (
    Coefficient,
    Expression,
    Kind,
    ONE,
    Sector,
    VariableId,
)
from .products import (
    ProductSpec,
    SigmaSpec,
    _bracket_form2,
    composition_product,
    g_product,
    hybrid_bracket,
    hybrid_product,
    poisson,
    quantum_bracket,
    sigma_product,
)


class WitnessNotFound(RuntimeError):
    """No associator counterexample was found for some scheme within budget."""

    def __init__(self, missing: list, found: list):
        self.missing = missing
        self.found = found
        labels = ", ".join(str(s) for s in missing)
        super().__init__(
            f"no associator witness found for sigma in [{labels}] "
            f"({len(found)} scheme(s) did yield witnesses)"
        )


class ClosureEscape(RuntimeError):
    """The composition product leads outside the generated span."""

    def __init__(self, left: Expression, right: Expression, escape: Expression):
        self.left = left
        self.right = right
        self.escape = escape
        super().__init__(
            f"G-product of ({left}) and ({right}) leaves the generated span "
            f"within the degree cap: {escape}"
        )


class DegenerateScheme(ValueError):
    """The closed-form linear kappa solution divides by b and needs b != 0."""


class InexactSquareRoot(ValueError):
    """The radicand has no square root among the exact complex rationals."""


@dataclass
class ResidualReport:
    """Outcome of an exact identity check.

    ``is_zero`` holds exactly when ``residual`` is the zero expression; when
    it is not, ``witness`` records the inputs that produced it.
    """

    residual: Expression
    witness: tuple | None = None

    @property
    def is_zero(self) -> bool:
        return self.residual.is_zero

    def __bool__(self) -> bool:
        return self.is_zero


@dataclass
class SubalgebraCert:
    """Certificate that a span of C-sector variables has vanishing
    composition-product associators.

    ``basis`` is the echelonized span of the generators, the constant, and
    every G-product reachable from them within the degree cap.  Checking all
    basis triples is exhaustive for the whole span because the associator is
    trilinear.
    """

    generators: tuple
    sigma: SigmaSpec
    max_degree: int
    verdict: str  # "certified" | "refuted"
    basis: tuple = ()
    witness: tuple | None = None

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def associator(
    u: Expression,
    v: Expression,
    w: Expression,
    product: Callable[[Expression, Expression], Expression],
) -> Expression:
    """(u o v) o w - u o (v o w) for any binary product."""
    return product(product(u, v), w) - product(u, product(v, w))


def composition_associator(
    u: Expression, v: Expression, w: Expression, sigma
) -> Expression:
    s = SigmaSpec.of(sigma)
    return associator(u, v, w, lambda x, y: composition_product(x, y, s))


def associativity_products() -> dict:
    """Named associator routines, each (u, v, w, spec) -> residual."""
    from .products import hybrid_product, star_product

    return {
        "ast": lambda u, v, w, spec: composition_associator(u, v, w, spec.sigma_c),
        "star": lambda u, v, w, spec: associator(
            u, v, w, lambda x, y: star_product(x, y, spec)
        ),
        "hybrid": lambda u, v, w, spec: associator(
            u, v, w, lambda x, y: hybrid_product(x, y, spec)
        ),
        "pointwise": lambda u, v, w, spec: associator(u, v, w, lambda x, y: x * y),
        "g": lambda u, v, w, spec: associator(
            u, v, w, lambda x, y: g_product(x, y, spec.sigma_c)
        ),
    }


def jacobi_residual(
    u: Expression, v: Expression, w: Expression, spec: ProductSpec
) -> ResidualReport:
    """Cyclic sum {[{[u,v]},w]} + {[{[v,w]},u]} + {[{[w,u]},v]}."""

    def br(x, y):
        return hybrid_bracket(x, y, spec)

    residual = br(br(u, v), w) + br(br(v, w), u) + br(br(w, u), v)
    return ResidualReport(residual, None if residual.is_zero else (u, v, w))


def leibniz_residual(
    u: Expression, v: Expression, w: Expression, spec: ProductSpec
) -> ResidualReport:
    """Leibniz defect with respect to the hybrid product:
    {[u, v o w]} - {[u, v]} o w - v o {[u, w]} with o the hybrid product."""

    def br(x, y):
        return hybrid_bracket(x, y, spec)

    def hp(x, y):
        return hybrid_product(x, y, spec)

    residual = br(u, hp(v, w)) - hp(br(u, v), w) - hp(v, br(u, w))
    return ResidualReport(residual, None if residual.is_zero else (u, v, w))


def leibniz_pointwise_residual(
    u: Expression, v: Expression, w: Expression, spec: ProductSpec
) -> ResidualReport:
    """Leibniz defect with respect to the ordinary pointwise product; the
    naive rule that fails where the hybrid-product rule holds."""

    def br(x, y):
        return hybrid_bracket(x, y, spec)

    residual = br(u, v * w) - br(u, v) * w - v * br(u, w)
    return ResidualReport(residual, None if residual.is_zero else (u, v, w))


def sigma_assoc_residual(
    u: Expression, v: Expression, w: Expression, sigma
) -> ResidualReport:
    """Eight-term mixed P/sigma associativity defect.

    Vanishes on (u, v, w) exactly when the composition-product associator
    does; the equivalence is itself under test elsewhere.
    """
    s = SigmaSpec.of(sigma)

    def pp(x, y):
        return poisson(x, y, Sector.C)

    def ss(x, y):
        return sigma_product(x, y, s)

    residual = (
        pp(pp(u, v), w)
        - pp(u, pp(v, w))
        + ss(ss(u, v), w)
        - ss(u, ss(v, w))
        + ss(pp(u, v), w)
        - pp(u, ss(v, w))
        + pp(ss(u, v), w)
        - ss(u, pp(v, w))
    )
    return ResidualReport(residual, None if residual.is_zero else (u, v, w))


def check_reduction(
    spec: ProductSpec,
    trials: int = 25,
    seed: int = 0,
    corrupt_zeroth: Coefficient | None = None,
) -> ResidualReport:
    """Randomized check of the three reduction identities.

    For pure factors u_q, v_q (Q sector) and u_c, v_c (C sector):

    1. {[u_q, v_c]} = 0
    2. {[u_q, v_q*v_c]} = v_c * [[u_q, v_q]]
    3. {[u_c, v_q*v_c]} = v_q * {u_c, v_c}

    ``corrupt_zeroth`` injects a zeroth-order term into sigma along the
    operator-composition route; any nonzero value must break identity 2.
    """
    rng = random.Random(seed)

    def bracket(x, y):
        if corrupt_zeroth is None:
            return hybrid_bracket(x, y, spec)
        return _bracket_form2(x, y, spec, sigma_zeroth=corrupt_zeroth)

    for _ in range(trials):
        u_q = _random_pure(rng, Sector.Q)
        v_q = _random_pure(rng, Sector.Q)
        u_c = _random_pure(rng, Sector.C)
        v_c = _random_pure(rng, Sector.C)
        v = v_q * v_c

        r1 = bracket(u_q, v_c)
        if not r1.is_zero:
            return ResidualReport(r1, ("pure-sector", u_q, v_c))
        r2 = bracket(u_q, v) - v_c * quantum_bracket(u_q, v_q, spec)
        if not r2.is_zero:
            return ResidualReport(r2, ("quantum-side", u_q, v_q, v_c))
        r3 = bracket(u_c, v) - v_q * poisson(u_c, v_c, Sector.C)
        if not r3.is_zero:
            return ResidualReport(r3, ("classical-side", u_c, v_q, v_c))
    return ResidualReport(Expression.zero())


def _random_pure(rng: random.Random, sector: Sector, max_degree: int = 3) -> Expression:
    q = Expression.variable(VariableId(sector, Kind.POSITION, 0))
    p = Expression.variable(VariableId(sector, Kind.MOMENTUM, 0))
    out = Expression.zero()
    for _ in range(rng.randint(1, 3)):
        eq = rng.randint(0, max_degree)
        ep = rng.randint(0, max_degree - eq)
        coeff = Coefficient(Fraction(rng.randint(-3, 3)), Fraction(rng.randint(-1, 1)))
        if not coeff:
            coeff = ONE
        out = out + q ** eq * p ** ep * coeff
    return out if out else q


def _monomials_up_to(degree: int) -> list:
    """Nonconstant single-pair C-sector monomials, ordered by (degree, q-exp)."""
    q = Expression.variable(VariableId(Sector.C, Kind.POSITION, 0))
    p = Expression.variable(VariableId(Sector.C, Kind.MOMENTUM, 0))
    out = []
    for d in range(1, degree + 1):
        for eq in range(d, -1, -1):
            out.append(q ** eq * p ** (d - eq))
    return out


def nogo_scan(
    grid: Sequence | None = None,
    trial_degree: int = 4,
    trials: int = 200,
    seed: int = 0,
) -> list:
    """Hunt for a nonzero composition-product associator per scheme.

    Each grid point is scanned first with an exhaustive enumeration of
    monomial triples up to degree 3, then with seeded random monomial triples
    up to ``trial_degree``.  Returns one (sigma, (u, v, w), associator) entry
    per scheme.  Raises :class:`WitnessNotFound` if some scheme yields no
    counterexample within the budget; partial results ride on the exception.
    """
    if trial_degree < 3:
        raise ValueError("trial_degree must be at least 3")
    if grid is None:
        grid = default_grid()
    rng = random.Random(seed)
    low = _monomials_up_to(3)
    high = _monomials_up_to(trial_degree)
    found = []
    missing = []
    for sigma in grid:
        s = SigmaSpec.of(sigma)
        witness = None
        for u in low:
            for v in low:
                for w in low:
                    a = composition_associator(u, v, w, s)
                    if not a.is_zero:
                        witness = (s, (u, v, w), a)
                        break
                if witness:
                    break
            if witness:
                break
        if witness is None:
            for _ in range(trials):
                u, v, w = (rng.choice(high) for _ in range(3))
                a = composition_associator(u, v, w, s)
                if not a.is_zero:
                    witness = (s, (u, v, w), a)
                    break
        if witness is None:
            missing.append(s)
        else:
            found.append(witness)
    if missing:
        raise WitnessNotFound(missing, found)
    return found


def default_grid(values: Sequence[int] = (-1, 0, 1)) -> list:
    """The full cube of scheme triples over the given constants."""
    out = []
    for a in values:
        for b in values:
            for c in values:
                out.append(SigmaSpec.of((a, b, c)))
    return out


# -- exact span arithmetic ---------------------------------------------------


def _term_sort_key(key) -> tuple:
    mono, h = key
    deg = sum(e for _v, e in mono)
    return (deg, h, mono)


class _Echelon:
    """Row-echelon span of expressions over the exact complex rationals."""

    def __init__(self) -> None:
        self.rows: dict = {}  # leading term key -> monic expression

    def reduce(self, e: Expression) -> Expression:
        while not e.is_zero:
            lead = max(e.terms, key=_term_sort_key)
            row = self.rows.get(lead)
            if row is None:
                return e
            e = e - row * e.terms[lead]
        return e

    def insert(self, e: Expression) -> Expression | None:
        """Reduce e against the span; insert and return the monic remainder,
        or None if e was already in the span."""
        r = self.reduce(e)
        if r.is_zero:
            return None
        lead = max(r.terms, key=_term_sort_key)
        monic = r * (ONE / r.terms[lead])
        self.rows[lead] = monic
        return monic


def certify_subalgebra(
    generators: Sequence[Expression],
    sigma,
    max_degree: int,
) -> SubalgebraCert:
    """Certify or refute associativity of the composition product on the span
    of the given C-sector variables.

    The basis starts from the constant and the generators, then grows with
    every G-product of basis members (reduced against the span) until stable;
    trilinearity of the associator then makes the triple check over the basis
    exhaustive for the whole span.  A G-product escaping the degree cap
    raises :class:`ClosureEscape` since the certificate could not be
    exhaustive.  Ordinary pointwise products of span members stay inside the
    multiplicatively generated algebra and need no separate check.
    """
    s = SigmaSpec.of(sigma)
    span = _Echelon()
    basis: list = []
    for e in [Expression.one(), *generators]:
        if not isinstance(e, Expression):
            raise TypeError(f"generators must be expressions, got {e!r}")
        if e.dof_indices(Sector.Q):
            raise ValueError(f"generator {e} is not pure C sector")
        if e.degree() > max_degree:
            raise ValueError(f"generator {e} exceeds max_degree={max_degree}")
        monic = span.insert(e)
        if monic is not None:
            basis.append(monic)

    frontier = list(basis)
    while frontier:
        fresh: list = []
        for x in frontier:
            for y in basis:
                for u, v in ((x, y), (y, x)):
                    g = g_product(u, v, s)
                    r = span.reduce(g)
                    if r.is_zero:
                        continue
                    if r.degree() > max_degree:
                        raise ClosureEscape(u, v, r)
                    monic = span.insert(r)
                    if monic is not None:
                        fresh.append(monic)
        basis.extend(fresh)
        frontier = fresh

    gens = tuple(generators)
    for u in basis:
        for v in basis:
            for w in basis:
                a = composition_associator(u, v, w, s)
                if not a.is_zero:
                    return SubalgebraCert(
                        gens, s, max_degree, "refuted", tuple(basis), (u, v, w)
                    )
    return SubalgebraCert(gens, s, max_degree, "certified", tuple(basis))


def minimal_membership(
    kappa: Expression,
    sigma,
    fn_degree: int = 5,
    trials: int = 6,
    seed: int = 0,
) -> ResidualReport:
    """Membership test for the subalgebra on which the composition product
    collapses to ordinary multiplication.

    The residual is a (dq kappa)^2 + b (dp kappa)^2 + 2c (dq kappa)(dp kappa),
    summed over C pairs; zero residual is membership.  When it vanishes, the
    collapse f1(kappa) o f2(kappa) = f1(kappa)*f2(kappa) is additionally
    verified on random polynomials up to ``fn_degree``.
    """
    if kappa.dof_indices(Sector.Q):
        raise ValueError("kappa must be a pure C-sector variable")
    s = SigmaSpec.of(sigma)
    residual = Expression.zero()
    for i in kappa.dof_indices(Sector.C):
        kq = kappa.diff(VariableId(Sector.C, Kind.POSITION, i))
        kp = kappa.diff(VariableId(Sector.C, Kind.MOMENTUM, i))
        residual = residual + kq * kq * s.a + kp * kp * s.b + kq * kp * (s.c * 2)
    if not residual.is_zero:
        return ResidualReport(residual, (kappa,))

    rng = random.Random(seed)
    for _ in range(trials):
        f1 = _random_in(kappa, rng, fn_degree)
        f2 = _random_in(kappa, rng, fn_degree)
        defect = composition_product(f1, f2, s) - f1 * f2
        if not defect.is_zero:
            return ResidualReport(defect, (f1, f2))
    return ResidualReport(Expression.zero())


def _random_in(base: Expression, rng: random.Random, degree: int) -> Expression:
    out = Expression.zero()
    for k in range(degree + 1):
        c = rng.randint(-3, 3)
        if c:
            out = out + base ** k * c
    return out if out else base


def kappa_linear(sigma) -> list:
    """Closed-form linear members q + lambda*p of the minimal subalgebra.

    lambda solves b*l^2 + 2c*l + a = 0, so both returned variables satisfy
    the membership condition identically; this is post-verified.  Requires
    b != 0 (:class:`DegenerateScheme` otherwise) and an exact complex-rational
    square root of c^2 - a*b (:class:`InexactSquareRoot` otherwise).
    """
    s = SigmaSpec.of(sigma)
    if s.b.is_zero:
        raise DegenerateScheme(
            "b = 0: the closed-form solution divides by b; test membership "
            "of p-side candidates directly instead"
        )
    radicand = s.c * s.c - s.a * s.b
    root = gaussian_sqrt(radicand)
    if root is None:
        raise InexactSquareRoot(
            f"c^2 - a*b = {radicand} has no exact complex-rational square root"
        )
    q = Expression.variable(VariableId(Sector.C, Kind.POSITION, 0))
    p = Expression.variable(VariableId(Sector.C, Kind.MOMENTUM, 0))
    out = []
    for branch in (root, -root):
        lam = (branch - s.c) / s.b
        candidate = q + p * lam
        if not minimal_membership(candidate, s, trials=1).is_zero:
            raise AssertionError(f"closed-form kappa failed membership: {candidate}")
        out.append(candidate)
    return out


def gaussian_sqrt(z: Coefficient) -> Coefficient | None:
    """Exact square root of a complex rational, or None if none exists."""
    if z.is_zero:
        return Coefficient()
    if not z.im:
        if z.re > 0:
            r = _fraction_sqrt(z.re)
            return None if r is None else Coefficient(r)
        r = _fraction_sqrt(-z.re)
        return None if r is None else Coefficient(_f0, r)
    norm = _fraction_sqrt(z.re * z.re + z.im * z.im)
    if norm is None:
        return None
    re2 = (z.re + norm) / 2
    re = _fraction_sqrt(re2)
    if re is None or not re:
        return None
    return Coefficient(re, z.im / (2 * re))


_f0 = Fraction(0)


def _fraction_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    num = math.isqrt(x.numerator)
    den = math.isqrt(x.denominator)
    if num * num == x.numerator and den * den == x.denominator:
        return Fraction(num, den)
    return None
