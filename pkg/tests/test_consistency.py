"""Consistency verdicts: associators, Jacobi/Leibniz, no-go, certification."""

import random
from fractions import Fraction

import pytest

from qcphase.expr import Coefficient, Expression, Sector, pC, pQ, qC, qQ
from qcphase.consistency import (
    ClosureEscape,
    DegenerateScheme,
    InexactSquareRoot,
    WitnessNotFound,
    associator,
    certify_subalgebra,
    check_reduction,
    composition_associator,
    default_grid,
    gaussian_sqrt,
    jacobi_residual,
    kappa_linear,
    leibniz_pointwise_residual,
    leibniz_residual,
    minimal_membership,
    nogo_scan,
    sigma_assoc_residual,
)
from qcphase.products import ProductSpec, SigmaSpec, composition_product

from helpers import rand_expr, rand_pure, rand_sigma
from oracles import associator_oracle

WEYL = ProductSpec()
I = Coefficient(Fraction(0), Fraction(1))


def hybridize(rng, c_expr):
    """Attach an independent random pure-Q factor to a C-sector expression."""
    return rand_pure(rng, Sector.Q, degree=2, terms=2) * c_expr


class TestAssociator:
    def test_weyl_witness_matches_brute_force_oracle(self):
        u, v, w = qC() ** 2, qC() * pC() ** 2, pC()
        expected = -(Expression.hbar(2) * qC() * pC())
        assert associator_oracle(u, v, w, (0, 0, 0)) == expected
        assert composition_associator(u, v, w, SigmaSpec()) == expected

    def test_pointwise_product_is_associative(self):
        rng = random.Random(20)
        for _ in range(25):
            u, v, w = (rand_expr(rng) for _ in range(3))
            assert associator(u, v, w, lambda x, y: x * y).is_zero

    def test_linear_span_is_associative_for_every_scheme(self):
        rng = random.Random(21)
        for sigma in default_grid():
            coeffs = [Coefficient(rng.randint(-3, 3), rng.randint(-2, 2)) for _ in range(6)]
            u = qC() * coeffs[0] + pC() * coeffs[1]
            v = qC() * coeffs[2] + pC() * coeffs[3]
            w = qC() * coeffs[4] + pC() * coeffs[5]
            assert composition_associator(u, v, w, sigma).is_zero

    def test_matches_oracle_on_random_triples(self):
        rng = random.Random(22)
        for _ in range(25):
            u, v, w = (rand_pure(rng, Sector.C) for _ in range(3))
            s = rand_sigma(rng)
            got = composition_associator(u, v, w, s)
            assert got == associator_oracle(u, v, w, s.triple)

    def test_order_hbar_part_always_vanishes(self):
        rng = random.Random(23)
        for _ in range(25):
            u, v, w = (rand_pure(rng, Sector.C) for _ in range(3))
            a = composition_associator(u, v, w, rand_sigma(rng))
            assert all(h >= 2 for _m, h in a.terms)


class TestSigmaAssocResidual:
    def test_linear_triples_vanish(self):
        report = sigma_assoc_residual(qC(), pC(), qC() + pC(), SigmaSpec())
        assert report.is_zero

    def test_weyl_witness_proportional_to_associator(self):
        u, v, w = qC() ** 2, qC() * pC() ** 2, pC()
        report = sigma_assoc_residual(u, v, w, SigmaSpec())
        assert not report.is_zero
        quarter_h2 = Expression.hbar(2) * Coefficient(Fraction(1, 4))
        assert composition_associator(u, v, w, SigmaSpec()) == -(
            quarter_h2 * report.residual
        )

    def test_standard_scheme_restricted_span(self):
        rng = random.Random(24)
        basis = [qC(), pC(), qC() * pC()]
        for _ in range(15):
            u, v, w = (
                sum(
                    (b * Coefficient(rng.randint(-2, 2)) for b in basis),
                    Expression.zero(),
                )
                for _ in range(3)
            )
            assert sigma_assoc_residual(u, v, w, (0, 0, 1)).is_zero

    def test_equivalence_with_associator(self):
        # exact relation: associator = -(hbar^2/4) * eight-term residual
        rng = random.Random(25)
        quarter_h2 = Expression.hbar(2) * Coefficient(Fraction(1, 4))
        for _ in range(25):
            u, v, w = (rand_pure(rng, Sector.C) for _ in range(3))
            s = rand_sigma(rng)
            assoc = composition_associator(u, v, w, s)
            eight = sigma_assoc_residual(u, v, w, s).residual
            assert assoc == -(quarter_h2 * eight)


class TestJacobi:
    def test_pure_quantum_triples(self):
        rng = random.Random(26)
        for _ in range(10):
            u, v, w = (rand_pure(rng, Sector.Q) for _ in range(3))
            assert jacobi_residual(u, v, w, WEYL).is_zero

    def test_pure_classical_triples(self):
        rng = random.Random(27)
        for _ in range(10):
            u, v, w = (rand_pure(rng, Sector.C) for _ in range(3))
            assert jacobi_residual(u, v, w, WEYL).is_zero

    def test_hybrid_witness_fails(self):
        # the non-associative C triple lifted with independent, noncommuting
        # Q factors; a common (or commuting) Q factor would cancel the
        # residual because the Poisson bracket itself satisfies Jacobi
        u = qQ() ** 2 * qC() ** 2
        v = qQ() * qC() * pC() ** 2
        w = pQ() ** 2 * pC()
        report = jacobi_residual(u, v, w, WEYL)
        assert report.residual == -(Expression.hbar(2) * qQ() * qC() * pC() * 8)
        assert report.witness == (u, v, w)

    def test_common_quantum_factor_cancels_the_witness(self):
        u = qQ() * qC() ** 2
        v = qQ() * qC() * pC() ** 2
        w = qQ() * pC()
        assert jacobi_residual(u, v, w, WEYL).is_zero

    def test_certified_span_lifts_to_hybrid_jacobi(self):
        rng = random.Random(28)
        basis = [Expression.one(), qC(), pC(), qC() * pC()]
        spec = ProductSpec(sigma_c=SigmaSpec.of((0, 0, 1)))
        for _ in range(8):
            u, v, w = (
                hybridize(rng, rng.choice(basis)) for _ in range(3)
            )
            assert jacobi_residual(u, v, w, spec).is_zero


class TestLeibniz:
    def test_pure_quantum_triple(self):
        rng = random.Random(29)
        for _ in range(8):
            u, v, w = (rand_pure(rng, Sector.Q) for _ in range(3))
            assert leibniz_residual(u, v, w, WEYL).is_zero

    def test_certified_subalgebra_triple(self):
        rng = random.Random(30)
        for _ in range(8):
            u = hybridize(rng, qC() * rng.randint(1, 3) + pC() * rng.randint(-3, -1))
            v = hybridize(rng, pC())
            w = hybridize(rng, qC())
            assert leibniz_residual(u, v, w, WEYL).is_zero

    def test_pointwise_rule_fails_on_witness_triple(self):
        u = qQ() ** 2 * qC() ** 2
        v = qQ() * qC() * pC() ** 2
        w = pQ() ** 2 * pC()
        got = leibniz_pointwise_residual(u, v, w, WEYL).residual
        assert got == -(Expression.hbar(2) * qQ() * qC() ** 2 * pC() ** 2 * 2)


class TestReduction:
    def test_weyl_scheme(self):
        assert check_reduction(WEYL, trials=10, seed=1).is_zero

    def test_random_schemes(self):
        rng = random.Random(31)
        for _ in range(5):
            spec = ProductSpec(rand_sigma(rng), rand_sigma(rng))
            assert check_reduction(spec, trials=8, seed=rng.randint(0, 99)).is_zero

    def test_zeroth_order_corruption_breaks_middle_identity(self):
        report = check_reduction(WEYL, trials=5, seed=2, corrupt_zeroth=Coefficient(1))
        assert not report.is_zero
        assert report.witness[0] == "quantum-side"


class TestNogoScan:
    def test_full_default_grid_yields_witnesses(self):
        results = nogo_scan(seed=0)
        assert len(results) == 27
        for sigma, (u, v, w), witness_assoc in results:
            assert composition_associator(u, v, w, sigma) == witness_assoc
            assert not witness_assoc.is_zero

    def test_specific_standard_scheme_witness_has_quadratic_factor(self):
        (entry,) = nogo_scan([SigmaSpec.of((0, 0, 1))])
        _sigma, triple, _assoc = entry
        assert max(e.degree() for e in triple) >= 2

    def test_rejects_small_degree_budget(self):
        with pytest.raises(ValueError):
            nogo_scan(trial_degree=2)

    def test_missing_witness_carries_partial_results(self):
        exc = WitnessNotFound([SigmaSpec()], [])
        assert "no associator witness" in str(exc)
        assert exc.missing == [SigmaSpec()]
        assert exc.found == []


class TestCertify:
    def test_functions_of_position_certify(self):
        cert = certify_subalgebra([qC()], SigmaSpec.of((0, 1, 1)), 6)
        assert cert.certified

    def test_position_powers_certify_to_degree_six(self):
        generators = [qC() ** k for k in range(1, 7)]
        cert = certify_subalgebra(generators, SigmaSpec.of((0, -1, 2)), 6)
        assert cert.certified
        assert len(cert.basis) == 7

    def test_standard_scheme_span_certifies(self):
        cert = certify_subalgebra(
            [qC(), pC(), qC() * pC()], SigmaSpec.of((0, 0, 1)), 2
        )
        assert cert.certified
        assert len(cert.basis) == 4

    def test_quadratic_generators_refuted_for_weyl(self):
        cert = certify_subalgebra([qC() ** 2, pC()], SigmaSpec(), 4)
        assert cert.verdict == "refuted"
        u, v, w = cert.witness
        assert not composition_associator(u, v, w, SigmaSpec()).is_zero

    def test_closure_escape_reports_pair(self):
        # with a != 0, G(q^3, q^3) ~ q^4 and iterating escapes any finite cap
        with pytest.raises(ClosureEscape):
            certify_subalgebra([qC() ** 3], SigmaSpec.of((1, 0, 0)), 3)

    def test_rejects_non_classical_generators(self):
        with pytest.raises(ValueError):
            certify_subalgebra([qQ()], SigmaSpec(), 2)

    def test_certified_span_has_zero_leibniz_residual_when_hybridized(self):
        rng = random.Random(33)
        cert = certify_subalgebra([qC(), pC()], SigmaSpec.of((1, 1, 0)), 2)
        assert cert.certified
        spec = ProductSpec(sigma_c=SigmaSpec.of((1, 1, 0)))
        for _ in range(5):
            u, v, w = (hybridize(rng, rng.choice(cert.basis)) for _ in range(3))
            assert jacobi_residual(u, v, w, spec).is_zero
            assert leibniz_residual(u, v, w, spec).is_zero


class TestMinimalSubalgebra:
    def test_ladder_combination_for_husimi_scheme(self):
        kappa = qC() + pC() * I
        assert minimal_membership(kappa, (1, 1, 0)).is_zero

    def test_position_member_when_a_vanishes(self):
        assert minimal_membership(qC(), (0, 2, 1)).is_zero

    def test_position_rejected_when_a_nonzero(self):
        report = minimal_membership(qC(), (1, 0, 0))
        assert report.residual == Expression.one()

    def test_collapse_to_pointwise_for_random_functions(self):
        kappa = qC() + pC() * I
        sigma = SigmaSpec.of((1, 1, 0))
        rng = random.Random(34)
        for _ in range(6):
            f1 = sum(
                (kappa ** k * rng.randint(-2, 2) for k in range(5)), Expression.zero()
            )
            f2 = sum(
                (kappa ** k * rng.randint(-2, 2) for k in range(5)), Expression.zero()
            )
            assert composition_product(f1, f2, sigma) == f1 * f2


class TestKappaLinear:
    def test_husimi_scheme_gives_ladder_pair(self):
        got = kappa_linear((1, 1, 0))
        assert got == [qC() + pC() * I, qC() - pC() * I]

    def test_degenerate_root_pair(self):
        got = kappa_linear((0, 1, 0))
        assert got == [qC(), qC()]

    def test_all_zero_scheme_is_degenerate_but_every_linear_member_passes(self):
        with pytest.raises(DegenerateScheme):
            kappa_linear((0, 0, 0))
        rng = random.Random(35)
        for _ in range(10):
            kappa = qC() * rng.randint(-5, 5) + pC() * rng.randint(-5, 5)
            assert minimal_membership(kappa, (0, 0, 0)).is_zero

    def test_members_always_pass_membership(self):
        for sigma in default_grid():
            if sigma.b.is_zero:
                continue
            try:
                members = kappa_linear(sigma)
            except InexactSquareRoot:
                continue
            for kappa in members:
                assert minimal_membership(kappa, sigma, trials=1).is_zero

    def test_irrational_radicand_is_reported(self):
        with pytest.raises(InexactSquareRoot):
            kappa_linear((-1, 1, 1))  # c^2 - ab = 2


class TestGaussianSqrt:
    @pytest.mark.parametrize(
        "value",
        [
            Coefficient(4),
            Coefficient(Fraction(9, 16)),
            Coefficient(-1),
            Coefficient(0, 2),  # sqrt(2i) = 1 + i
            Coefficient(3, 4),  # sqrt = 2 + i
            Coefficient(0),
        ],
    )
    def test_exact_roots_square_back(self, value):
        root = gaussian_sqrt(value)
        assert root is not None
        assert root * root == value

    @pytest.mark.parametrize("value", [Coefficient(2), Coefficient(1, 1)])
    def test_inexact_roots_return_none(self, value):
        assert gaussian_sqrt(value) is None
