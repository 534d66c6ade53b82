"""Acceptance suite.

One test per acceptance criterion, each printing a single PASS/FAIL line
(run with ``pytest tests/test_acceptance.py -v -s``).  Identity criteria run
over randomized expression corpora at zero tolerance; numeric criteria pin
the stated tolerances.
"""

import json
import math
import random
from fractions import Fraction

import numpy as np

import qcphase as q
from qcphase.dynamics import _numeric_poly
from qcphase.expr import Coefficient, Expression, Sector, pC, pQ, qC, qQ
from qcphase.grammar import format_expression, parse
from qcphase.products import ProductSpec, SigmaSpec

from helpers import rand_expr, rand_pure, rand_sigma
from oracles import associator_oracle, qmc_gaussian_expectation

WEYL = ProductSpec()
I = Coefficient(Fraction(0), Fraction(1))
TRIALS = 200


def _report(number, name, failures):
    status = "PASS" if not failures else f"FAIL ({'; '.join(failures)})"
    print(f"\nCRITERION {number} ({name}): {status}")
    assert not failures, f"criterion {number} ({name}): {failures}"


def test_criterion_1_exact_identity_suite():
    rng = random.Random(101)
    failures = []

    def tally(label, condition):
        if not condition:
            failures.append(label)

    for trial in range(TRIALS):
        spec = (
            WEYL
            if trial % 3 == 0
            else ProductSpec(rand_sigma(rng), rand_sigma(rng))
        )
        sigma = spec.sigma_c

        # star associativity on pure-Q triples, Weyl and random schemes
        a, b, c = (rand_pure(rng, Sector.Q, degree=4, terms=2) for _ in range(3))
        left = q.star_product(q.star_product(a, b, spec), c, spec)
        right = q.star_product(a, q.star_product(b, c, spec), spec)
        tally("star associativity", left == right)

        # G - G^t = P and sigma annihilating constants
        u_c, v_c = rand_pure(rng, Sector.C, degree=4), rand_pure(rng, Sector.C, degree=4)
        tally(
            "G commutator is Poisson",
            q.g_product(u_c, v_c, sigma) - q.g_product(v_c, u_c, sigma)
            == q.poisson(u_c, v_c, Sector.C),
        )
        tally(
            "sigma annihilates constants",
            q.sigma_product(Expression.one(), u_c, sigma).is_zero
            and q.sigma_product(v_c, Expression.one(), sigma).is_zero,
        )

        # hybrid bracket: antisymmetry, bilinearity, cross-form equality
        u = rand_expr(rng, degree=4, terms=3)
        v = rand_expr(rng, degree=4, terms=3)
        w = rand_expr(rng, degree=3, terms=2)
        f1 = q.hybrid_bracket(u, v, spec, form="F1")
        f2 = q.hybrid_bracket(u, v, spec, form="F2")
        f3 = q.hybrid_bracket(u, v, spec, form="F3")
        tally("cross-form F1=F2=F3", f1 == f2 == f3)
        tally("antisymmetry", f3 == -q.hybrid_bracket(v, u, spec))
        alpha = Coefficient(Fraction(rng.randint(1, 3), 2), Fraction(rng.randint(-1, 1)))
        bilinear = q.hybrid_bracket(u * alpha + w, v, spec) == f3 * alpha + q.hybrid_bracket(w, v, spec)
        tally("bilinearity", bilinear)

        # factored pull-out form
        v_q = rand_pure(rng, Sector.Q, degree=3, terms=2)
        v_c2 = rand_pure(rng, Sector.C, degree=3, terms=2)
        f4 = q.hybrid_bracket(u, (v_q, v_c2), spec, form="F4")
        tally("F4 factored", f4 == q.hybrid_bracket(u, v_q * v_c2, spec, form="F3"))

        # the three reduction identities on pure factors
        u_q = rand_pure(rng, Sector.Q)
        v_q2 = rand_pure(rng, Sector.Q)
        hybrid = v_q2 * v_c
        tally("reduction: cross-sector", q.hybrid_bracket(u_q, v_c, spec).is_zero)
        tally(
            "reduction: quantum side",
            q.hybrid_bracket(u_q, hybrid, spec)
            == v_c * q.quantum_bracket(u_q, v_q2, spec),
        )
        tally(
            "reduction: classical side",
            q.hybrid_bracket(u_c, hybrid, spec)
            == v_q2 * q.poisson(u_c, v_c, Sector.C),
        )
    _report(1, "exact identity suite", sorted(set(failures)))


def test_criterion_2_nogo_reproduction():
    failures = []
    witness_triple = (qC() ** 2, qC() * pC() ** 2, pC())
    expected = -(Expression.hbar(2) * qC() * pC())
    if associator_oracle(*witness_triple, (0, 0, 0)) != expected:
        failures.append("independent oracle disagrees on the frozen witness")
    if q.composition_associator(*witness_triple, SigmaSpec()) != expected:
        failures.append("library associator disagrees on the frozen witness")
    results = q.nogo_scan(seed=0)
    if len(results) != 27:
        failures.append(f"grid returned {len(results)} entries")
    for sigma, triple, value in results:
        if value.is_zero or associator_oracle(*triple, sigma.triple) != value:
            failures.append(f"witness for sigma {sigma} not confirmed by oracle")
    _report(2, "scheme-family no-go reproduction", failures)


def test_criterion_3_jacobi_leibniz_linkage():
    failures = []
    u = qQ() ** 2 * qC() ** 2
    v = qQ() * qC() * pC() ** 2
    w = pQ() ** 2 * pC()
    if q.jacobi_residual(u, v, w, WEYL).is_zero:
        failures.append("lifted witness satisfies Jacobi")
    if q.leibniz_pointwise_residual(u, v, w, WEYL).is_zero:
        failures.append("pointwise rule unexpectedly holds on the witness")

    rng = random.Random(103)
    cert = q.certify_subalgebra([qC(), pC()], SigmaSpec(), 2)
    if not cert.certified:
        failures.append("linear span failed certification")
    for _ in range(25):
        triples = []
        for _k in range(3):
            c_part = sum(
                (e * rng.randint(-3, 3) for e in cert.basis), Expression.zero()
            )
            triples.append(rand_pure(rng, Sector.Q, degree=2, terms=2) * c_part)
        if not q.leibniz_residual(*triples, WEYL).is_zero:
            failures.append("hybrid-product Leibniz failed on certified triple")
            break
        if not q.jacobi_residual(*triples, WEYL).is_zero:
            failures.append("Jacobi failed on certified triple")
            break
    _report(3, "Jacobi/Leibniz linkage", failures)


def test_criterion_4_subalgebra_certifications():
    failures = []
    grid = q.default_grid()

    for sigma in grid:
        if not q.certify_subalgebra([qC(), pC()], sigma, 2).certified:
            failures.append(f"linear span refused for sigma {sigma}")

    position_powers = [qC() ** k for k in range(1, 7)]
    momentum_powers = [pC() ** k for k in range(1, 7)]
    for sigma in grid:
        if sigma.a.is_zero:
            if not q.certify_subalgebra(position_powers, sigma, 6).certified:
                failures.append(f"functions of qC refused for sigma {sigma}")
        if sigma.b.is_zero:
            if not q.certify_subalgebra(momentum_powers, sigma, 6).certified:
                failures.append(f"functions of pC refused for sigma {sigma}")

    for c in (1, -1):
        cert = q.certify_subalgebra(
            [qC(), pC(), qC() * pC()], SigmaSpec.of((0, 0, c)), 2
        )
        if not cert.certified:
            failures.append(f"span with qC*pC refused for c={c}")

    husimi_like = SigmaSpec.of((1, 1, 0))
    ladder = q.kappa_linear(husimi_like)
    if ladder != [qC() + pC() * I, qC() - pC() * I]:
        failures.append("closed-form kappa pair is wrong")
    rng = random.Random(104)
    for kappa in ladder:
        if not q.minimal_membership(kappa, husimi_like).is_zero:
            failures.append("kappa failed the membership condition")
        for _ in range(6):
            f1 = sum((kappa ** k * rng.randint(-3, 3) for k in range(6)), Expression.zero())
            f2 = sum((kappa ** k * rng.randint(-3, 3) for k in range(6)), Expression.zero())
            if q.composition_product(f1, f2, husimi_like) != f1 * f2:
                failures.append("composition failed to collapse on functions of kappa")
                break
    _report(4, "subalgebra certifications", failures)


def test_criterion_5_coupled_oscillator_dynamics():
    failures = []
    sys_ = q.coupled_oscillator("1/10")
    state = q.GaussianState([1.0, 0.0], np.eye(2) * 0.5, [0.0, 1.0], np.eye(2))
    grid = np.linspace(0.0, 10.0, 101)
    traj = q.propagate(sys_, grid, "matrix_exponential")

    hybrid_devs, poisson_devs = [], []
    for t in grid:
        report = q.canonical_audit(traj, sys_, t)
        hybrid_devs.append(report.hybrid)
        poisson_devs.append(report.poisson_only)
    if max(hybrid_devs) > 1e-9:
        failures.append(f"(i) hybrid audit {max(hybrid_devs):.3e} > 1e-9")
    if max(poisson_devs) <= 1e-3:
        failures.append(f"(ii) Poisson-only audit stayed at {max(poisson_devs):.3e}")

    energy = np.array(
        [q.expectation(sys_.hamiltonian, traj, state, t).real for t in grid]
    )
    drift = float(np.max(np.abs(energy - energy[0])))
    if drift > 1e-8:
        failures.append(f"(iii) energy drift {drift:.3e} > 1e-8")

    rk4 = q.propagate(sys_, grid, "rk4", rk4_dt=1e-3)
    method_gap = float(np.max(np.abs(rk4.maps - traj.maps)))
    if method_gap > 1e-8:
        failures.append(f"(iv) rk4 vs matrix exponential gap {method_gap:.3e}")

    lam_zero = q.propagate(q.coupled_oscillator(0), grid, "matrix_exponential")
    baseline_sys = q.HybridSystem(sys_.h_q, sys_.h_c, Expression.zero(), sys_.spec)
    baseline = q.propagate(baseline_sys, grid, "matrix_exponential")
    if not np.array_equal(lam_zero.maps, baseline.maps):
        failures.append("(v) lambda = 0 run does not bit-match the baseline")
    obs = qC() * pC() + qQ() ** 2
    series_a = [q.expectation(obs, lam_zero, state, t) for t in grid]
    series_b = [q.expectation(obs, baseline, state, t) for t in grid]
    if series_a != series_b:
        failures.append("(v) lambda = 0 expectations do not bit-match the baseline")
    _report(5, "coupled-oscillator dynamics", failures)


def test_criterion_6_expectation_engine_vs_qmc():
    failures = []
    rng = random.Random(106)
    sys_ = q.coupled_oscillator("1/10")
    traj = q.propagate(sys_, [0.0, 1.0], "matrix_exponential")
    variables = traj.variables

    for case in range(8):
        mean_q = [rng.uniform(-1, 1), rng.uniform(-1, 1)]
        mean_c = [rng.uniform(-1, 1), rng.uniform(-1, 1)]

        def random_cov():
            d = np.diag([rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)])
            r = rng.uniform(-0.3, 0.3)
            d[0, 1] = d[1, 0] = r * math.sqrt(d[0, 0] * d[1, 1])
            return d

        state = q.GaussianState(mean_q, random_cov(), mean_c, random_cov())
        obs = rand_expr(rng, degree=6, terms=4, imag=False)
        value = q.expectation(obs, traj, state, 0.0).real

        poly = _numeric_poly(obs, variables, hbar=1.0)
        real_poly = {k: c.real for k, c in poly.items()}
        oracle = qmc_gaussian_expectation(
            real_poly, state.full_mean(variables), state.full_cov(variables),
            points=1 << 20, seed=1000 + case,
        )
        tolerance = 5e-3 * max(1.0, abs(oracle))
        if abs(value - oracle) > tolerance:
            failures.append(
                f"case {case}: moments {value:.6g} vs qmc {oracle:.6g}"
            )
    _report(6, "Gaussian expectation engine vs quasi-Monte-Carlo", failures)


def test_criterion_7_cli_contract(tmp_path, capsys):
    import os

    from qcphase.cli import main

    failures = []
    golden_dir = os.path.join(os.path.dirname(__file__), "golden")
    config = os.path.join(
        os.path.dirname(__file__), "..", "configs", "coupled_oscillator.json"
    )

    def run(*argv):
        code = main(list(argv))
        out = capsys.readouterr().out
        return code, out

    code, out = run("bracket", "qQ", "pQ")
    with open(os.path.join(golden_dir, "bracket_qQ_pQ.txt")) as fh:
        if code != 0 or out != fh.read():
            failures.append("bracket golden mismatch")

    code, out = run("check", "assoc", "qC^2", "qC*pC^2", "pC", "--sigma", "0,0,0")
    with open(os.path.join(golden_dir, "check_assoc_weyl.txt")) as fh:
        if code != 0 or out != fh.read():
            failures.append("check assoc golden mismatch")

    runs = []
    for label in ("a", "b"):
        directory = tmp_path / label
        code, _out = run(
            "simulate", "--config", config, "--output-dir", str(directory),
            "--no-figures",
        )
        if code != 0:
            failures.append("simulate exited nonzero")
        runs.append(directory)
    for name in ("timeseries.csv", "summary.json", "backreaction.csv"):
        if (runs[0] / name).read_bytes() != (runs[1] / name).read_bytes():
            failures.append(f"nondeterministic output: {name}")
    with open(os.path.join(golden_dir, "timeseries.csv"), "rb") as fh:
        if (runs[0] / "timeseries.csv").read_bytes() != fh.read():
            failures.append("simulate CSV golden mismatch")
    got = json.loads((runs[0] / "summary.json").read_text())
    with open(os.path.join(golden_dir, "summary.json")) as fh:
        expected = json.load(fh)
    got.pop("versions"), expected.pop("versions")
    if got != expected:
        failures.append("simulate summary golden mismatch")

    rng = random.Random(107)
    for _ in range(1000):
        e = rand_expr(rng, degree=4, terms=4, hbar_max=2)
        if parse(format_expression(e)) != e:
            failures.append("round-trip failure")
            break
    _report(7, "CLI golden runs, determinism, round-trip", failures)
