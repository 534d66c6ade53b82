"""Heisenberg-picture simulation of hybrid quantum-classical systems.

A system is a Hamiltonian split H = H_Q + H_C + H_I together with a product
scheme.  Equations of motion come from the hybrid bracket; observables
evolve while a Gaussian product state supplies the initial moments.  Linear
systems propagate through an exact-coefficient matrix ODE (matrix
exponential or RK4 on the fundamental matrix); general polynomial systems
can step symbolically with a truncated Lie-Taylor series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .consistency import ClosureEscape, certify_subalgebra
from .expr import (
    Coefficient,
    Expression,
    Kind,
    Sector,
    VariableId,
    canonical_pairs,
)
from .products import ProductSpec, hybrid_bracket, poisson, quantum_bracket


class NonlinearSystem(ValueError):
    """A canonical equation of motion is not affine in canonical variables."""


class DegreeBlowup(RuntimeError):
    """A symbolically evolved observable exceeded the configured degree cap."""


class StepRejected(RuntimeError):
    """A propagation accuracy check failed at the configured tolerance."""


class NotConserved(ValueError):
    """A claimed conserved factor has a nonzero bracket with the Hamiltonian."""


@dataclass
class HybridSystem:
    """Hamiltonian split into pure quantum, pure classical and hybrid parts.

    When the classical factors of ``h_i`` do not certify as an associative
    subalgebra for the configured scheme, the system is flagged
    ``unconsistent_hybrid``; evolution of pure variables is still meaningful
    in that case, evolution of hybrid observables is not.
    """

    h_q: Expression
    h_c: Expression
    h_i: Expression
    spec: ProductSpec = field(default_factory=ProductSpec)

    def __post_init__(self) -> None:
        if self.h_q.dof_indices(Sector.C):
            raise ValueError("h_q must not contain C-sector variables")
        if self.h_c.dof_indices(Sector.Q):
            raise ValueError("h_c must not contain Q-sector variables")
        self.unconsistent_hybrid = not self._interaction_certifies()

    def _interaction_certifies(self) -> bool:
        if self.h_i.is_zero:
            return True
        c_factors = [c for _q, c in self.h_i.sector_decompose()]
        degree = max(c.degree() for c in c_factors)
        try:
            cert = certify_subalgebra(c_factors, self.spec.sigma_c, max(degree, 1))
        except ClosureEscape:
            return False
        return cert.certified

    @property
    def hamiltonian(self) -> Expression:
        return self.h_q + self.h_c + self.h_i

    @property
    def canonical_variables(self) -> tuple:
        return canonical_pairs([self.hamiltonian])


def coupled_oscillator(lam="1/10", spec: ProductSpec | None = None) -> HybridSystem:
    """Unit-mass, unit-frequency oscillator pair with bilinear coupling.

    The classical coupling factor is linear, hence subalgebra-allowed for
    every scheme, and the canonical equations of motion close linearly.
    """
    from .expr import pC, pQ, qC, qQ

    half = Fraction(1, 2)
    lam_c = Coefficient.of(Fraction(lam) if not isinstance(lam, Coefficient) else lam)
    return HybridSystem(
        h_q=(pQ() ** 2 + qQ() ** 2) * half,
        h_c=(pC() ** 2 + qC() ** 2) * half,
        h_i=qQ() * qC() * lam_c,
        spec=spec or ProductSpec(),
    )


@dataclass
class GaussianState:
    """Product Gaussian initial state: one (mean, covariance) block per sector.

    Sector blocks are ordered [q0, p0, q1, p1, ...].  Cross-sector
    covariance is zero by construction.  Covariances must be symmetric
    positive semidefinite; a Q block narrower than the uncertainty bound is
    legal (the quasi-distribution need not be a classical density) but is
    reported by :meth:`uncertainty_warnings`.
    """

    mean_q: np.ndarray
    cov_q: np.ndarray
    mean_c: np.ndarray
    cov_c: np.ndarray

    def __post_init__(self) -> None:
        self.mean_q = np.asarray(self.mean_q, dtype=float)
        self.cov_q = np.asarray(self.cov_q, dtype=float)
        self.mean_c = np.asarray(self.mean_c, dtype=float)
        self.cov_c = np.asarray(self.cov_c, dtype=float)
        for label, mean, cov in (
            ("Q", self.mean_q, self.cov_q),
            ("C", self.mean_c, self.cov_c),
        ):
            n = mean.shape[0]
            if n % 2:
                raise ValueError(f"{label} block must hold whole (q, p) pairs")
            if cov.shape != (n, n):
                raise ValueError(f"{label} covariance shape {cov.shape} != ({n},{n})")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError(f"{label} covariance is not symmetric")
            if n and np.linalg.eigvalsh(cov).min() < -1e-10:
                raise ValueError(f"{label} covariance is not positive semidefinite")

    def _position(self, var: VariableId) -> tuple:
        block = 0 if var.sector == Sector.Q else 1
        size = (self.mean_q, self.mean_c)[block].shape[0]
        slot = 2 * var.index + int(var.kind)
        if slot >= size:
            raise ValueError(
                f"state has no entry for {var.name}: the "
                f"{var.sector.name} block holds {size // 2} pair(s), indexed from 0"
            )
        return block, slot

    def full_mean(self, variables: Sequence[VariableId]) -> np.ndarray:
        means = (self.mean_q, self.mean_c)
        return np.array([means[b][i] for b, i in map(self._position, variables)])

    def full_cov(self, variables: Sequence[VariableId]) -> np.ndarray:
        covs = (self.cov_q, self.cov_c)
        n = len(variables)
        out = np.zeros((n, n))
        pos = [self._position(v) for v in variables]
        for r, (br, ir) in enumerate(pos):
            for c, (bc, ic) in enumerate(pos):
                if br == bc:
                    out[r, c] = covs[br][ir, ic]
        return out

    def uncertainty_warnings(self, hbar: float = 1.0) -> list:
        out = []
        bound = (hbar / 2.0) ** 2
        for i in range(self.mean_q.shape[0] // 2):
            block = self.cov_q[2 * i : 2 * i + 2, 2 * i : 2 * i + 2]
            det = float(np.linalg.det(block))
            if det < bound * (1 - 1e-12):
                out.append(
                    f"Q pair {i}: det(cov) = {det:.6g} below uncertainty bound "
                    f"(hbar/2)^2 = {bound:.6g}"
                )
        for message in out:
            warnings.warn(message, stacklevel=2)
        return out


@dataclass
class Linearization:
    """Exact affine right-hand side dz/dt = M z + b for the canonical vector."""

    variables: tuple
    matrix: list  # rows of Coefficient
    offset: list  # Coefficient
    m: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        has_imag = any(c.im for row in self.matrix for c in row) or any(
            c.im for c in self.offset
        )
        dtype = complex if has_imag else float
        self.m = np.array(
            [[_to_num(c, dtype) for c in row] for row in self.matrix], dtype=dtype
        )
        self.b = np.array([_to_num(c, dtype) for c in self.offset], dtype=dtype)


def _to_num(c: Coefficient, dtype):
    return c.to_complex() if dtype is complex else float(c.re)


def eom(f: Expression, sys: HybridSystem) -> Expression:
    """Equation of motion {[f, H]} for an observable without explicit time
    dependence."""
    return hybrid_bracket(f, sys.hamiltonian, sys.spec)


def linearize(sys: HybridSystem) -> Linearization:
    """Extract dz/dt = M z + b when every canonical equation of motion is
    affine; raises :class:`NonlinearSystem` otherwise."""
    variables = sys.canonical_variables
    index = {v: j for j, v in enumerate(variables)}
    matrix = []
    offset = []
    for v in variables:
        e = eom(Expression.variable(v), sys)
        row = [Coefficient() for _ in variables]
        const = Coefficient()
        for (mono, h), coeff in e.terms.items():
            if h != 0 or sum(exp for _w, exp in mono) > 1:
                raise NonlinearSystem(
                    f"equation of motion for {v.name} is not affine: {e}"
                )
            if not mono:
                const = const + coeff
            else:
                (w, _exp), = mono
                row[index[w]] = row[index[w]] + coeff
        matrix.append(row)
        offset.append(const)
    return Linearization(variables, matrix, offset)


@dataclass
class Trajectory:
    """Evolved canonical variables over a time grid.

    For the linear methods each variable at time t_k is the affine map
    ``maps[k] @ [z_0, 1]``; the symbolic method stores one polynomial in the
    initial variables per canonical variable and time point.
    """

    times: np.ndarray
    variables: tuple
    method: str
    maps: np.ndarray | None = None  # (T, n, n+1): rows [A | offset]
    symbolic: list | None = None  # per time: {VariableId: Expression}

    def index_of(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))[0]
        if hits.size == 0:
            raise KeyError(f"t = {t} is not on the trajectory grid")
        return int(hits[0])

    def coefficients_at(self, t) -> tuple:
        k = self.index_of(t)
        a = self.maps[k]
        return a[:, :-1], a[:, -1]


def _expm_taylor(m: np.ndarray, threshold: float = 0.5, order: int = 18) -> np.ndarray:
    """Scaling-and-squaring matrix exponential.

    Scales until the 1-norm is below ``threshold``, sums the Taylor series to
    ``order`` (truncation below 1e-20 for the default threshold), then squares
    back.
    """
    norm = float(np.linalg.norm(m, 1))
    squarings = 0
    if norm > threshold:
        squarings = max(0, int(math.ceil(math.log2(norm / threshold))))
    scaled = m / (2.0 ** squarings)
    n = m.shape[0]
    eye = np.eye(n, dtype=m.dtype)
    acc = eye.copy()
    for k in range(order, 0, -1):
        acc = eye + scaled @ acc / k
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def _augmented(lin: Linearization) -> np.ndarray:
    n = lin.m.shape[0]
    aug = np.zeros((n + 1, n + 1), dtype=lin.m.dtype)
    aug[:n, :n] = lin.m
    aug[:n, n] = lin.b
    return aug


def propagate(
    sys: HybridSystem,
    t_grid: Sequence[float],
    method: str = "matrix_exponential",
    *,
    rk4_dt: float = 1e-3,
    rk4_check_tol: float | None = None,
    taylor_order: int = 8,
    degree_cap: int = 12,
    squaring_threshold: float = 0.5,
) -> Trajectory:
    """Propagate the canonical variables over the grid.

    ``matrix_exponential`` evaluates the exact flow of the affine system per
    grid point with scaling and squaring; ``rk4`` integrates the fundamental
    matrix with fixed substeps of at most ``rk4_dt``; ``taylor`` steps each
    canonical variable symbolically with the degree-capped Lie series
    sum_n (dt^n / n!) L^n f, L = bracket with H, and works for any polynomial
    Hamiltonian.
    """
    times = np.asarray([float(t) for t in t_grid], dtype=float)
    if times.size == 0 or abs(times[0]) > 1e-15:
        raise ValueError("the time grid must start at t = 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("the time grid must be strictly increasing")

    if method == "taylor":
        return _propagate_taylor(sys, times, taylor_order, degree_cap)

    lin = linearize(sys)
    n = lin.m.shape[0]
    maps = np.zeros((times.size, n, n + 1), dtype=lin.m.dtype)

    if method == "matrix_exponential":
        aug = _augmented(lin)
        for k, t in enumerate(times):
            full = _expm_taylor(aug * t, threshold=squaring_threshold)
            maps[k, :, :n] = full[:n, :n]
            maps[k, :, n] = full[:n, n]
    elif method == "rk4":
        maps[:] = _rk4_fundamental(lin, times, rk4_dt)
        if rk4_check_tol is not None:
            refined = _rk4_fundamental(lin, times, rk4_dt / 2.0)
            err = float(np.max(np.abs(refined - maps)))
            if err > rk4_check_tol:
                raise StepRejected(
                    f"rk4 halved-step check failed: deviation {err:.3e} > "
                    f"{rk4_check_tol:.3e}"
                )
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return Trajectory(times, lin.variables, method, maps=maps)


def _rk4_fundamental(lin: Linearization, times: np.ndarray, dt: float) -> np.ndarray:
    aug = _augmented(lin)
    n = lin.m.shape[0]
    state = np.eye(n + 1, dtype=lin.m.dtype)
    out = np.zeros((times.size, n, n + 1), dtype=lin.m.dtype)
    out[0] = state[:n, :]
    for k in range(1, times.size):
        span = float(times[k] - times[k - 1])
        steps = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / steps
        for _ in range(steps):
            k1 = aug @ state
            k2 = aug @ (state + 0.5 * h * k1)
            k3 = aug @ (state + 0.5 * h * k2)
            k4 = aug @ (state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = state[:n, :]
    return out


def _propagate_taylor(
    sys: HybridSystem, times: np.ndarray, order: int, degree_cap: int
) -> Trajectory:
    variables = sys.canonical_variables
    current = {v: Expression.variable(v) for v in variables}
    snapshots = [dict(current)]
    h = sys.hamiltonian
    inv_fact = [Fraction(1, math.factorial(n)) for n in range(order + 1)]
    for k in range(1, times.size):
        dt = Fraction(float(times[k])) - Fraction(float(times[k - 1]))
        nxt = {}
        for v, f in current.items():
            total = Expression.zero()
            derived = f
            for n in range(order + 1):
                if n:
                    derived = hybrid_bracket(derived, h, sys.spec)
                    if derived.is_zero:
                        break
                total = total + derived * Coefficient(dt ** n * inv_fact[n])
            if total.degree() > degree_cap:
                raise DegreeBlowup(
                    f"observable for {v.name} reached degree {total.degree()} "
                    f"> cap {degree_cap} at t = {float(times[k])}"
                )
            nxt[v] = total
        current = nxt
        snapshots.append(dict(current))
    return Trajectory(times, variables, "taylor", symbolic=snapshots)


# -- Gaussian expectation engine ----------------------------------------------


def _moment(k: tuple, mean: np.ndarray, cov: np.ndarray, memo: dict) -> float:
    """E[prod z_j^{k_j}] for a real Gaussian vector, by Stein recursion."""
    if not any(k):
        return 1.0
    got = memo.get(k)
    if got is not None:
        return got
    i = next(j for j, kj in enumerate(k) if kj)
    rest = tuple(kj - (j == i) for j, kj in enumerate(k))
    total = mean[i] * _moment(rest, mean, cov, memo)
    for j, kj in enumerate(rest):
        if kj and cov[i, j]:
            lowered = tuple(r - (l == j) for l, r in enumerate(rest))
            total += cov[i, j] * kj * _moment(lowered, mean, cov, memo)
    memo[k] = total
    return total


def _numeric_poly(
    e: Expression, variables: Sequence[VariableId], hbar: float
) -> dict:
    """Expression -> {exponent tuple: complex coefficient} over ``variables``."""
    index = {v: j for j, v in enumerate(variables)}
    n = len(variables)
    out: dict = {}
    for (mono, h), coeff in e.terms.items():
        exps = [0] * n
        for var, exp in mono:
            if var not in index:
                raise KeyError(f"{var.name} is not a trajectory variable")
            exps[index[var]] = exp
        key = tuple(exps)
        out[key] = out.get(key, 0j) + coeff.to_complex() * (hbar ** h)
    return out


def _poly_mul(p1: dict, p2: dict) -> dict:
    out: dict = {}
    for e1, c1 in p1.items():
        for e2, c2 in p2.items():
            key = tuple(a + b for a, b in zip(e1, e2))
            out[key] = out.get(key, 0j) + c1 * c2
    return out


def _substitute_affine(poly: dict, a: np.ndarray, b: np.ndarray) -> dict:
    """Rewrite a numeric polynomial in evolved variables as one in initial
    variables, given evolved = a @ initial + b."""
    n = a.shape[1]
    unit = {(0,) * n: 1.0 + 0j}
    affine = []
    for row in range(a.shape[0]):
        lin = {}
        for col in range(n):
            if a[row, col] != 0:
                key = tuple(1 if j == col else 0 for j in range(n))
                lin[key] = complex(a[row, col])
        if b[row] != 0:
            lin[(0,) * n] = lin.get((0,) * n, 0j) + complex(b[row])
        if not lin:
            lin = {(0,) * n: 0j}
        affine.append(lin)
    powers: dict = {}

    def affine_power(j: int, k: int) -> dict:
        got = powers.get((j, k))
        if got is None:
            got = unit if k == 0 else _poly_mul(affine_power(j, k - 1), affine[j])
            powers[(j, k)] = got
        return got

    out: dict = {}
    for exps, coeff in poly.items():
        piece = {(0,) * n: coeff}
        for j, k in enumerate(exps):
            if k:
                piece = _poly_mul(piece, affine_power(j, k))
        for key, c in piece.items():
            out[key] = out.get(key, 0j) + c
    return out


def _poly_expectation(poly: dict, mean: np.ndarray, cov: np.ndarray) -> complex:
    memo: dict = {}
    return sum(c * _moment(k, mean, cov, memo) for k, c in poly.items())


def expectation(
    obs: Expression,
    traj: Trajectory,
    state: GaussianState,
    t: float,
    hbar: float = 1.0,
) -> complex:
    """Expectation of an observable at a grid time: the evolved observable is
    expanded as a polynomial in the initial variables and paired with the
    Gaussian moments (exact in the moments, floating-point arithmetic)."""
    k = traj.index_of(t)
    if traj.symbolic is not None:
        evolved = obs.subs(traj.symbolic[k])
        poly = _numeric_poly(evolved, traj.variables, hbar)
    else:
        poly = _numeric_poly(obs, traj.variables, hbar)
        a, b = traj.maps[k][:, :-1], traj.maps[k][:, -1]
        poly = _substitute_affine(poly, a, b)
    mean = state.full_mean(traj.variables)
    cov = state.full_cov(traj.variables)
    return complex(_poly_expectation(poly, mean, cov))


# -- audits -------------------------------------------------------------------


def symplectic_form(variables: Sequence[VariableId], sector: Sector | None = None):
    """Canonical bracket table {[z_i, z_j]} restricted to a sector (or both)."""
    n = len(variables)
    j = np.zeros((n, n))
    index = {v: k for k, v in enumerate(variables)}
    for v in variables:
        if sector is not None and v.sector != sector:
            continue
        if v.kind is not Kind.POSITION:
            continue
        partner = v.conjugate_partner()
        if partner in index:
            j[index[v], index[partner]] = 1.0
            j[index[partner], index[v]] = -1.0
    return j


@dataclass
class AuditReport:
    """Deviation of evolved-pair brackets from their initial bracket table."""

    t: float
    hybrid: float
    poisson_only: float
    moyal_only: float

    @property
    def max_abs_dev(self) -> float:
        return self.hybrid


def canonical_audit(
    traj: Trajectory, sys: HybridSystem, t: float, hbar: float = 1.0
) -> AuditReport:
    """Brackets of evolved canonical pairs, against the canonical table.

    The full hybrid bracket should stay canonical; the Poisson-only and
    Moyal-only brackets of evolved variables may drift once the sectors
    couple, which is the backreaction signature on pure-sector structure.
    """
    variables = traj.variables
    j_full = symplectic_form(variables)
    j_c = symplectic_form(variables, Sector.C)
    j_q = symplectic_form(variables, Sector.Q)
    k = traj.index_of(t)
    if traj.symbolic is None:
        a = traj.maps[k][:, :-1]
        devs = []
        for j_sector in (j_full, j_c, j_q):
            bracket_now = a @ j_sector @ a.T
            devs.append(float(np.max(np.abs(bracket_now - j_sector))))
        return AuditReport(float(t), *devs)

    evolved = traj.symbolic[k]
    devs = []
    for j_sector, op in (
        (j_full, lambda x, y: hybrid_bracket(x, y, sys.spec)),
        (j_c, lambda x, y: poisson(x, y, Sector.C)),
        (j_q, lambda x, y: quantum_bracket(x, y, sys.spec)),
    ):
        worst = 0.0
        for r, vr in enumerate(variables):
            for c, vc in enumerate(variables):
                if c <= r:
                    continue
                b = op(evolved[vr], evolved[vc]) - Expression.constant(
                    Coefficient(Fraction(j_sector[r, c]).limit_denominator())
                )
                worst = max(worst, _coefficient_norm(b, hbar))
        devs.append(worst)
    return AuditReport(float(t), *devs)


def _coefficient_norm(e: Expression, hbar: float) -> float:
    return sum(
        abs(c.to_complex()) * (hbar ** h) for (_m, h), c in e.terms.items()
    )


def conserved_product_check(
    sys: HybridSystem,
    v_q: Expression,
    v_c: Expression,
    traj: Trajectory,
    state: GaussianState,
    hbar: float = 1.0,
    tol: float = 1e-8,
) -> dict:
    """Verify that the product of a conserved pure quantum and a conserved
    pure classical variable stays conserved in expectation.

    Both factors must have an exactly vanishing bracket with the Hamiltonian
    (:class:`NotConserved` otherwise); the product series is then audited
    along the trajectory.
    """
    for label, factor in (("v_q", v_q), ("v_c", v_c)):
        residual = hybrid_bracket(factor, sys.hamiltonian, sys.spec)
        if not residual.is_zero:
            raise NotConserved(f"{label} is not conserved: {{[{label}, H]}} = {residual}")
    product = v_q * v_c
    series = np.array(
        [expectation(product, traj, state, t, hbar).real for t in traj.times]
    )
    drift = float(np.max(np.abs(series - series[0])))
    return {
        "times": traj.times,
        "series": series,
        "max_drift": drift,
        "conserved": drift <= tol,
    }


def backreaction_report(
    sys: HybridSystem,
    state: GaussianState,
    t_grid: Sequence[float],
    method: str = "matrix_exponential",
    hbar: float = 1.0,
    **propagate_kwargs,
) -> dict:
    """Time series contrasting the coupled run with the uncoupled baseline.

    Tracks classical means and covariances for the full system and for the
    same system with the interaction removed, the three energy components,
    the bracket form of d<H_I>/dt, and the total-energy drift.
    """
    baseline_sys = HybridSystem(sys.h_q, sys.h_c, Expression.zero(), sys.spec)
    traj = propagate(sys, t_grid, method, **propagate_kwargs)
    base = propagate(baseline_sys, t_grid, method, **propagate_kwargs)

    from .expr import pC, qC

    def series(obs: Expression, trajectory: Trajectory) -> np.ndarray:
        return np.array(
            [expectation(obs, trajectory, state, t, hbar).real for t in trajectory.times]
        )

    q_c, p_c = qC(), pC()
    mean_q_c, mean_p_c = series(q_c, traj), series(p_c, traj)
    out = {
        "times": traj.times,
        "mean_qC": mean_q_c,
        "mean_pC": mean_p_c,
        "var_qC": series(q_c * q_c, traj) - mean_q_c ** 2,
        "var_pC": series(p_c * p_c, traj) - mean_p_c ** 2,
        "cov_qCpC": series(q_c * p_c, traj) - mean_q_c * mean_p_c,
        "energy_q": series(sys.h_q, traj),
        "energy_c": series(sys.h_c, traj),
        "energy_i": series(sys.h_i, traj),
        "energy_total": series(sys.hamiltonian, traj),
    }
    base_mean_q, base_mean_p = series(q_c, base), series(p_c, base)
    out["baseline_mean_qC"] = base_mean_q
    out["baseline_mean_pC"] = base_mean_p
    out["baseline_var_qC"] = series(q_c * q_c, base) - base_mean_q ** 2
    out["baseline_var_pC"] = series(p_c * p_c, base) - base_mean_p ** 2

    # d<H_I>/dt along the flow: the hybrid bracket reduces to the quantum
    # and classical pieces because H_I is the only hybrid variable involved.
    hi_dot = quantum_bracket(sys.h_i, sys.h_q, sys.spec) + poisson(
        sys.h_i, sys.h_c, Sector.C
    )
    bracket_series = series(hi_dot, traj)
    out["dHI_dt_bracket"] = bracket_series
    out["dHI_dt_fd"] = np.gradient(out["energy_i"], traj.times)
    out["energy_drift"] = float(
        np.max(np.abs(out["energy_total"] - out["energy_total"][0]))
    )
    return out
