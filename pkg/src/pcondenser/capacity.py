"""
Capacities
==========

Sobolev capacity, condenser capacity (with the exhaustion limit for unbounded
E), the naive one-step variant, the D^p variant, axiom checkers and the
nested-annuli construction on which the exhaustion limit fails.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize

from .errors import RejectionError
from .model_space import as_node_set, ball_set, complement, set_to_mask
from .solver import minimize_penergy, p_energy
from . import oracles

ZERO_SNAP = 1e-14
DIVERGENCE_RATIO = 1e6


@dataclass(frozen=True, eq=False)
class CondenserProblem:
    """Pair (E, Omega) of node sets in an ambient graph.

    e_unbounded marks E as standing in for an unbounded set; its capacity is
    then the limit of cap(E cap B_j, Omega) along an exhaustion schedule.
    """

    graph: object
    E: np.ndarray
    omega: np.ndarray
    e_unbounded: bool = False

    def __post_init__(self):
        E = as_node_set(self.E, self.graph)
        omega = as_node_set(self.omega, self.graph)
        if np.setdiff1d(E, omega, assume_unique=True).size:
            raise RejectionError("E must be a subset of Omega (conflicting pins)")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "omega", omega)

    @property
    def p(self):
        return self.graph.p


@dataclass
class CapacityReport:
    value: float
    potential: np.ndarray
    stage_values: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    converged: bool = True
    stopping_reason: str = "single_solve"
    extrapolated: float = None

    @property
    def infinite(self):
        return math.isinf(self.value)

    def record(self):
        rec = {
            "cap": self.value,
            "converged": self.converged,
            "stopping_reason": self.stopping_reason,
            "stages": len(self.stage_values),
        }
        if self.extrapolated is not None:
            rec["cap_extrapolated"] = self.extrapolated
        return rec


def _snap(value):
    return 0.0 if value < ZERO_SNAP else value


def condenser_solve(graph, E, omega, config=None, x0=None):
    """One solve: u = 1 on E, u = 0 off Omega, p-harmonic in Omega minus E.

    Returns (capacity, potential). Equivalent to the obstacle problem with
    obstacle 1_E, since truncation at 1 never increases the energy.
    """
    E = as_node_set(E, graph)
    omega = as_node_set(omega, graph)
    n = graph.node_count
    if E.size == 0:
        return 0.0, np.zeros(n)
    emask = set_to_mask(E, n)
    omask = set_to_mask(omega, n)
    if np.any(emask & ~omask):
        raise RejectionError("node pinned to 1 (in E) and to 0 (outside Omega)")
    fixed = np.full(n, np.nan)
    fixed[~omask] = 0.0
    fixed[emask] = 1.0
    u, _ = minimize_penergy(graph, fixed, config=config, x0=x0)
    u = np.clip(u, 0.0, 1.0)
    return _snap(p_energy(graph, u)), u


def sobolev_capacity(graph, E, config=None, return_potential=False):
    """min sum_i m_i |u_i|^p + p-energy over fields with u >= 1 on E."""
    E = as_node_set(E, graph)
    if E.size == 0:
        raise RejectionError("E must be nonempty")
    fixed = np.full(graph.node_count, np.nan)
    fixed[E] = 1.0
    u, _ = minimize_penergy(graph, fixed, mass=graph.node_measure, config=config)
    u = np.clip(u, 0.0, 1.0)
    value = float(np.dot(graph.node_measure, np.abs(u) ** graph.p)) + p_energy(graph, u)
    return (value, u) if return_potential else value


def fit_power_tail(radii, values):
    """Fit values ~ c_inf + A r^{-beta} (beta > 0) on the last four stages.

    Returns (c_inf, A, beta) or None when there are too few stages or the fit
    does not describe a convergent tail.
    """
    r = np.asarray(radii, dtype=float)[-4:]
    v = np.asarray(values, dtype=float)[-4:]
    if r.size < 3 or not np.all(np.isfinite(r)) or not np.all(np.isfinite(v)):
        return None
    if np.ptp(v) <= 1e-15 * max(1.0, abs(v[-1])):
        return float(v[-1]), 0.0, 1.0
    q = r[1:] / r[:-1]
    if np.allclose(q, q[0], rtol=1e-12) and q[0] > 1:
        # geometric radii: the last three stages determine the tail exactly
        d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
        t = d2 / d1 if d1 != 0 else math.nan
        if 0 < t < 1:
            beta = math.log(1.0 / t) / math.log(q[0])
            c_inf = v[-1] + d2 * t / (1.0 - t)
            return float(c_inf), float((v[-1] - c_inf) * r[-1] ** beta), float(beta)

    def resid(beta):
        X = np.stack([np.ones_like(r), r ** (-beta)], axis=1)
        coef, *_ = np.linalg.lstsq(X, v, rcond=None)
        return X @ coef - v, coef

    betas = np.linspace(0.02, 6.0, 300)
    errs = [np.sum(resid(b)[0] ** 2) for b in betas]
    b0 = betas[int(np.argmin(errs))]
    lo, hi = max(1e-3, b0 - 0.02), b0 + 0.02
    sol = optimize.minimize_scalar(lambda b: np.sum(resid(b)[0] ** 2),
                                   bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    beta = float(sol.x)
    _, (c_inf, A) = resid(beta)
    return float(c_inf), float(A), beta


def extrapolate_fields(radii, fields, fallback, inside=None):
    """Nodewise geometric-tail extrapolation from the last three stage fields.

    With geometric radii and stage values u_j = u + A r_j^{-beta}, the three
    point formula recovers u exactly. Only nodes flagged by inside (those
    free in all three stages) are extrapolated; nodes whose increments are
    not a contracting geometric sequence keep the last stage value.
    """
    if len(fields) < 3:
        return fallback.copy(), False
    r = np.asarray(radii[-3:], dtype=float)
    q = r[1:] / r[:-1]
    if not (np.isfinite(r).all() and np.allclose(q, q[0], rtol=1e-12) and q[0] > 1):
        return fallback.copy(), False
    u1, u2, u3 = fields[-3:]
    d1 = u2 - u1
    d2 = u3 - u2
    out = fallback.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        t = d2 / d1
    ok = (np.abs(d1) > 1e-13) & (t > 0) & (t < 1)
    if inside is not None:
        ok &= inside
    out[ok] = u3[ok] + d2[ok] * t[ok] / (1 - t[ok])
    return out, True


def is_diverging(radii, values, ratio=DIVERGENCE_RATIO):
    """Divergence test for stage sequences that should have a finite limit.

    Diverging when the last value exceeds ratio times the first positive one,
    or when the last four stages grow at least like r^{1/2} with
    non-shrinking relative increments.
    """
    v = np.asarray(values, dtype=float)
    r = np.asarray(radii, dtype=float)
    pos = v[v > 0]
    if pos.size and v[-1] > ratio * pos[0]:
        return True
    if v.size < 4 or np.any(v[-4:] <= 0) or not np.all(np.isfinite(r[-4:])):
        return False
    tail, rt = v[-4:], r[-4:]
    if not np.all(np.diff(tail) > 0):
        return False
    slope = np.polyfit(np.log(rt), np.log(tail), 1)[0]
    rel = np.diff(tail) / tail[:-1]
    return bool(slope >= 0.5 and rel[-1] >= 0.5 * rel[0])


def _stop_rule(values, tol):
    if len(values) < 3:
        return False
    a, b, c = values[-3:]
    return (abs(a - b) < tol * max(b, 1e-12)) and (abs(b - c) < tol * max(c, 1e-12))


def condenser_capacity(problem, schedule=None, config=None):
    """cap_p(E, Omega) as a CapacityReport.

    Bounded E (or no schedule): a single solve on the whole of Omega. Unbounded
    E: stage j solves cap(E cap B_{r_j}, Omega), warm-started, until the
    stopping rule, divergence, or the end of the schedule.
    """
    graph = problem.graph
    if not problem.e_unbounded or schedule is None:
        value, u = condenser_solve(graph, problem.E, problem.omega, config)
        return CapacityReport(value, u, [value], [math.inf])

    values, radii = [], []
    u = None
    reason, converged = "schedule_exhausted", False
    for r, ball in schedule.balls(graph):
        Ej = np.intersect1d(problem.E, ball, assume_unique=True)
        value, u = condenser_solve(graph, Ej, problem.omega, config, x0=u)
        values.append(value)
        radii.append(r)
        if is_diverging(radii, values):
            return CapacityReport(math.inf, u, values, radii, True, "diverged")
        if _stop_rule(values, schedule.stop_tolerance):
            reason, converged = "converged", True
            break
    tail = fit_power_tail(radii, values)
    report = CapacityReport(values[-1], u, values, radii, converged, reason)
    if tail is not None:
        report.extrapolated = tail[0]
    return report


def condenser_capacity_naive(problem, schedule=None, config=None):
    """One-step capacity: infimum over admissible u in N^{1,p}(X), no E cap B_j limit.

    For bounded E this coincides with condenser_capacity. For E flagged
    unbounded, admissibility itself is the issue, so the stage surrogate is the
    minimal Sobolev norm sum m|u|^p + energy of a field with u = 1 on
    E cap B_{r_j} and u = 0 off Omega; if that diverges no admissible function
    exists and +inf is returned.
    """
    if not problem.e_unbounded or schedule is None:
        return condenser_solve(problem.graph, problem.E, problem.omega, config)[0]
    graph = problem.graph
    n = graph.node_count
    omask = set_to_mask(problem.omega, n)
    norms, energies, radii = [], [], []
    u = None
    for r, ball in schedule.balls(graph):
        Ej = np.intersect1d(problem.E, ball, assume_unique=True)
        if Ej.size == 0:
            norms.append(0.0)
            energies.append(0.0)
            radii.append(r)
            continue
        fixed = np.full(n, np.nan)
        fixed[~omask] = 0.0
        fixed[Ej] = 1.0
        u, _ = minimize_penergy(graph, fixed, mass=graph.node_measure, config=config, x0=u)
        u = np.clip(u, 0.0, 1.0)
        energy = p_energy(graph, u)
        norms.append(float(np.dot(graph.node_measure, u ** graph.p)) + energy)
        energies.append(_snap(condenser_solve(graph, Ej, problem.omega, config)[0]))
        radii.append(r)
        if is_diverging(radii, norms):
            return math.inf
    return energies[-1]


def cap_Dp(graph, E, F, config=None, return_potential=False):
    """min p-energy over fields with u = 1 on E and u = 0 on F, free elsewhere."""
    E = as_node_set(E, graph)
    F = as_node_set(F, graph)
    if np.intersect1d(E, F).size:
        raise RejectionError("E and F must be disjoint")
    n = graph.node_count
    if E.size == 0 or F.size == 0:
        u = np.ones(n) if E.size else np.zeros(n)
        return (0.0, u) if return_potential else 0.0
    fixed = np.full(n, np.nan)
    fixed[F] = 0.0
    fixed[E] = 1.0
    u, _ = minimize_penergy(graph, fixed, config=config)
    value = _snap(p_energy(graph, u))
    return (value, u) if return_potential else value


# -- property checkers --------------------------------------------------------

@dataclass
class AxiomReport:
    samples: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def check_capacity_axioms(graph, sampler, config=None, tol=1e-7):
    """Monotonicity, strong and finite subadditivity on sampled triples.

    sampler yields (E1, E2, Omega) with E1, E2 subsets of Omega. The enlarged
    set Omega' used for monotonicity is Omega plus the lowest-index node
    outside it (Omega itself when Omega is everything).
    """
    report = AxiomReport()
    n = graph.node_count

    def cap(E, O):
        return condenser_solve(graph, E, O, config)[0]

    for E1, E2, omega in sampler:
        E1 = as_node_set(E1, graph)
        E2 = as_node_set(E2, graph)
        omega = as_node_set(omega, graph)
        outside = complement(omega, n)
        omega2 = np.union1d(omega, outside[:1])
        union = np.union1d(E1, E2)
        inter = np.intersect1d(E1, E2)
        c1, c2 = cap(E1, omega), cap(E2, omega)
        cu, ci = cap(union, omega), cap(inter, omega)
        witness = (E1, E2, omega)
        checks = [
            ("monotone_E", cap(inter, omega2), c1),
            ("monotone_E", c1, cu),
            ("monotone_omega", cap(E1, omega2), c1),
            ("strong_subadditivity", cu + ci, c1 + c2),
            ("finite_subadditivity", cu, c1 + c2),
        ]
        for name, lhs, rhs in checks:
            if lhs > rhs + tol:
                report.violations.append((name, witness, lhs, rhs))
        report.samples += 1
    return report


@dataclass
class ExhaustionReport:
    stage_values: list
    target: float
    monotone: bool
    matches: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return self.monotone and self.matches


def check_exhaustion_limit(problem, omega_stages, config=None, tol=1e-7, rel_tol=None):
    """cap(E, Omega_k) along increasing Omega_k: nonincreasing, ending at cap(E, Omega)."""
    graph = problem.graph
    values = []
    u = None
    for k, Ok in enumerate(omega_stages):
        Ok = as_node_set(Ok, graph)
        if np.setdiff1d(problem.E, Ok).size:
            raise RejectionError(f"E is not inside exhaustion stage {k}")
        value, u = condenser_solve(graph, problem.E, Ok, config)
        values.append(value)
    target = condenser_solve(graph, problem.E, problem.omega, config)[0]
    violations = [(k, a, b) for k, (a, b) in enumerate(zip(values, values[1:])) if b > a + tol]
    bound = tol if rel_tol is None else rel_tol * max(target, 1e-300)
    matches = abs(values[-1] - target) <= bound
    return ExhaustionReport(values, target, not violations, matches, violations)


# -- nested annuli ------------------------------------------------------------

@dataclass
class WarningRing:
    """Radii for which cap(E_j, Omega_j) = c_j while cap(E, Omega) = c_0."""

    n: int
    p: float
    c0: float
    targets: list
    s1: float
    rings: list

    def stage_capacities(self):
        outer = oracles.radial_condenser_capacity(self.n, self.p, self.s1, 1.0)
        return [oracles.radial_condenser_capacity(self.n, self.p, r, s) + outer
                for r, s in self.rings]

    def limit_capacity(self):
        return oracles.radial_condenser_capacity(self.n, self.p, self.s1, 1.0)


def _solve_inner_radius(n, p, s, target):
    """r in (0, s) with cap(B_r, B_s) = target."""
    f = lambda r: oracles.radial_condenser_capacity(n, p, r, s) - target
    lo = s * 1e-300 ** (1.0 / max(n, 2))
    hi = s * (1 - 1e-15)
    if f(lo) >= 0:
        raise RejectionError(f"target {target} below attainable range (0, inf) near r -> 0")
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _solve_outer_radius(n, p, r, s_max, target):
    """s in (r, s_max) with cap(B_r, B_s) = target."""
    f = lambda s: oracles.radial_condenser_capacity(n, p, r, s) - target
    lo = r * (1 + 1e-14)
    if f(s_max) >= 0:
        raise RejectionError("target not attainable below s_max")
    return optimize.brentq(f, lo, s_max, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def build_warning_ring(c_seq, c0, n, p):
    """Nested annuli whose condenser capacities follow c_seq but whose union has c0.

    c_seq[j-1] is the target c_j for j = 1, 2, ...; each radius solves the
    radial closed form by bracketed root finding.
    """
    if not 1 < p <= n:
        raise RejectionError("requires 1 < p <= n")
    if not c0 > 0:
        raise RejectionError("c0 must be positive")
    c_seq = [float(c) for c in c_seq]
    if not c_seq or any(c <= c0 for c in c_seq):
        raise RejectionError(f"every c_j must exceed c0 = {c0}")
    # cap(B_s, B_1) = c0 -> s1; cap is decreasing in the inner radius's distance
    s1 = _solve_inner_radius(n, p, 1.0, c0)
    rings = []
    r1 = _solve_inner_radius(n, p, s1, c_seq[0] - c0)
    rings.append((r1, s1))
    r_prev, s_prev = r1, s1
    for j, cj in enumerate(c_seq[1:], start=2):
        target = cj - c0
        r = 0.5 * min(r_prev, 2.0 ** (-j))
        while oracles.radial_condenser_capacity(n, p, r, s_prev) >= target:
            r *= 0.5
            if r < 1e-250:
                raise RejectionError(f"cannot bracket stage {j}: target {target} too small")
        s = _solve_outer_radius(n, p, r, s_prev, target)
        rings.append((r, s))
        r_prev, s_prev = r, s
    return WarningRing(n, p, c0, c_seq, s1, rings)
