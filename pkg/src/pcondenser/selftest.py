"""
Property suite
==============

Randomized checks of the capacity axioms, potential-stage monotonicity, the
comparison and maximum principles, and, on graphs with at most eight nodes,
agreement with the brute-force value-grid minimizer. Used by the CLI
``selftest`` subcommand and by the test suite.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .bruteforce import MAX_FREE, brute_condenser_capacity
from .capacity import CondenserProblem, check_capacity_axioms, condenser_solve
from .errors import ConsistencyError
from .model_space import ExhaustionSchedule, random_connected_graph
from .potential import capacitary_potential
from .solver import solve_dirichlet

AXIOM_TOL = 1e-7
ORDER_TOL = 1e-8
BRUTE_TOL = 1e-4
P_VALUES = (1.5, 2.0, 3.0)


@dataclass
class SuiteReport:
    samples: int = 0
    counts: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def tick(self, name):
        self.counts[name] = self.counts.get(name, 0) + 1

    def fail(self, name, detail):
        self.violations.append((name, detail))

    @property
    def ok(self):
        return not self.violations

    def summary(self):
        rec = {"samples": self.samples, "violations": len(self.violations)}
        for name in sorted(self.counts):
            rec[f"checked_{name}"] = self.counts[name]
        return rec


def _random_instance(rng, p, min_nodes=5, max_nodes=12):
    n = int(rng.integers(min_nodes, max_nodes + 1))
    g = random_connected_graph(rng, n, p)
    size = int(rng.integers(2, n))
    omega = np.sort(rng.choice(n, size=size, replace=False))
    E1 = np.sort(rng.choice(omega, size=int(rng.integers(1, size)), replace=False))
    E2 = np.sort(rng.choice(omega, size=int(rng.integers(1, size)), replace=False))
    return g, omega, E1, E2


def check_sample(rng, p, report):
    g, omega, E1, E2 = _random_instance(rng, p)
    n = g.node_count

    axioms = check_capacity_axioms(g, [(E1, E2, omega)], tol=AXIOM_TOL)
    report.tick("axioms")
    for name, witness, lhs, rhs in axioms.violations:
        report.fail(name, {"p": p, "lhs": lhs, "rhs": rhs,
                           "witness": [w.tolist() for w in witness]})

    # exhaustion stages of the potential grow nodewise
    base = g.positions[E1[0]]
    schedule = ExhaustionSchedule(base, (0.35, 0.7, 1.05, 1.5))
    try:
        capacitary_potential(CondenserProblem(g, E1, omega), schedule)
        report.tick("potential_stages")
    except ConsistencyError as exc:
        report.fail("potential_stages", {"p": p, "error": str(exc)})

    # comparison and maximum principles for Dirichlet data on the complement
    outside = np.setdiff1d(np.arange(n), omega)
    f1 = np.full(n, np.nan)
    f1[outside] = rng.uniform(-1.0, 1.0, outside.size)
    f2 = f1.copy()
    f2[outside] += rng.uniform(0.0, 1.0, outside.size)
    u1 = solve_dirichlet(g, f1)
    u2 = solve_dirichlet(g, f2)
    report.tick("comparison")
    if np.any(u1 > u2 + ORDER_TOL):
        report.fail("comparison", {"p": p, "gap": float((u1 - u2).max())})
    report.tick("maximum_principle")
    lo, hi = np.nanmin(f1), np.nanmax(f1)
    if np.any(u1 < lo - ORDER_TOL) or np.any(u1 > hi + ORDER_TOL):
        report.fail("maximum_principle", {"p": p, "range": (lo, hi),
                                          "field": (float(u1.min()), float(u1.max()))})

    if n <= 8 and np.setdiff1d(omega, E1).size <= MAX_FREE:
        cap = condenser_solve(g, E1, omega)[0]
        brute = brute_condenser_capacity(g, E1, omega)
        report.tick("brute_force")
        if abs(cap - brute) > BRUTE_TOL * max(1.0, brute):
            report.fail("brute_force", {"p": p, "solver": cap, "brute": brute})
    report.samples += 1


def run_property_suite(samples=200, seed=0, p_values=P_VALUES):
    """Run the randomized property checks; samples cycle through p_values."""
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    for k in range(samples):
        check_sample(rng, p_values[k % len(p_values)], report)
    return report


def run_oracle_checks():
    """Small closed-form checks; returns a list of (name, ok, detail)."""
    from . import oracles
    from .capacity import build_warning_ring
    from .model_space import GridSpec, build_grid

    out = []
    for p in P_VALUES:
        g = build_grid(GridSpec.interval(-4, 4, 1 / 16, p))
        x = g.positions[:, 0]
        E = np.flatnonzero(np.abs(x) <= 1 + 1e-12)
        omega = np.flatnonzero(np.abs(x) < 3 - 1e-12)
        cap = condenser_solve(g, E, omega)[0]
        want = 2 * 2.0 ** (1 - p)
        out.append((f"interval_condenser_p{p:g}", abs(cap - want) <= 1e-8, cap - want))
    c = oracles.green_constant(3, 2.0)
    out.append(("rn_green_constant", bool(abs(c - 1 / (4 * math.pi)) <= 1e-15), float(c)))
    ring = build_warning_ring([2.0] * 5, 1.0, 3, 2.0)
    err = max(abs(a - b) for a, b in zip(ring.stage_capacities(), ring.targets))
    out.append(("warning_ring_targets", bool(err <= 1e-10), float(err)))
    verdict = oracles.classify_hyperbolicity(oracles.VolumeGrowthProfile.euclidean(3), 2.0)
    out.append(("classify_r3_p2", verdict.verdict == "hyperbolic", verdict.verdict))
    return out
