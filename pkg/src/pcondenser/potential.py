"""
Capacitary potentials and Green functions
=========================================

Potentials are built as increasing limits over exhaustion stages
(Omega cap B_j, E cap B_j). Superlevel sets of a potential carry the
capacity identities cap(Omega^b, Omega_a) = (b - a)^{1-p} cap(E, Omega);
singular functions are scaled node potentials, and Green functions are the
singular functions normalized so that cap({u >= b}, Omega) = b^{1-p}.
"""

from dataclasses import dataclass, field
from dataclasses import field as _field
import math
from typing import ClassVar

import numpy as np

from .capacity import (ZERO_SNAP, CondenserProblem, condenser_solve, extrapolate_fields,
                       fit_power_tail)
from .errors import ConsistencyError, RejectionError
from .model_space import as_node_set, mask_to_set, set_to_mask
from .solver import p_energy

MONOTONE_TOL = 1e-9
NONEXISTENCE_SNAP = 1e-10


@dataclass
class Potential:
    field: np.ndarray
    problem: CondenserProblem
    energy: float
    stage_history: list = field(default_factory=list)
    stage_energies: list = field(default_factory=list)

    @property
    def graph(self):
        return self.problem.graph


def capacitary_potential(problem, schedule=None, config=None, keep_history=True):
    """pot_Omega^E as the nodewise increasing limit over exhaustion stages.

    Stage j pins u = 1 on E cap B_{r_j} and u = 0 off Omega cap B_{r_j}.
    Raises ConsistencyError if a stage decreases anywhere by more than 1e-9.
    """
    graph = problem.graph
    if schedule is None:
        stages = [(problem.E, problem.omega)]
    else:
        stages = []
        for _, ball in schedule.balls(graph):
            stages.append((np.intersect1d(problem.E, ball, assume_unique=True),
                           np.intersect1d(problem.omega, ball, assume_unique=True)))
    history, energies = [], []
    u_prev = None
    for Ej, Oj in stages:
        value, u = condenser_solve(graph, Ej, Oj, config, x0=u_prev)
        if u_prev is not None:
            drop = float((u_prev - u).max())
            if drop > MONOTONE_TOL:
                raise ConsistencyError(
                    f"potential stage decreased by {drop:.3e} at some node")
        if keep_history:
            history.append(u)
        energies.append(value)
        u_prev = u
    return Potential(u_prev, problem, energies[-1], history, energies)


def superlevel(field_values, omega, a, strict, atol=0.0):
    """{u > a} (strict) or {u >= a} within omega; atol widens the comparison."""
    u = np.asarray(field_values, dtype=float)
    mask = set_to_mask(omega, u.size)
    if strict:
        mask &= u > a + atol
    else:
        mask &= u >= a - atol
    return mask_to_set(mask)


def straddling_edges(graph, u, level, atol=0.0):
    """Number of edges jumping strictly across level (one end below, one above).

    Discrete level identities are exact only when this is zero.
    """
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    lo = np.minimum(u[i], u[j])
    hi = np.maximum(u[i], u[j])
    return int(np.count_nonzero((lo < level - atol) & (hi > level + atol)))


@dataclass
class LevelReport:
    a: float
    b: float
    ratio: float
    level_capacity: float
    capacity: float
    truncation_residual: float
    exact: bool


def verify_level_identity(potential, a, b, config=None, level_tol=1e-9):
    """rho = cap(Omega^b, Omega_a) (b - a)^{p-1} / cap(E, Omega), expected 1.

    Stored values are only accurate to the solver tolerance, so level
    comparisons use level_tol. exact is True when no edge straddles a or b,
    the case where the truncation argument holds node for node.
    """
    if not 0 <= a < b <= 1:
        raise RejectionError("need 0 <= a < b <= 1")
    graph = potential.graph
    p = graph.p
    u = potential.field
    omega = potential.problem.omega
    upper = superlevel(u, omega, b, strict=False, atol=level_tol)
    if upper.size == 0:
        raise RejectionError(f"superlevel set {{u >= {b}}} is empty")
    omega_a = superlevel(u, omega, a, strict=True, atol=level_tol)
    level_cap, w = condenser_solve(graph, upper, omega_a, config)
    cap = potential.energy
    ratio = level_cap * (b - a) ** (p - 1) / cap if cap > 0 else math.nan
    clamp = np.clip((u - a) / (b - a), 0.0, 1.0)
    residual = float(np.abs(w - clamp).max())
    exact = (straddling_edges(graph, u, b, level_tol) == 0
             and straddling_edges(graph, u, a, level_tol) == 0)
    return LevelReport(a, b, ratio, level_cap, cap, residual, exact)


# -- Green functions ----------------------------------------------------------

@dataclass
class GreenFunction:
    """Singular (alpha = None) or normalized Green function on a graph.

    field is the best estimate of the exhaustion limit; stage_field and
    stage_omega are the last stage solve and its domain, on which the
    discrete level identities hold exactly.
    """

    graph: object = _field(repr=False)
    omega: np.ndarray = _field(repr=False)
    x0: int = 0
    field: np.ndarray = _field(default=None, repr=False)
    peak: float = math.nan
    alpha: float = None
    stage_peaks: list = _field(default_factory=list)
    stage_capacities: list = _field(default_factory=list)
    level_audit: list = _field(default_factory=list)
    stage_field: np.ndarray = _field(default=None, repr=False)
    stage_omega: np.ndarray = _field(default=None, repr=False)
    radii: list = _field(default_factory=list)
    extrapolated: bool = False

    exists: ClassVar[bool] = True

    def __post_init__(self):
        if self.stage_field is None:
            self.stage_field = self.field
        if self.stage_omega is None:
            self.stage_omega = self.omega

    @property
    def p(self):
        return self.graph.p

    @property
    def normalized(self):
        return self.alpha is not None

    def record(self):
        return {"x0": self.x0, "u_x0": self.peak,
                "alpha": self.alpha if self.alpha is not None else math.nan,
                "p": self.p, "stages": len(self.stage_capacities),
                "extrapolated": self.extrapolated}


@dataclass
class NoSingularFunction:
    """Existence fails: cap({x0}, Omega) vanishes in the exhaustion limit."""

    x0: int
    stage_capacities: list
    limit: float
    reason: str = "cap({x0}, Omega) -> 0: X parabolic and C_p(X \\ Omega) = 0"

    exists: ClassVar[bool] = False

    def record(self):
        return {"x0": self.x0, "exists": False, "cap_limit": self.limit,
                "stages": len(self.stage_capacities)}


def singular_function(graph, omega, x0, schedule=None, config=None, extrapolate=True):
    """Increasing limit of cap({x0}, Omega_j)^{1/(1-p)} pot_{Omega_j}^{x0}.

    Returns NoSingularFunction when the stage capacities tend to zero (limit
    below 1e-10, using the power-law tail when there are enough stages).
    With geometric radii the returned field is the nodewise extrapolated
    limit of the stages; the last stage is kept alongside.
    """
    omega = as_node_set(omega, graph)
    x0 = int(x0)
    if x0 not in set(omega.tolist()):
        raise RejectionError("x0 must lie in Omega")
    p = graph.p
    if schedule is None:
        stages = [(math.inf, omega)]
    else:
        stages = [(r, np.intersect1d(omega, ball, assume_unique=True))
                  for r, ball in schedule.balls(graph)]
    caps, peaks, radii, fields, stage_omegas = [], [], [], [], []
    stage_omega, u = None, None
    for r, Oj in stages:
        if x0 not in set(Oj.tolist()):
            continue
        cap, pot = condenser_solve(graph, [x0], Oj, config, x0=u)
        u = pot
        caps.append(cap)
        radii.append(r)
        if cap <= ZERO_SNAP:
            peaks.append(math.inf)
            break
        peak = cap ** (1.0 / (1.0 - p))
        peaks.append(peak)
        field = peak * pot
        if fields and float((fields[-1] - field).max()) > MONOTONE_TOL * max(1.0, peak):
            raise ConsistencyError("singular-function stages are not increasing")
        fields.append(field)
        stage_omegas.append(Oj)
        stage_omega = Oj
    if not caps:
        raise RejectionError("x0 is outside every exhaustion stage")
    limit = caps[-1]
    tail = fit_power_tail(radii, caps) if len(caps) >= 3 else None
    if tail is not None:
        limit = min(limit, max(tail[0], 0.0))
    if limit < NONEXISTENCE_SNAP or not fields or math.isinf(peaks[-1]):
        return NoSingularFunction(x0, caps, limit)
    last = fields[-1]
    estimate, did = last, False
    if extrapolate and len(fields) >= 3:
        inside = np.zeros(graph.node_count, dtype=bool)
        inside[stage_omegas[-3]] = True
        estimate, did = extrapolate_fields(radii[-len(fields):], fields, last, inside)
        estimate = np.maximum(estimate, last)
    return GreenFunction(graph, omega, x0, estimate, float(estimate[x0]), None, peaks, caps,
                         stage_field=last, stage_omega=stage_omega, radii=radii,
                         extrapolated=did)


def green_normalize(singular, config=None, audit_levels=8, level_tol=1e-12):
    """Rescale a singular function into the Green function.

    c = cap({v >= v(x0)}, Omega) v(x0)^{p-1} from a fresh solve on the last
    stage, alpha = c^{1/(1-p)}. The audit lists (b, cap({u >= b}, Omega),
    cap * b^{p-1}, exact) for b = u(x0) and a spread of attained node values.
    """
    graph, p = singular.graph, singular.p
    omega = singular.stage_omega
    v = singular.stage_field
    if not singular.peak > 0 or np.ptp(v) == 0:
        raise RejectionError("singular function is constant")
    peak = float(v[singular.x0])
    top = superlevel(v, omega, peak, strict=False, atol=level_tol * peak)
    cap_top = condenser_solve(graph, top, omega, config)[0]
    if cap_top <= 0:
        raise RejectionError("top superlevel set has zero capacity")
    c = cap_top * peak ** (p - 1)
    alpha = c ** (1.0 / (1.0 - p))
    u = alpha * v
    green = GreenFunction(graph, singular.omega, singular.x0, alpha * singular.field,
                          alpha * singular.peak, alpha,
                          [alpha * s for s in singular.stage_peaks],
                          list(singular.stage_capacities),
                          stage_field=u, stage_omega=omega, radii=list(singular.radii),
                          extrapolated=singular.extrapolated)
    top_value = alpha * peak
    levels = [top_value]
    attained = np.unique(u[omega])
    attained = attained[(attained > 0) & (attained < top_value * (1 - 1e-12))]
    if attained.size and audit_levels > 1:
        pick = np.unique(np.linspace(0, attained.size - 1,
                                     min(audit_levels - 1, attained.size)).astype(int))
        levels += [float(b) for b in attained[pick][::-1]]
    for b in levels:
        S = superlevel(u, omega, b, strict=False, atol=level_tol * max(b, 1.0))
        cap_b = condenser_solve(graph, S, omega, config)[0]
        exact = straddling_edges(graph, u, b, level_tol * max(b, 1.0)) == 0
        green.level_audit.append((b, cap_b, cap_b * b ** (p - 1), exact))
    return green


def green_energy_slab(green, a, b):
    """sum_e c_e |Delta clamp(u, a, b)|^p on the last stage, the energy of u in {a < u < b}."""
    if b <= a:
        raise RejectionError("need a < b")
    return p_energy(green.graph, np.clip(green.stage_field, a, b))
