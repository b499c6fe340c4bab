"""
Discrete p-energy minimization
==============================

Minimizes

    F(u) = sum_e c_e |u_j - u_i|^p  (+ sum_i m_i |u_i|^p when a mass term is on)

over fields with some nodes pinned and, optionally, a pointwise lower
obstacle. The non-smooth (p < 2) or degenerate (p > 2) integrand is replaced by
(t^2 + eps^2)^{p/2} and eps is driven down a fixed continuation schedule;
each stage runs damped projected Newton with Armijo backtracking.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import RejectionError, SolverError

_AMG_THRESHOLD = 5000
_WARM_START_LIMIT = 40000


@dataclass(frozen=True)
class SolverConfig:
    """Continuation schedule and stopping tolerances.

    gradient_tolerance is an absolute bound on the per-node residual for
    problems whose fluxes are O(1); larger flux scales loosen it
    proportionally with the largest per-node flux sum.
    """

    epsilons: tuple = tuple(10.0 ** -k for k in range(1, 14))
    gradient_tolerance: float = 1e-9
    energy_rel_tolerance: float = 1e-12
    max_iterations: int = 500

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise RejectionError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise RejectionError("epsilons must be strictly decreasing")
        if eps[-1] > 1e-12:
            raise RejectionError("final epsilon must be <= 1e-12")
        if not (self.gradient_tolerance > 0 and self.energy_rel_tolerance > 0):
            raise RejectionError("tolerances must be positive")
        if self.max_iterations < 1:
            raise RejectionError("max_iterations must be >= 1")
        object.__setattr__(self, "epsilons", eps)


DEFAULT_CONFIG = SolverConfig()


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0
    smoothed_residual: float = 0.0
    energy: float = 0.0
    trace: list = field(default_factory=list)


def p_energy(graph, u, p=None):
    """sum_e c_e |u_j - u_i|^p."""
    p = graph.p if p is None else p
    if graph.edge_count == 0:
        return 0.0
    du = np.abs(graph.differences(np.asarray(u, dtype=float)))
    return float(np.dot(graph.conductance, du**p))


def p_laplacian_residual(graph, u, p=None):
    """Per-node (D^T c |Du|^{p-2} Du), the un-smoothed energy gradient over p."""
    p = graph.p if p is None else p
    du = graph.differences(np.asarray(u, dtype=float))
    flux = graph.conductance * np.sign(du) * np.abs(du) ** (p - 1)
    return graph.incidence.T @ flux


def _phi(t, eps, p):
    return (t * t + eps * eps) ** (p / 2.0)


def _dphi(t, eps, p):
    return p * t * (t * t + eps * eps) ** (p / 2.0 - 1.0)


def _ddphi(t, eps, p):
    if p == 2.0:
        return np.full(np.shape(t), 2.0)
    s = t * t + eps * eps
    return p * s ** (p / 2.0 - 2.0) * ((p - 1.0) * t * t + eps * eps)


class _Problem:
    """Smoothed objective restricted to the free nodes."""

    def __init__(self, graph, free, base, mass):
        self.graph = graph
        self.p = graph.p
        self.free = free
        self.base = base
        D = graph.incidence
        self.Df = D[:, free].tocsc()
        self.offset = D @ base
        self.cond = graph.conductance
        self.mass = None if mass is None else np.asarray(mass, dtype=float)[free]

    def full(self, x):
        u = self.base.copy()
        u[self.free] = x
        return u

    def value(self, x, eps):
        du = self.Df @ x + self.offset
        f = float(np.dot(self.cond, _phi(du, eps, self.p)))
        if self.mass is not None:
            f += float(np.dot(self.mass, _phi(x, eps, self.p)))
        return f

    def gradient(self, x, eps):
        du = self.Df @ x + self.offset
        g = self.Df.T @ (self.cond * _dphi(du, eps, self.p))
        if self.mass is not None:
            g += self.mass * _dphi(x, eps, self.p)
        return g

    def hessian(self, x, eps):
        du = self.Df @ x + self.offset
        w = self.cond * _ddphi(du, eps, self.p)
        H = (self.Df.T @ sparse.diags(w) @ self.Df).tocsr()
        if self.mass is not None:
            H = H + sparse.diags(self.mass * _ddphi(x, eps, self.p))
        return H

    def flux_scale(self, x):
        """Largest per-node sum of |edge flux|, used to scale the residual test."""
        du = self.Df @ x + self.offset
        a = self.cond * np.abs(du) ** (self.p - 1)
        s = abs(self.Df.T) @ a
        if self.mass is not None:
            s = s + self.mass * np.abs(x) ** (self.p - 1)
        return float(s.max()) if s.size else 0.0

    def roundoff_floor(self, x):
        """Per-node residual level set by rounding in du (large conductances)."""
        if not hasattr(self, "_cond_sum"):
            self._cond_sum = abs(self.Df.T) @ self.cond
        xscale = max(1.0, float(np.abs(x).max(initial=0.0)),
                     float(np.abs(self.base).max(initial=0.0)))
        return 64 * np.finfo(float).eps * self._cond_sum * xscale ** (self.p - 1)


def _solve_linear(H, rhs):
    n = H.shape[0]
    diag = H.diagonal()
    # rows that vanish (flat regions when p > 2) get a tiny shift; a shift on
    # every row would act as a spurious mass term when conductances are large
    top = float(diag.max()) if n else 1.0
    diag = np.where(diag > 1e-14 * top, diag, diag + 1e-14 * top)
    H = H + sparse.diags(diag - H.diagonal())
    # symmetric Jacobi scaling: conductances may span many orders of magnitude
    s = 1.0 / np.sqrt(diag)
    S = sparse.diags(s)
    A = (S @ H @ S).tocsr()
    b = s * rhs
    # banded (path-like) systems stay with the direct solver at any size
    if n > _AMG_THRESHOLD and A.nnz > 3.5 * n:
        import pyamg
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
        return s * ml.solve(b, tol=1e-13, accel="cg", maxiter=400)
    return s * splinalg.spsolve(A.tocsc(), b)


def minimize_penergy(graph, fixed, lower=None, mass=None, x0=None, config=None,
                     trace=False):
    """Minimize the (optionally mass-augmented) p-energy.

    Parameters
    ----------
    graph : WeightedGraph
    fixed : (N,) array
        Pinned values; NaN marks a free node.
    lower : (N,) array, optional
        Obstacle; free nodes are constrained to u >= lower (-inf = none).
    mass : (N,) array, optional
        Adds sum_i mass_i |u_i|^p to the objective.
    x0 : (N,) array, optional
        Warm start (free entries are used, projected onto the obstacle).

    Returns
    -------
    u : (N,) array
    info : SolveInfo
    """
    config = DEFAULT_CONFIG if config is None else config
    fixed = np.asarray(fixed, dtype=float)
    n = graph.node_count
    if fixed.shape != (n,):
        raise RejectionError("fixed must have one entry per node")
    free = np.flatnonzero(np.isnan(fixed))
    base = np.where(np.isnan(fixed), 0.0, fixed)
    info = SolveInfo()
    lo = None
    if lower is not None:
        lo = np.asarray(lower, dtype=float)[free]
    if free.size == 0:
        info.energy = p_energy(graph, base)
        return base, info

    prob = _Problem(graph, free, base, mass)
    if x0 is not None:
        x = np.asarray(x0, dtype=float)[free].copy()
    else:
        x = _quadratic_start(graph, fixed, free, base, mass)
    if lo is not None:
        x = np.maximum(x, lo)

    p = graph.p
    eps_schedule = (0.0,) if p == 2.0 else config.epsilons
    total_iter = 0
    for k, eps in enumerate(eps_schedule):
        last = k == len(eps_schedule) - 1
        x, it, res = _newton_stage(prob, x, lo, eps, config, last, info if trace else None)
        total_iter += it
    info.iterations = total_iter
    u = prob.full(x)
    info.energy = p_energy(graph, u)
    info.smoothed_residual = res
    r = p_laplacian_residual(graph, u)[free]
    if mass is not None:
        r = r + np.asarray(mass)[free] * np.sign(x) * np.abs(x) ** (p - 1)
    if lo is not None:
        r = np.where((x <= lo) & (r > 0), 0.0, r)
    info.residual = float(np.abs(r).max()) * p
    return u, info


def _quadratic_start(graph, fixed, free, base, mass):
    """Harmonic (p = 2) extension of the pinned values; cheap and usually close."""
    D = graph.incidence
    Df = D[:, free]
    c = graph.conductance
    L = (Df.T @ sparse.diags(c) @ Df).tocsr()
    rhs = -(Df.T @ (c * (D @ base)))
    if mass is not None:
        L = L + sparse.diags(np.asarray(mass, dtype=float)[free])
    if free.size > _WARM_START_LIMIT and graph.p != 2.0:
        return np.zeros(free.size)
    return np.asarray(_solve_linear(L, rhs), dtype=float)


def _active_residual(prob, x, lo, eps):
    g = prob.gradient(x, eps)
    if lo is not None:
        active = (x <= lo) & (g > 0)
    else:
        active = np.zeros(x.size, dtype=bool)
    inactive = ~active
    excess = np.maximum(np.abs(g) - prob.roundoff_floor(x), 0.0)
    res = float(excess[inactive].max()) if inactive.any() else 0.0
    return g, inactive, res


def _newton_stage(prob, x, lo, eps, config, last, info, step_tol=1e-11):
    """Projected Newton at fixed eps.

    The final stage also requires the Newton step itself to be tiny: for p > 2
    the residual vanishes like |du|^{p-1}, so a small residual alone leaves
    field errors of order tol^{1/(p-1)}.
    """
    tol_abs = config.gradient_tolerance
    if not last:
        tol_abs = max(tol_abs, eps)
    f = prob.value(x, eps)
    g, inactive, res = _active_residual(prob, x, lo, eps)
    for it in range(1, config.max_iterations + 1):
        scale = max(1.0, prob.flux_scale(x))
        if info is not None:
            info.trace.append((len(info.trace), eps, f, res))
        small = res <= tol_abs * scale
        if small and not last:
            return x, it - 1, res
        H = prob.hessian(x, eps)
        d = np.zeros_like(x)
        idx = np.flatnonzero(inactive)
        if idx.size == x.size:
            d = -np.asarray(_solve_linear(H, g), dtype=float)
        else:
            d[idx] = -np.asarray(_solve_linear(H[idx][:, idx], g[idx]), dtype=float)
        if not np.all(np.isfinite(d)) or np.dot(g, d) >= 0:
            d = -g / np.maximum(H.diagonal(), 1e-300)
        xscale = max(1.0, float(np.abs(x).max()))
        if small:
            x_try = x + d if lo is None else np.maximum(x + d, lo)
            if np.abs(x_try - x).max() <= step_tol * xscale:
                return x, it - 1, res
        step, x_new, f_new = _line_search(prob, x, f, g, d, lo, eps)
        if step is None:
            # energy differences are below round-off: accept the full step
            # when it still shrinks the residual
            x_try = x + d if lo is None else np.maximum(x + d, lo)
            g_try, inact_try, r_try = _active_residual(prob, x_try, lo, eps)
            if r_try < 0.5 * res or (small and r_try <= tol_abs * scale):
                x, f = x_try, prob.value(x_try, eps)
                g, inactive, res = g_try, inact_try, r_try
                continue
            if small:
                return x, it - 1, res
            break
        x, f = x_new, f_new
        g, inactive, res = _active_residual(prob, x, lo, eps)
    scale = max(1.0, prob.flux_scale(x))
    if not last or res <= tol_abs * scale:
        return x, config.max_iterations, res
    raise SolverError(
        f"p-energy minimization did not converge (eps={eps:g}, residual={res:.3e})",
        field=prob.full(x), residual=res)


def _line_search(prob, x, f, g, d, lo, eps, c1=1e-4, max_halvings=50):
    step = 1.0
    for _ in range(max_halvings):
        x_new = x + step * d
        if lo is not None:
            x_new = np.maximum(x_new, lo)
        f_new = prob.value(x_new, eps)
        if f_new <= f + c1 * np.dot(g, x_new - x) and f_new < f:
            return step, x_new, f_new
        step *= 0.5
    return None, x, f


def solve_dirichlet(graph, fixed, config=None, x0=None):
    """p-harmonic extension of the pinned values (NaN entries are free)."""
    fixed = np.asarray(fixed, dtype=float)
    if np.all(np.isnan(fixed)):
        raise RejectionError("at least one node must be pinned")
    u, _ = minimize_penergy(graph, fixed, config=config, x0=x0)
    return u


def solve_obstacle(graph, obstacle, zero_set, config=None, x0=None):
    """Minimize the p-energy over u >= obstacle with u = 0 on zero_set."""
    obstacle = np.asarray(obstacle, dtype=float)
    zero_set = np.asarray(zero_set, dtype=np.int64)
    if zero_set.size == 0:
        raise RejectionError("zero_set must be nonempty")
    if np.any(obstacle > 1.0 + 1e-15):
        raise RejectionError("obstacle must be <= 1")
    if np.any(obstacle[zero_set] > 0):
        raise RejectionError("obstacle is positive on the zero set: infeasible")
    fixed = np.full(graph.node_count, np.nan)
    fixed[zero_set] = 0.0
    u, _ = minimize_penergy(graph, fixed, lower=obstacle, config=config, x0=x0)
    return u


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "epsilon", "energy", "residual"])
        for it, eps, energy, res in trace:
            w.writerow([it, f"{eps:.17g}", f"{energy:.17g}", f"{res:.17g}"])
