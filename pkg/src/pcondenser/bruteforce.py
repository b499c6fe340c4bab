"""Exhaustive value-grid minimization of the p-energy on very small graphs.

Independent of the Newton solver: the free values are searched on a tensor
grid, and the box is zoomed around the best grid point until its width drops
below ``width_tol``. Convexity makes the zoom safe as long as the box keeps
a margin of a few grid cells around the minimizer.
"""

import numpy as np

from .errors import RejectionError

MAX_FREE = 6


def grid_minimize(graph, fixed, lo=0.0, hi=1.0, points=7, width_tol=1e-5,
                  chunk=200_000):
    """Minimize sum_e c_e |du|^p over free nodes (NaN in fixed) by grid zoom.

    Returns (u, energy).
    """
    fixed = np.asarray(fixed, dtype=float)
    free = np.flatnonzero(np.isnan(fixed))
    if free.size > MAX_FREE:
        raise RejectionError(f"brute force is limited to {MAX_FREE} free nodes")
    base = np.where(np.isnan(fixed), 0.0, fixed)
    edges, c, p = graph.edges, graph.conductance, graph.p
    if free.size == 0:
        return base, float(np.sum(c * np.abs(base[edges[:, 1]] - base[edges[:, 0]]) ** p))
    k = free.size
    center = np.full(k, 0.5 * (lo + hi))
    half = np.full(k, 0.5 * (hi - lo))
    best = None
    while True:
        axes = [np.linspace(center[i] - half[i], center[i] + half[i], points) for i in range(k)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        best_val, best_x = np.inf, None
        for start in range(0, mesh.shape[0], chunk):
            block = mesh[start:start + chunk]
            U = np.tile(base, (block.shape[0], 1))
            U[:, free] = block
            E = (np.abs(U[:, edges[:, 1]] - U[:, edges[:, 0]]) ** p) @ c
            j = int(np.argmin(E))
            if E[j] < best_val:
                best_val, best_x = float(E[j]), block[j]
        best = (best_x, best_val)
        if np.all(2 * half < width_tol):
            break
        center = best_x
        # keep two grid cells on each side of the best point
        half = half * 4.0 / (points - 1)
    u = base.copy()
    u[free] = best[0]
    return u, best[1]


def brute_condenser_capacity(graph, E, omega, **kw):
    """cap(E, Omega) on a tiny graph by value-grid search over [0, 1]."""
    n = graph.node_count
    fixed = np.full(n, np.nan)
    inside = np.zeros(n, dtype=bool)
    inside[np.asarray(omega, dtype=np.int64)] = True
    fixed[~inside] = 0.0
    fixed[np.asarray(E, dtype=np.int64)] = 1.0
    return grid_minimize(graph, fixed, **kw)[1]
