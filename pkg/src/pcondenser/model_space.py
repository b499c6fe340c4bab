"""
Model spaces
============

Finite weighted graphs standing in for a metric measure space (X, d, mu):
nodes carry mu-mass, edges carry p-dependent conductances, and the discrete
upper gradient of a field lives on the edges. Grids discretize weighted R^n,
radial graphs discretize radially symmetric weighted R^n through the
one-dimensional reduction, and exhaustion schedules emulate unbounded X by
nested balls.
"""

from dataclasses import dataclass, field
from functools import cached_property
import itertools
import math

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.special import gamma

from .errors import RejectionError


def sphere_area(n):
    """Surface measure of the unit sphere in R^n, 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Connected graph with node measures and edge conductances.

    Parameters
    ----------
    node_measure : (N,) array
        Strictly positive mu-mass of every node.
    edges : (M, 2) int array
        Unordered node pairs, no self-loops, no duplicates.
    conductance : (M,) array
        Strictly positive energy weight of each edge, so that the p-energy
        of a field u is sum_e c_e |u_i - u_j|^p.
    p : float
        Exponent the conductances were built for.
    positions : (N, d) array, optional
        Node coordinates, needed for balls and exhaustion.
    """

    node_measure: np.ndarray
    edges: np.ndarray
    conductance: np.ndarray
    p: float
    positions: np.ndarray = None
    spacing: float = None
    check_connected: bool = field(default=True, repr=False)

    def __post_init__(self):
        mu = np.ascontiguousarray(self.node_measure, dtype=float)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        cond = np.ascontiguousarray(self.conductance, dtype=float).reshape(-1)
        n = mu.size
        if n == 0:
            raise RejectionError("graph must have at least one node")
        if not self.p > 1:
            raise RejectionError(f"exponent p must exceed 1, got {self.p}")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise RejectionError("node measures must be finite and strictly positive")
        if cond.size != edges.shape[0]:
            raise RejectionError("one conductance per edge is required")
        if not np.all(np.isfinite(cond)) or np.any(cond <= 0):
            raise RejectionError("conductances must be finite and strictly positive")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise RejectionError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise RejectionError("self-loops are not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        if np.unique(lo * n + hi).size != lo.size:
            raise RejectionError("duplicate edges are not allowed")
        pos = self.positions
        if pos is not None:
            pos = np.asarray(pos, dtype=float)
            if pos.ndim == 1:
                pos = pos[:, None]
            if pos.shape[0] != n:
                raise RejectionError("one position per node is required")
        for name, value in (("node_measure", mu), ("edges", edges),
                            ("conductance", cond), ("positions", pos)):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.check_connected and n > 1:
            ncomp, _ = csgraph.connected_components(self.adjacency, directed=False)
            if ncomp != 1:
                raise RejectionError(f"graph must be connected, found {ncomp} components")

    def __repr__(self):
        return (f"WeightedGraph(nodes={self.node_count}, edges={self.edge_count}, "
                f"p={self.p:g})")

    @property
    def node_count(self):
        return self.node_measure.size

    @property
    def edge_count(self):
        return self.edges.shape[0]

    @cached_property
    def incidence(self):
        """Sparse (M, N) difference operator, (D u)_e = u_j - u_i."""
        m = self.edge_count
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.reshape(-1)
        vals = np.tile([-1.0, 1.0], m)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(m, self.node_count))

    @cached_property
    def adjacency(self):
        n = self.node_count
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * i.size)
        return sparse.csr_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(n, n))

    def differences(self, u):
        return self.incidence @ u

    def distances_from(self, center):
        """Euclidean distances of all nodes from a node index or a coordinate."""
        if self.positions is None:
            raise RejectionError("graph has no node positions")
        if np.ndim(center) == 0 and isinstance(center, (int, np.integer)):
            c = self.positions[int(center)]
        else:
            c = np.asarray(center, dtype=float).reshape(-1)
            if c.size != self.positions.shape[1]:
                raise RejectionError("center dimension does not match node positions")
        return np.sqrt(((self.positions - c) ** 2).sum(axis=1))

    def nearest_node(self, point):
        return int(np.argmin(self.distances_from(np.asarray(point, dtype=float))))


def as_node_set(indices, graph=None):
    """Sorted, duplicate-free int array; validated against graph if given."""
    arr = np.asarray(indices, dtype=np.int64).reshape(-1)
    if arr.size and not np.all(np.diff(arr) > 0):
        arr = np.unique(arr)
    if graph is not None and arr.size and (arr[0] < 0 or arr[-1] >= graph.node_count):
        raise RejectionError("node index out of range")
    return arr


def mask_to_set(mask):
    return np.flatnonzero(mask).astype(np.int64)


def set_to_mask(nodes, n):
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(nodes, dtype=np.int64)] = True
    return mask


def complement(nodes, n):
    return mask_to_set(~set_to_mask(nodes, n))


# -- weights -----------------------------------------------------------------

def constant_weight(value=1.0):
    value = float(value)
    return lambda x: np.full(np.shape(x)[0], value)


def exp_weight(rate, axis=0):
    """w(x) = exp(rate * x[axis])."""
    return lambda x: np.exp(rate * np.asarray(x)[:, axis])


def halfline_exp_weight(rate, axis=0):
    """w = 1 for x <= 0 and exp(rate * x) for x > 0 (continuous at 0)."""
    def w(x):
        t = np.asarray(x)[:, axis]
        return np.exp(rate * np.maximum(t, 0.0))
    return w


def power_weight(exponent):
    """w(x) = |x|^exponent; only admissible away from the origin."""
    return lambda x: np.sqrt((np.asarray(x) ** 2).sum(axis=1)) ** exponent


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid discretizing weighted R^n.

    extent holds one inclusive (imin, imax) integer index range per axis;
    node coordinates are index * spacing.
    """

    dimension: int
    spacing: float
    extent: tuple
    p: float
    weight: object = None

    def __post_init__(self):
        if self.dimension < 1:
            raise RejectionError("dimension must be >= 1")
        if not self.spacing > 0:
            raise RejectionError("spacing must be positive")
        if len(self.extent) != self.dimension:
            raise RejectionError("one index range per axis is required")
        for lo, hi in self.extent:
            if hi < lo:
                raise RejectionError("empty extent")

    @classmethod
    def interval(cls, lo, hi, spacing, p, weight=None, dimension=1):
        """Symmetric-friendly constructor from coordinates lo..hi on every axis."""
        ilo = int(round(lo / spacing))
        ihi = int(round(hi / spacing))
        return cls(dimension, spacing, ((ilo, ihi),) * dimension, p, weight)


def build_grid(spec):
    """Nearest-neighbour grid graph of a GridSpec.

    Edge conductance is the mean of the endpoint weights times h^{n-p};
    node measure is the node weight times h^n.
    """
    n, h, p = spec.dimension, spec.spacing, spec.p
    axes = [np.arange(lo, hi + 1) for lo, hi in spec.extent]
    shape = tuple(a.size for a in axes)
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pos = idx * h
    weight = spec.weight if spec.weight is not None else constant_weight(1.0)
    w = np.asarray(weight(pos), dtype=float).reshape(-1)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise RejectionError("weight must be strictly positive on the extent")
    flat = np.arange(pos.shape[0]).reshape(shape)
    pairs = []
    for ax in range(n):
        lo = np.take(flat, np.arange(shape[ax] - 1), axis=ax).reshape(-1)
        hi = np.take(flat, np.arange(1, shape[ax]), axis=ax).reshape(-1)
        pairs.append(np.stack([lo, hi], axis=1))
    edges = np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=np.int64)
    cond = 0.5 * (w[edges[:, 0]] + w[edges[:, 1]]) * h ** (n - p)
    return WeightedGraph(w * h**n, edges, cond, p, positions=pos, spacing=h)


@dataclass(frozen=True)
class RadialSpace:
    """Radially symmetric weighted R^n, reduced to the half-line in rho.

    weight is a callable w(rho) > 0 or None for the unweighted space.
    """

    n: int
    p: float
    weight: object = None

    def __post_init__(self):
        if self.n < 2:
            raise RejectionError("radial spaces need n >= 2")
        if not self.p > 1:
            raise RejectionError("p must exceed 1")

    def density(self, rho):
        rho = np.asarray(rho, dtype=float)
        base = sphere_area(self.n) * rho ** (self.n - 1)
        if self.weight is not None:
            base = base * np.asarray(self.weight(rho), dtype=float)
        return base

    def ball_measure(self, rho):
        """mu(B(0, rho)) by quadrature of the radial density."""
        from scipy.integrate import quad
        if self.weight is None:
            return sphere_area(self.n) * rho**self.n / self.n
        return quad(lambda t: float(self.density(t)), 0.0, rho, epsabs=1e-12, limit=200)[0]


def radial_graph(space, r_min, r_max, spacing):
    """1D grid on [r_min, r_max] whose weight is omega_{n-1} rho^{n-1} w(rho).

    Positions are radii, so balls about the origin are {rho < r}. r_min must be
    positive because the density vanishes at the origin.
    """
    if not 0 < r_min < r_max:
        raise RejectionError("need 0 < r_min < r_max")
    ilo = int(round(r_min / spacing))
    ihi = int(round(r_max / spacing))
    if ilo < 1:
        raise RejectionError("r_min must be at least one grid spacing")
    spec = GridSpec(1, spacing, ((ilo, ihi),), space.p,
                    lambda x: space.density(np.asarray(x)[:, 0]))
    return build_grid(spec)


def induced_subgraph(graph, nodes):
    """Subgraph on the given nodes; returns (subgraph, original indices)."""
    nodes = as_node_set(nodes, graph)
    if nodes.size == 0:
        raise RejectionError("induced subgraph needs at least one node")
    local = np.full(graph.node_count, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    keep = (local[graph.edges[:, 0]] >= 0) & (local[graph.edges[:, 1]] >= 0)
    pos = None if graph.positions is None else graph.positions[nodes]
    sub = WeightedGraph(graph.node_measure[nodes], local[graph.edges[keep]],
                        graph.conductance[keep], graph.p, positions=pos,
                        spacing=graph.spacing)
    return sub, nodes


# -- small graphs used by tests, selftest and the CLI ------------------------

def path_graph(conductances, p, measures=None, spacing=1.0):
    """Path v0 - v1 - ... with the given edge conductances."""
    c = np.asarray(conductances, dtype=float)
    n = c.size + 1
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    mu = np.ones(n) if measures is None else np.asarray(measures, dtype=float)
    return WeightedGraph(mu, edges, c, p, positions=np.arange(n, dtype=float) * spacing,
                         spacing=spacing)


def random_connected_graph(rng, n_nodes, p, extra_edges=None):
    """Random spanning tree plus extra edges, random conductances and measures.

    Positions are uniform in the unit square so geometric predicates work.
    """
    n_nodes = int(n_nodes)
    order = rng.permutation(n_nodes)
    edges = set()
    for k in range(1, n_nodes):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    if extra_edges is None:
        extra_edges = n_nodes // 2
    candidates = [e for e in itertools.combinations(range(n_nodes), 2) if e not in edges]
    if candidates and extra_edges:
        pick = rng.choice(len(candidates), size=min(extra_edges, len(candidates)), replace=False)
        edges.update(candidates[i] for i in pick)
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    cond = rng.uniform(0.5, 2.0, size=edges.shape[0])
    mu = rng.uniform(0.5, 2.0, size=n_nodes)
    pos = rng.uniform(0.0, 1.0, size=(n_nodes, 2))
    return WeightedGraph(mu, edges, cond, p, positions=pos)


# -- balls and exhaustion ----------------------------------------------------

def ball_set(graph, center, r, closed=False):
    """Nodes at Euclidean distance < r from center (<= r if closed)."""
    if graph.positions is None:
        raise RejectionError("ball_set needs node positions")
    if r == math.inf:
        return np.arange(graph.node_count, dtype=np.int64)
    d = graph.distances_from(center)
    return mask_to_set(d <= r if closed else d < r)


@dataclass(frozen=True)
class ExhaustionSchedule:
    """Nested balls B(base, r_1) < B(base, r_2) < ... standing in for j -> infinity."""

    base: object
    radii: tuple
    stop_tolerance: float = 1e-6
    max_stages: int = 64

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise RejectionError("schedule needs at least one radius")
        if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise RejectionError("radii must be positive and strictly increasing")
        if not self.stop_tolerance > 0:
            raise RejectionError("stop_tolerance must be positive")
        object.__setattr__(self, "radii", radii[: self.max_stages])

    def balls(self, graph):
        for r in self.radii:
            yield r, ball_set(graph, self.base, r)


def exhaust(graph, omega, schedule):
    """Omega intersected with each schedule ball, in increasing order."""
    omega = as_node_set(omega, graph)
    return [np.intersect1d(omega, ball, assume_unique=True) for _, ball in schedule.balls(graph)]


def doubling_ratio(graph, center, r):
    """mu(B(center, 2r)) / mu(B(center, r)); a diagnostic only."""
    inner = graph.node_measure[ball_set(graph, center, r)].sum()
    outer = graph.node_measure[ball_set(graph, center, 2 * r)].sum()
    return outer / inner if inner > 0 else math.inf
