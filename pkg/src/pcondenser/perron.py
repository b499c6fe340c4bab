"""
Perron solutions on truncated domains
=====================================

Dirichlet problems in an unbounded Omega are approximated on nested balls.
In pinned mode every node of Omega outside the current ball is held at the
value assigned to the point at infinity; in free mode those nodes are simply
cut away, which leaves a natural (Neumann-type) condition on the outer shell.

The upper and lower Perron envelopes are not computed from families of
super/subharmonic functions. ``bracket_upper_lower`` is a heuristic stand-in
and its output is labeled as such.
"""

from dataclasses import dataclass
from dataclasses import field as _field
import math

import numpy as np

from .capacity import extrapolate_fields, fit_power_tail
from .errors import RejectionError
from .model_space import as_node_set, ball_set, induced_subgraph, set_to_mask
from .solver import minimize_penergy

PINNED = "pinned"
FREE = "free"

REGULAR_BELOW = 0.01
IRREGULAR_ABOVE = 0.1


@dataclass(frozen=True)
class BoundaryData:
    """Boundary values on nodes outside Omega plus a value at infinity.

    values is a full-length array; NaN entries are ignored. Every node outside
    Omega that touches Omega must carry a finite value.
    """

    values: np.ndarray
    value_at_infinity: float = None
    outer_shell_mode: str = PINNED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", v)
        if self.outer_shell_mode not in (PINNED, FREE):
            raise RejectionError(f"outer_shell_mode must be {PINNED!r} or {FREE!r}")
        if self.value_at_infinity is not None and not math.isfinite(self.value_at_infinity):
            raise RejectionError("value_at_infinity must be finite")

    @classmethod
    def from_function(cls, graph, omega, fun, value_at_infinity=None, mode=PINNED):
        """Evaluate fun(positions) on the nodes outside omega."""
        omega = as_node_set(omega, graph)
        v = np.full(graph.node_count, np.nan)
        outside = ~set_to_mask(omega, graph.node_count)
        if outside.any():
            v[outside] = np.asarray(fun(graph.positions[outside]), dtype=float).reshape(-1)
        return cls(v, value_at_infinity, mode)

    @classmethod
    def constant(cls, graph, omega, value, value_at_infinity=None, mode=PINNED):
        return cls.from_function(graph, omega, lambda x: np.full(x.shape[0], value),
                                 value_at_infinity, mode)

    def finite_range(self, boundary):
        vals = self.values[boundary]
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (math.inf, -math.inf)
        if self.value_at_infinity is not None:
            lo = min(lo, self.value_at_infinity)
            hi = max(hi, self.value_at_infinity)
        return lo, hi


@dataclass
class PerronResult:
    field: np.ndarray = _field(repr=False)
    mode: str
    stage_fields: list = _field(default_factory=list, repr=False)
    radii: list = _field(default_factory=list)
    stage_change: list = _field(default_factory=list)
    converged: bool = False
    extrapolated: bool = False
    last_stage: np.ndarray = _field(default=None, repr=False)


def vertex_boundary(graph, omega):
    """Nodes outside omega with at least one neighbour in omega."""
    n = graph.node_count
    inside = set_to_mask(omega, n)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    mask = np.zeros(n, dtype=bool)
    cross = inside[i] != inside[j]
    mask[i[cross & ~inside[i]]] = True
    mask[j[cross & ~inside[j]]] = True
    return np.flatnonzero(mask)


def _check_data(graph, omega, data):
    if data.values.size != graph.node_count:
        raise RejectionError("boundary values need one entry per node")
    boundary = vertex_boundary(graph, omega)
    if np.any(~np.isfinite(data.values[boundary])):
        raise RejectionError("boundary data missing on some boundary node")
    return boundary


def _stage_solve(graph, omega_mask, data, r, base, mode, x0, config):
    n = graph.node_count
    fixed = np.full(n, np.nan)
    outside = ~omega_mask
    fixed[outside] = np.where(np.isfinite(data.values[outside]), data.values[outside], 0.0)
    if r is None or math.isinf(r):
        if np.all(~np.isnan(fixed)):
            return fixed
        return minimize_penergy(graph, fixed, x0=x0, config=config)[0]
    ball = set_to_mask(ball_set(graph, base, r), n)
    if mode == PINNED:
        shell = omega_mask & ~ball
        if shell.any():
            if data.value_at_infinity is None:
                raise RejectionError("pinned mode needs value_at_infinity")
            fixed[shell] = data.value_at_infinity
        return minimize_penergy(graph, fixed, x0=x0, config=config)[0]
    # free outer shell: cut the graph down to the ball plus the pinned nodes it touches
    keep = ball | (outside & _touches(graph, ball))
    sub, idx = induced_subgraph(graph, np.flatnonzero(keep))
    sub_x0 = None if x0 is None else x0[idx]
    u_sub = minimize_penergy(sub, fixed[idx], x0=sub_x0, config=config)[0]
    u = np.full(n, np.nan)
    u[idx] = u_sub
    return u


def _touches(graph, mask):
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    out = np.zeros(graph.node_count, dtype=bool)
    out[i[mask[j]]] = True
    out[j[mask[i]]] = True
    return out


def _staged(graph, omega, data, schedule, mode, config, extrapolate):
    omega = as_node_set(omega, graph)
    boundary = _check_data(graph, omega, data)
    n = graph.node_count
    omask = set_to_mask(omega, n)
    has_shell = schedule is not None and data.value_at_infinity is not None
    if boundary.size == 0 and not (mode == PINNED and has_shell):
        raise RejectionError("no boundary: the Dirichlet problem has no data to match")
    if schedule is None:
        u = _stage_solve(graph, omask, data, None, None, mode, None, config)
        return PerronResult(u, mode, [u], [math.inf], [], True, False, u)
    fields, radii, changes = [], [], []
    u_prev = None
    converged = False
    quiet = 0
    for r, _ in schedule.balls(graph):
        x0 = None if u_prev is None else np.where(np.isnan(u_prev), 0.0, u_prev)
        u = _stage_solve(graph, omask, data, r, schedule.base, mode, x0, config)
        if u_prev is not None:
            common = ~np.isnan(u) & ~np.isnan(u_prev)
            change = float(np.abs(u[common] - u_prev[common]).max()) if common.any() else math.inf
            changes.append(change)
            quiet = quiet + 1 if change < schedule.stop_tolerance else 0
        fields.append(u)
        radii.append(r)
        u_prev = u
        if quiet >= 2:
            converged = True
            break
    last = fields[-1]
    result, did = (last.copy(), False)
    if extrapolate and not converged and mode == PINNED:
        filled = [np.where(np.isnan(f), last, f) for f in fields]
        inside = None
        if len(radii) >= 3:
            inside = set_to_mask(ball_set(graph, schedule.base, radii[-3]), n) & omask
        result, did = extrapolate_fields(radii, filled, last, inside)
        lo, hi = data.finite_range(boundary)
        if did and lo <= hi:
            # maximum principle: extrapolation must not leave the data range
            result = np.clip(result, lo, hi)
    return PerronResult(result, mode, fields, radii, changes, converged, did, last)


def perron_solution(graph, omega, data, schedule=None, config=None, extrapolate=True):
    """Pinned-shell approximation of the Perron solution Pf.

    Stage j solves the Dirichlet problem in Omega cap B_{r_j} with the finite
    data on the boundary of Omega and value_at_infinity on the rest of
    Omega. The stages stop once the nodewise change stays below the schedule
    tolerance twice; otherwise the limit is extrapolated from the last three
    stages when the radii are geometric.
    """
    return _staged(graph, omega, data, schedule, PINNED, config, extrapolate)


def hf_solution(graph, omega, data, schedule=None, config=None):
    """Energy minimizer with finite boundary pins only; the outer shell is free."""
    return _staged(graph, omega, data, schedule, FREE, config, extrapolate=False)


@dataclass
class RegularityVerdict:
    verdict: str
    point: object
    trace: list
    scales: list
    limit: float


def _classify(trace, limit):
    if limit < REGULAR_BELOW:
        return "regular"
    tail = np.asarray(trace[-3:], dtype=float)
    if limit > IRREGULAR_ABOVE and np.all(np.diff(tail) >= -1e-8):
        return "irregular"
    return "inconclusive"


def regularity_probe(graph, omega, point, schedule, config=None):
    """Barrier test for a boundary point (node index) or for infinity.

    point = "inf": data exp(-d(y, x0)) with 0 at infinity; the trace holds,
    per stage r_j, the largest field value on the shell r_j/4 <= d < r_j/2.
    Finite node x: data min(d(y, x), 1) with 1 at infinity; the trace holds
    the largest final-stage value within distance delta of x for delta
    shrinking from 8 spacings to 1 spacing, extrapolated to delta = 0 with
    a power-law fit.
    Below 0.01 is regular; above 0.1 with a non-decreasing trace is irregular.
    """
    omega = as_node_set(omega, graph)
    n = graph.node_count
    omask = set_to_mask(omega, n)
    if isinstance(point, str):
        if point not in ("inf", "infinity"):
            raise RejectionError("point must be a node index or 'inf'")
        d = graph.distances_from(schedule.base)
        data = BoundaryData(np.where(omask, np.nan, np.exp(-d)), 0.0, PINNED)
        res = perron_solution(graph, omega, data, schedule, config, extrapolate=False)
        trace, scales = [], []
        for r, u in zip(res.radii, res.stage_fields):
            shell = omask & (d >= r / 4) & (d < r / 2)
            if shell.any():
                trace.append(float(u[shell].max()))
                scales.append(r)
        if not trace:
            raise RejectionError("no Omega nodes on any probe shell")
        limit = trace[-1]
        return RegularityVerdict(_classify(trace, limit), "inf", trace, scales, limit)

    x = int(point)
    if omask[x]:
        raise RejectionError("probe point must lie outside Omega")
    if x not in set(vertex_boundary(graph, omega).tolist()):
        raise RejectionError("probe point is not on the boundary of Omega")
    d = graph.distances_from(x)
    data = BoundaryData(np.where(omask, np.nan, np.minimum(d, 1.0)), 1.0, PINNED)
    res = perron_solution(graph, omega, data, schedule, config, extrapolate=False)
    u = res.last_stage
    h = graph.spacing if graph.spacing else float(np.min(d[d > 0]))
    scales = [8 * h, 4 * h, 2 * h, h]
    trace = []
    for delta in scales:
        near = omask & (d <= delta * (1 + 1e-9)) & ~np.isnan(u)
        trace.append(float(u[near].max()) if near.any() else math.nan)
    pts = [(s, t) for s, t in zip(scales, trace) if math.isfinite(t)]
    limit = pts[-1][1] if pts else math.nan
    if len(pts) >= 3:
        # values ~ limit + A delta^beta: a power tail in 1/delta
        s_arr, t_arr = np.array(pts).T
        tail = fit_power_tail(1.0 / s_arr, t_arr)
        if tail is not None:
            limit = tail[0]
    limit = max(limit, 0.0)
    # for a finite point the trace runs towards the point, so irregularity means
    # the values stay large as delta shrinks
    verdict = _classify(trace[::-1], limit) if math.isfinite(limit) else "inconclusive"
    return RegularityVerdict(verdict, x, trace, scales, limit)


@dataclass
class Bracket:
    lower: np.ndarray = _field(repr=False)
    upper: np.ndarray = _field(repr=False)
    width: float
    label: str = "heuristic bracket, not a certified Perron envelope"


def bracket_upper_lower(graph, omega, data, schedule, config=None):
    """Two pinned solves with the outer shell at inf f and at sup f.

    The infimum and supremum run over the finite data and the value at
    infinity. The bracket width is the largest gap between the two fields
    on Omega inside the first schedule ball.
    """
    omega = as_node_set(omega, graph)
    boundary = _check_data(graph, omega, data)
    lo, hi = data.finite_range(boundary)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise RejectionError("bracket needs bounded data")
    low = perron_solution(graph, omega, BoundaryData(data.values, lo, PINNED), schedule,
                          config, extrapolate=False).field
    up = perron_solution(graph, omega, BoundaryData(data.values, hi, PINNED), schedule,
                         config, extrapolate=False).field
    # the width is read inside the first stage ball, away from the pinned shells
    mask = set_to_mask(omega, graph.node_count)
    mask &= set_to_mask(ball_set(graph, schedule.base, schedule.radii[0]), graph.node_count)
    gap = (up - low)[mask]
    width = float(np.nanmax(gap)) if gap.size else 0.0
    return Bracket(low, up, width)


def radial_profile(graph, field_values, base, bins):
    """(distance, mean field value) over distance bins from base."""
    d = graph.distances_from(base)
    edges = np.asarray(bins, dtype=float)
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (d >= a) & (d < b) & np.isfinite(field_values)
        if sel.any():
            rows.append((float(d[sel].mean()), float(np.mean(field_values[sel]))))
    return np.array(rows).reshape(-1, 2)
