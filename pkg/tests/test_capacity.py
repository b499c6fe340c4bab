import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcondenser import (CondenserProblem, ExhaustionSchedule, GridSpec, RadialSpace,
                        RejectionError, ball_set, build_grid, build_warning_ring, cap_Dp,
                        check_capacity_axioms, check_exhaustion_limit, condenser_capacity,
                        condenser_capacity_naive, path_graph, radial_graph,
                        random_connected_graph, sobolev_capacity)
from pcondenser.bruteforce import brute_condenser_capacity
from pcondenser.capacity import (condenser_solve, extrapolate_fields, fit_power_tail,
                                 is_diverging)
from pcondenser.oracles import radial_condenser_capacity

from conftest import interval_condenser


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("h", [1 / 8, 1 / 32])
def test_interval_condenser_exact(p, h):
    g, E, omega = interval_condenser(p, h)
    cap = condenser_capacity(CondenserProblem(g, E, omega)).value
    assert cap == pytest.approx(2 * 2.0 ** (1 - p), abs=1e-9)


def test_series_path_capacity():
    # three unit conductances in series at p = 2: cap = 1/3
    g = path_graph([1.0, 1.0, 1.0], 2.0)
    assert condenser_solve(g, [0], [0, 1, 2])[0] == pytest.approx(1 / 3, abs=1e-12)


def test_empty_E_has_zero_capacity():
    g = path_graph([1.0, 1.0], 2.0)
    assert condenser_solve(g, [], [0, 1])[0] == 0.0


def test_problem_rejects_E_outside_omega():
    g = path_graph([1.0, 1.0], 2.0)
    with pytest.raises(RejectionError):
        CondenserProblem(g, [0, 2], [0, 1])


def test_radial_graph_matches_closed_form():
    g = radial_graph(RadialSpace(3, 2.0), 1.0, 2.0, 1 / 128)
    rho = g.positions[:, 0]
    cap = condenser_solve(g, np.flatnonzero(rho <= 1 + 1e-12),
                          np.flatnonzero(rho < 2 - 1e-12))[0]
    assert cap == pytest.approx(8 * math.pi, rel=1e-4)


def test_sobolev_capacity_single_node_path():
    # node 0 pinned to 1; node 1 (measure 1) minimizes t^2 + (1 - t)^2 at t = 1/2
    g = path_graph([1.0], 2.0, measures=[1.0, 1.0])
    value, u = sobolev_capacity(g, [0], return_potential=True)
    assert u[1] == pytest.approx(0.5, abs=1e-10)
    assert value == pytest.approx(1 + 0.25 + 0.25, abs=1e-10)


def test_cap_Dp_two_edge_path():
    g = path_graph([1.0, 1.0], 2.0)
    assert cap_Dp(g, [0], [2]) == pytest.approx(0.5, abs=1e-12)
    assert cap_Dp(g, [0], []) == 0.0
    with pytest.raises(RejectionError):
        cap_Dp(g, [0], [0])


def test_cap_Dp_never_exceeds_condenser_capacity(rng):
    for _ in range(10):
        g = random_connected_graph(rng, 10, 2.0)
        E, F = [0], [5, 6]
        omega = np.setdiff1d(np.arange(10), F)
        assert cap_Dp(g, E, F) <= condenser_solve(g, E, omega)[0] + 1e-10


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_matches_brute_force(rng, p):
    g = random_connected_graph(rng, 7, p)
    E, omega = [0], [0, 1, 2, 3, 4]
    assert condenser_solve(g, E, omega)[0] == pytest.approx(
        brute_condenser_capacity(g, E, omega), abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_axioms_hold_on_random_graphs(seed, p):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 10, p)
    omega = np.sort(rng.choice(10, 7, replace=False))
    E1 = rng.choice(omega, 3, replace=False)
    E2 = rng.choice(omega, 2, replace=False)
    assert check_capacity_axioms(g, [(E1, E2, omega)]).ok


def test_exhaustion_limit_in_omega():
    g, E, omega = interval_condenser(2.0, 1 / 16)
    x = g.positions[:, 0]
    stages = [np.flatnonzero(np.abs(x) < s) for s in (1.5, 2.0, 2.5)] + [omega]
    rep = check_exhaustion_limit(CondenserProblem(g, E, omega), stages)
    assert rep.ok
    np.testing.assert_allclose(rep.stage_values, [2.0 / s for s in (0.5, 1.0, 1.5, 2.0)],
                               rtol=1e-9)


def test_unbounded_E_stage_limit():
    # E = [1, inf) on the half-line with exponential weight; cap(E, X) is positive
    from pcondenser.model_space import exp_weight
    # conductances stay below ~1e7, well inside double-precision assembly range
    g = build_grid(GridSpec.interval(0, 16, 1 / 8, 2.0, exp_weight(1.0)))
    x = g.positions[:, 0]
    E = np.flatnonzero(x >= 1 - 1e-12)
    omega = np.flatnonzero(x > 1e-12)
    sched = ExhaustionSchedule([0.0], (2.0, 4.0, 8.0, 12.0, 16.5))
    rep = condenser_capacity(CondenserProblem(g, E, omega, e_unbounded=True), sched)
    one = condenser_solve(g, E, omega)[0]
    # continuum value 1 / (1 - 1/e); the grid error is O(h^2)
    exact = 1 / (1 - math.exp(-1))
    g2 = build_grid(GridSpec.interval(0, 16, 1 / 16, 2.0, exp_weight(1.0)))
    x2 = g2.positions[:, 0]
    one2 = condenser_solve(g2, np.flatnonzero(x2 >= 1 - 1e-12), np.flatnonzero(x2 > 1e-12))[0]
    assert (one - exact) / (one2 - exact) == pytest.approx(4.0, rel=0.05)
    assert rep.converged
    assert rep.value == pytest.approx(one, rel=1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_naive_surrogate_diverges_on_parabolic_line(p):
    g = build_grid(GridSpec.interval(-256, 256, 1 / 4, p))
    x = g.positions[:, 0]
    all_nodes = np.arange(g.node_count)
    sched = ExhaustionSchedule([0.0], (8.0, 16.0, 32.0, 64.0, 128.0, 256.0))
    prob = CondenserProblem(g, all_nodes, all_nodes, e_unbounded=True)
    assert condenser_capacity_naive(prob, sched) == math.inf
    bounded = CondenserProblem(g, np.flatnonzero(np.abs(x) <= 1), np.flatnonzero(np.abs(x) < 3))
    assert condenser_capacity_naive(bounded) == pytest.approx(2 * 2.0 ** (1 - p), abs=1e-9)


def test_fit_power_tail_geometric_exact():
    r = np.array([2.0, 4.0, 8.0, 16.0])
    v = 3.0 + 5.0 * r**-1.5
    c, A, beta = fit_power_tail(r, v)
    assert (c, A, beta) == pytest.approx((3.0, 5.0, 1.5), rel=1e-10)


def test_fit_power_tail_least_squares():
    r = np.array([2.0, 3.0, 7.0, 20.0])
    v = 1.0 + 2.0 * r**-0.8
    c, A, beta = fit_power_tail(r, v)
    assert c == pytest.approx(1.0, abs=1e-6)
    assert beta == pytest.approx(0.8, abs=1e-4)


def test_fit_power_tail_degenerate():
    assert fit_power_tail([1.0, 2.0], [1.0, 1.0]) is None
    assert fit_power_tail([1, 2, 4], [7.0, 7.0, 7.0]) == (7.0, 0.0, 1.0)


def test_extrapolate_fields_respects_mask():
    r = [2.0, 4.0, 8.0]
    fields = [1.0 - np.array([1.0, 2.0]) * s**-1 for s in r]
    out, did = extrapolate_fields(r, fields, fields[-1], inside=np.array([True, False]))
    assert did
    assert out[0] == pytest.approx(1.0, abs=1e-14)
    assert out[1] == fields[-1][1]


@pytest.mark.parametrize("values, expect", [
    ([1, 2, 4, 8, 16], True),
    ([1, 1.5, 1.75, 1.875, 1.9375], False),
    ([1, 1e7], True),
    ([3, 2, 1, 0.5], False),
])
def test_divergence_rule(values, expect):
    radii = 2.0 ** np.arange(len(values))
    assert is_diverging(radii, values) is expect


def test_warning_ring():
    ring = build_warning_ring([2.0] * 5, 1.0, 3, 2.0)
    np.testing.assert_allclose(ring.stage_capacities(), 2.0, atol=1e-10)
    assert ring.limit_capacity() == pytest.approx(1.0, abs=1e-12)
    for j, (r, s) in enumerate(ring.rings, start=1):
        assert 0 < r < s and r < 2.0 ** -j
    for (r0, s0), (r1, s1) in zip(ring.rings, ring.rings[1:]):
        assert s1 <= r0


@pytest.mark.parametrize("bad", [dict(c_seq=[0.5], c0=1.0), dict(c_seq=[2.0], c0=0.0)])
def test_warning_ring_rejections(bad):
    with pytest.raises(RejectionError):
        build_warning_ring(n=3, p=2.0, **bad)
    with pytest.raises(RejectionError):
        build_warning_ring([2.0], 1.0, 3, 4.0)


def test_sobolev_capacity_examples():
    from pcondenser import WeightedGraph
    lone = WeightedGraph(np.array([2.5]), np.zeros((0, 2), dtype=int), [], 2.0)
    assert sobolev_capacity(lone, [0]) == pytest.approx(2.5)
    g = path_graph([1.0] * 4, 2.0, measures=[1.0] * 5)
    assert sobolev_capacity(g, np.arange(5)) == pytest.approx(5.0)
    value = sobolev_capacity(g, [2])
    fixed = np.full(5, np.nan)
    fixed[2] = 1.0
    # symmetric brute force over the two distinct free values on [0, 1]
    import itertools
    best = np.inf
    grid = np.linspace(0, 1, 41)
    for a, b in itertools.product(grid, grid):
        u = np.array([a, b, 1.0, b, a])
        best = min(best, np.sum(u**2) + p_energy_path(u))
    assert 0 < value <= 5
    assert value == pytest.approx(best, abs=1e-3)


def p_energy_path(u):
    return float(np.sum(np.diff(u) ** 2))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_solid_block_equals_its_boundary(p):
    g = build_grid(GridSpec.interval(-3, 3, 0.5, p, dimension=2))
    x, y = g.positions.T
    F = np.flatnonzero((np.abs(x) <= 1) & (np.abs(y) <= 1))
    dF = np.flatnonzero(((np.abs(x) == 1) & (np.abs(y) <= 1)) | ((np.abs(y) == 1) & (np.abs(x) <= 1)))
    omega = np.flatnonzero((np.abs(x) < 3) & (np.abs(y) < 3))
    assert condenser_solve(g, F, omega)[0] == pytest.approx(condenser_solve(g, dF, omega)[0],
                                                            abs=1e-9)


def test_cap_Dp_equals_condenser_for_bounded_omega(rng):
    g = random_connected_graph(rng, 12, 3.0)
    omega = np.arange(8)
    F = np.arange(8, 12)
    assert cap_Dp(g, [0, 1], F) == pytest.approx(condenser_solve(g, [0, 1], omega)[0],
                                                 abs=1e-10)


def test_bounded_E_naive_equals_two_step(rng):
    g = random_connected_graph(rng, 10, 2.0)
    prob = CondenserProblem(g, [0], np.arange(6))
    assert condenser_capacity_naive(prob) == condenser_capacity(prob).value


def test_exhaustion_towards_ball_capacity_r3():
    g = radial_graph(RadialSpace(3, 2.0), 1.0, 512.0, 1 / 16)
    rho = g.positions[:, 0]
    E = np.flatnonzero(rho <= 1 + 1e-12)
    stages = [np.flatnonzero(rho < s - 1e-12) for s in (2.0, 4.0, 8.0, 512.0)]
    rep = check_exhaustion_limit(CondenserProblem(g, E, stages[-1]), stages)
    assert rep.ok
    assert rep.stage_values[-1] == pytest.approx(4 * math.pi, rel=0.02)
