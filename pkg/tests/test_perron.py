import math

import numpy as np
import pytest

from pcondenser import (BoundaryData, ExhaustionSchedule, GridSpec, RadialSpace,
                        RejectionError, bracket_upper_lower, build_grid, hf_solution,
                        path_graph, perron_solution, radial_graph, regularity_probe)
from pcondenser.perron import FREE, PINNED, radial_profile, vertex_boundary


@pytest.fixture(scope="module")
def exterior():
    g = radial_graph(RadialSpace(3, 2.0), 1.0, 64.0, 1 / 16)
    rho = g.positions[:, 0]
    omega = np.flatnonzero(rho > 1 + 1e-12)
    return g, rho, omega, ExhaustionSchedule([0.0], (8.0, 16.0, 32.0, 64.0))


def test_vertex_boundary():
    g = path_graph([1.0] * 4, 2.0)
    np.testing.assert_array_equal(vertex_boundary(g, [1, 2]), [0, 3])


def test_bounded_dirichlet_problem():
    g = path_graph([1.0] * 4, 2.0)
    data = BoundaryData(np.array([0.0, np.nan, np.nan, np.nan, 1.0]))
    res = perron_solution(g, [1, 2, 3], data)
    np.testing.assert_allclose(res.field, [0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.5])
def test_exterior_perron_formula(exterior, c):
    g, rho, omega, sched = exterior
    res = perron_solution(g, omega, BoundaryData.constant(g, omega, 1.0, c), sched)
    # u(rho) = c + (1 - c) / rho for the exterior of the unit ball in R^3
    sel = (rho >= 1.5) & (rho <= 4)
    np.testing.assert_allclose(res.field[sel], c + (1 - c) / rho[sel], rtol=5e-3)
    assert res.extrapolated


def test_hf_is_identically_one(exterior):
    g, rho, omega, sched = exterior
    res = hf_solution(g, omega, BoundaryData.constant(g, omega, 1.0, None, FREE), sched)
    fin = np.isfinite(res.field)
    assert np.abs(res.field[fin] - 1).max() < 1e-9
    for f in res.stage_fields:
        assert np.nanmax(np.abs(f - 1)) < 1e-9


def test_stage_change_recorded(exterior):
    g, rho, omega, sched = exterior
    res = perron_solution(g, omega, BoundaryData.constant(g, omega, 1.0, 0.0), sched)
    assert len(res.stage_change) == len(res.radii) - 1
    assert all(b <= a for a, b in zip(res.stage_change, res.stage_change[1:]))


def test_missing_boundary_data_rejected():
    g = path_graph([1.0] * 3, 2.0)
    with pytest.raises(RejectionError):
        perron_solution(g, [1, 2], BoundaryData(np.full(4, np.nan)))
    with pytest.raises(RejectionError):
        BoundaryData(np.zeros(4), math.inf)
    with pytest.raises(RejectionError):
        BoundaryData(np.zeros(4), 0.0, "sideways")


def test_regularity_at_infinity_r3():
    g = radial_graph(RadialSpace(3, 2.0), 1.0, 512.0, 1 / 8)
    rho = g.positions[:, 0]
    omega = np.flatnonzero(rho > 1 + 1e-12)
    sched = ExhaustionSchedule([0.0], (8, 16, 32, 64, 128, 256, 512))
    v = regularity_probe(g, omega, "inf", sched)
    assert v.verdict == "regular"


def test_infinity_irregular_on_punctured_line():
    g = build_grid(GridSpec.interval(-512, 512, 1 / 4, 2.0))
    x = g.positions[:, 0]
    sched = ExhaustionSchedule([0.0], (8, 16, 32, 64, 128, 256, 512))
    v = regularity_probe(g, np.flatnonzero(x != 0), "inf", sched)
    assert v.verdict == "irregular"


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_flat_boundary_point_is_regular(p):
    g = build_grid(GridSpec.interval(-4, 4, 1 / 16, p, dimension=2))
    x, y = g.positions.T
    omega = np.flatnonzero(x > 1e-12)
    point = g.nearest_node([0.0, 0.0])
    sched = ExhaustionSchedule([0.0, 0.0], (2.0, 3.0, 4.5))
    v = regularity_probe(g, omega, point, sched)
    assert v.verdict == "regular"


def test_probe_rejects_interior_point():
    g = path_graph([1.0] * 3, 2.0)
    sched = ExhaustionSchedule([0.0], (1.0, 2.0))
    with pytest.raises(RejectionError):
        regularity_probe(g, [1, 2], 1, sched)


def test_bracket_contains_perron_solution(exterior):
    g, rho, omega, sched = exterior
    data = BoundaryData.constant(g, omega, 1.0, 0.25)
    br = bracket_upper_lower(g, omega, data, sched)
    mid = perron_solution(g, omega, data, sched, extrapolate=False).field
    fin = np.isfinite(mid)
    assert np.all(br.lower[fin] <= mid[fin] + 1e-9)
    assert np.all(mid[fin] <= br.upper[fin] + 1e-9)
    assert 0 <= br.width < 0.75
    assert "heuristic" in br.label


def test_radial_profile_bins():
    g = path_graph([1.0] * 4, 2.0)
    prof = radial_profile(g, np.arange(5.0), [0.0], [0, 2, 5])
    np.testing.assert_allclose(prof, [[0.5, 0.5], [3.0, 3.0]])


@pytest.mark.parametrize("k", [-1.0, 0.3])
def test_constant_data_everywhere(exterior, k):
    g, rho, omega, sched = exterior
    res = perron_solution(g, omega, BoundaryData.constant(g, omega, k, k), sched)
    np.testing.assert_allclose(res.field[np.isfinite(res.field)], k, atol=1e-12)


def test_single_boundary_point_gives_constant():
    g = build_grid(GridSpec.interval(-4, 4, 0.5, 2.0, dimension=2))
    x, y = g.positions.T
    a = g.nearest_node([0.0, 0.0])
    omega = np.setdiff1d(np.arange(g.node_count), [a])
    data = BoundaryData(np.where(np.arange(g.node_count) == a, 0.6, np.nan))
    res = perron_solution(g, omega, data)
    np.testing.assert_allclose(res.field, 0.6, atol=1e-12)


def test_hf_equals_perron_on_bounded_domain():
    g = build_grid(GridSpec.interval(-2, 2, 0.25, 3.0))
    x = g.positions[:, 0]
    omega = np.flatnonzero(np.abs(x) < 2 - 1e-9)
    data = BoundaryData.from_function(g, omega, lambda pos: pos[:, 0] ** 2, None, FREE)
    a = hf_solution(g, omega, data).field
    b = perron_solution(g, omega, BoundaryData(data.values)).field
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_two_ball_hf_tends_to_half():
    h, L = 1 / 2, 6.0
    g = build_grid(GridSpec.interval(-L, L, h, 2.0, dimension=3))
    pos = g.positions
    E = np.linalg.norm(pos + [2, 0, 0], axis=1) <= 1 + 1e-9
    F = np.linalg.norm(pos - [2, 0, 0], axis=1) <= 1 + 1e-9
    omega = np.flatnonzero(~E & ~F)
    values = np.where(E, 1.0, np.where(F, 0.0, np.nan))
    res = hf_solution(g, omega, BoundaryData(values, None, FREE))
    far = [g.nearest_node([0, 0, L]), g.nearest_node([0, L, 0]), g.nearest_node([0, -L, -L])]
    np.testing.assert_allclose(res.field[far], 0.5, atol=1e-9)


@pytest.mark.parametrize("lo, hi", [(0.0, 0.0), (0.0, 1.0)])
def test_comparison_of_data(exterior, lo, hi):
    g, rho, omega, sched = exterior
    u = perron_solution(g, omega, BoundaryData.constant(g, omega, lo, lo), sched).field
    v = perron_solution(g, omega, BoundaryData.constant(g, omega, hi, hi / 2), sched).field
    fin = np.isfinite(u) & np.isfinite(v)
    assert np.all(u[fin] <= v[fin] + 1e-8)


def test_constant_data_bracket_has_zero_width(exterior):
    g, rho, omega, sched = exterior
    br = bracket_upper_lower(g, omega, BoundaryData.constant(g, omega, 0.4, 0.4), sched)
    assert br.width == pytest.approx(0.0, abs=1e-12)


def test_pinned_stages_increase_for_zero_at_infinity(exterior):
    # nonnegative data, shell pinned at 0: the shell recedes, so stages rise
    # towards c + (1 - c)/rho from below
    g, rho, omega, sched = exterior
    res = perron_solution(g, omega, BoundaryData.constant(g, omega, 1.0, 0.0), sched,
                          extrapolate=False)
    for a, b in zip(res.stage_fields, res.stage_fields[1:]):
        fin = np.isfinite(a) & np.isfinite(b)
        assert np.all(b[fin] >= a[fin] - 1e-9)


def test_parabolic_lower_solve_tends_to_one():
    # on the line, data 1 on K = {0} and 0 at infinity: the pinned solves rise towards 1
    g = build_grid(GridSpec.interval(-512, 512, 1 / 2, 2.0))
    x = g.positions[:, 0]
    omega = np.flatnonzero(x != 0)
    data = BoundaryData(np.where(x == 0, 1.0, np.nan), 0.0)
    sched = ExhaustionSchedule([0.0], (8, 32, 128, 512))
    res = perron_solution(g, omega, data, sched, extrapolate=False)
    at = g.nearest_node([4.0])
    trace = [float(f[at]) for f in res.stage_fields]
    assert all(b > a for a, b in zip(trace, trace[1:]))
    assert trace[-1] > 0.99
