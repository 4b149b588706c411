"""The 3-d skew product (x, y, z) -> (psi(x), lam y + forcing(x), -z/lam):
certified invariant graphs, the dominated-splitting cone check, and the
compact-leaf census showing the plane field integrates to a single compact
leaf while the transverse torus stays invariant."""

import math

import numpy as np
import pytest

from skewlab.incoherent import (
    FORCINGS,
    GOLDEN,
    GraphConvergenceError,
    Incoherent3DSystem,
    IncoherentParameters,
    build_3d_system,
    build_stable_graph,
    build_unstable_graph,
    c_series,
    compact_leaf_census,
    cone_check,
    graph_rows,
    oddness_defect,
    sample_splitting,
    slope_at,
    slope_refinement,
    stable_graph_bound,
    u_series,
)

ALL_PARAMS = [IncoherentParameters(forcing=f) for f in FORCINGS]
PARAM_IDS = list(FORCINGS)


@pytest.fixture(scope="module")
def golden_graphs():
    out = {}
    for params in ALL_PARAMS:
        out[params.forcing] = (build_unstable_graph(params),
                               build_stable_graph(params))
    return out


# ---------------------------------------------------------------------------
# parameters and series

def test_golden_ratio_satisfies_quadratic():
    params = IncoherentParameters()
    params.validate()
    assert params.lam == pytest.approx(GOLDEN, abs=0)
    with pytest.raises(ValueError, match="lam"):
        IncoherentParameters(lam=1.5).validate()


def test_forcing_enum_is_closed():
    with pytest.raises(ValueError, match="forcing"):
        IncoherentParameters(forcing="tan_x")


def test_psi_inverse_round_trip():
    params = IncoherentParameters()
    xs = np.linspace(-3.0, 3.0, 101)
    assert np.max(np.abs(params.psi_inverse(params.psi(xs)) - xs)) < 1e-12


def test_unstable_value_at_origin_is_minus_golden():
    params = IncoherentParameters(forcing="cos_x")
    assert float(u_series(params, 0.0)[0]) == pytest.approx(-GOLDEN, abs=1e-9)
    variant = IncoherentParameters(forcing="sin_x_minus_x")
    assert float(u_series(variant, 0.0)[0]) == pytest.approx(0.0, abs=1e-12)


def test_unstable_series_domain_guard():
    params = IncoherentParameters()
    with pytest.raises(ValueError, match="-pi, pi"):
        u_series(params, np.pi)


def test_series_raise_with_tail_estimate_when_truncated():
    params = IncoherentParameters()
    with pytest.raises(GraphConvergenceError) as err:
        u_series(params, np.array([2.0]), depth=3)
    assert err.value.tail_estimate > 0.0
    with pytest.raises(GraphConvergenceError) as err:
        c_series(params, np.array([1.0]), depth=2)
    assert err.value.tail_estimate > 0.0


# ---------------------------------------------------------------------------
# the invariant graphs

@pytest.mark.parametrize("forcing", PARAM_IDS)
def test_graph_residuals_certified(golden_graphs, forcing):
    u_graph, c_graph = golden_graphs[forcing]
    assert u_graph.residual < 1e-9
    assert c_graph.residual < 1e-9


@pytest.mark.parametrize("forcing", PARAM_IDS)
def test_graph_monotonicity_away_from_endpoints(golden_graphs, forcing):
    u_graph, c_graph = golden_graphs[forcing]
    mask = (u_graph.xs[:-1] > 0.01) & (u_graph.xs[1:] < math.pi - 0.01)
    assert np.all(u_graph.grid_slopes()[mask] < 0.0)
    mask = (c_graph.xs[:-1] > 0.01) & (c_graph.xs[1:] < math.pi - 0.01)
    assert np.all(c_graph.grid_slopes()[mask] > 0.0)


def test_unstable_slope_blows_up_at_endpoint():
    params = IncoherentParameters(forcing="cos_x")
    slopes = slope_refinement(params, "unstable_u", math.pi - 1e-3,
                              h=1e-4, levels=3)
    assert all(s < -50.0 for s in slopes)
    mags = [abs(s) for s in slopes]
    assert mags[0] < mags[1] < mags[2]


def test_stable_value_at_pi():
    cos_graph = build_stable_graph(IncoherentParameters(forcing="cos_x"))
    assert float(cos_graph.values[-1]) == pytest.approx(GOLDEN, abs=1e-9)
    var_graph = build_stable_graph(
        IncoherentParameters(forcing="sin_x_minus_x"))
    assert float(var_graph.values[-1]) == pytest.approx(math.pi * GOLDEN,
                                                        abs=1e-9)


@pytest.mark.parametrize("forcing", PARAM_IDS)
def test_stable_graph_respects_trapping_bound(golden_graphs, forcing):
    u_graph, c_graph = golden_graphs[forcing]
    bound = stable_graph_bound(c_graph.params)
    assert float(np.max(np.abs(c_graph.values))) <= bound + 1e-12


def test_stable_graph_odd_for_odd_forcing():
    variant = IncoherentParameters(forcing="sin_x_minus_x")
    assert oddness_defect(variant) < 1e-12
    # the even forcing has no such symmetry
    assert oddness_defect(IncoherentParameters(forcing="cos_x")) > 1.0


def test_graph_call_scalar_and_vector(golden_graphs):
    u_graph, _ = golden_graphs["cos_x"]
    xs = np.array([0.3, 1.1])
    vec = u_graph(xs)
    assert vec.shape == (2,)
    assert u_graph(0.3) == pytest.approx(float(vec[0]), abs=1e-12)


def test_graph_rows_export(golden_graphs):
    u_graph, _ = golden_graphs["cos_x"]
    header, rows = graph_rows(u_graph)
    assert header == ["x", "value"]
    assert rows.shape == (u_graph.xs.size, 2)
    assert np.array_equal(rows[:, 1], u_graph.values)


# ---------------------------------------------------------------------------
# the quotient 3-torus

@pytest.mark.parametrize("params", ALL_PARAMS, ids=PARAM_IDS)
def test_lattice_equivariance(params):
    system = build_3d_system(params)
    assert system.equivariance_residual() < 1e-12


def test_plane_lattice_conjugates_to_integer_matrix():
    system = build_3d_system(IncoherentParameters())
    basis = system.lattice[1:, 1:]
    d_mat = np.diag([GOLDEN, -1.0 / GOLDEN])
    coords = np.linalg.solve(basis, d_mat @ basis)
    assert np.max(np.abs(coords - np.array([[1.0, 1.0], [1.0, 0.0]]))) < 1e-12


def test_fixed_points_of_cos_forcing():
    system = build_3d_system(IncoherentParameters(forcing="cos_x"))
    fps = system.fixed_points()
    assert fps[0] == pytest.approx([0.0, -GOLDEN, 0.0], abs=1e-12)
    assert fps[1] == pytest.approx([math.pi, GOLDEN, 0.0], abs=1e-12)
    for p in fps:
        assert np.max(np.abs(system.map_point(p) - p)) < 1e-12


def test_jacobian_matches_finite_differences():
    system = build_3d_system(IncoherentParameters())
    x0 = 0.7
    jac = system.jacobian(x0)
    h = 1e-6
    for col, e in enumerate(np.eye(3)):
        p = np.array([x0, 0.3, -0.2])
        fd = (system.map_point(p + h * e) - system.map_point(p - h * e)) / (2 * h)
        assert np.max(np.abs(fd - jac[:, col])) < 1e-6


# ---------------------------------------------------------------------------
# dominated splitting via cone inequalities

@pytest.mark.parametrize("forcing", PARAM_IDS)
def test_cone_ordering_holds_at_sampled_points(golden_graphs, forcing):
    u_graph, c_graph = golden_graphs[forcing]
    samples = sample_splitting(u_graph, c_graph)
    assert len(samples) >= 8
    assert {s.label for s in samples} == {"near_zero", "near_pi"}
    system = build_3d_system(u_graph.params)
    ok, k = cone_check(system, samples, k_max=20, return_k=True)
    assert ok
    assert k <= 20


def test_cone_ordering_fails_without_fiber_expansion(golden_graphs):
    u_graph, c_graph = golden_graphs["cos_x"]
    samples = sample_splitting(u_graph, c_graph)
    flat = Incoherent3DSystem(params=IncoherentParameters(lam=1.0),
                              lattice=np.eye(3))
    assert cone_check(flat, samples, k_max=20) is False


# ---------------------------------------------------------------------------
# compact leaves of the plane foliation

def test_leaf_census_certifies_unique_compact_leaf():
    census = compact_leaf_census(IncoherentParameters(forcing="cos_x"))
    assert census.unique_compact_leaf
    assert census.x0_torus_invariant and census.x0_torus_residual < 1e-12
    assert census.pi_torus_invariant
    assert census.pi_torus_lattice_residual < 1e-12
    # planes turn vertical at pi but stay flat over the invariant torus
    evidence = census.vertical_slope_evidence
    assert evidence[0] > 50.0 and evidence[-1] > evidence[0]
    assert abs(census.horizontal_slope_at_zero) < 0.1
    # every sampled translated leaf leaves a fundamental domain quickly
    assert census.all_sampled_leaves_escape
    assert all(steps is not None and steps <= 20
               for _, steps in census.escapes)


def test_slope_probe_rejects_unknown_graph():
    with pytest.raises(ValueError, match="graph"):
        slope_at(IncoherentParameters(), "weak_w", 0.5)
