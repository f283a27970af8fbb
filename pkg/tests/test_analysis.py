import math

import numpy as np
import pytest

from conftest import expected_max_abs
from dpgeom.analysis import (
    GAUSSIAN_OPTIMAL,
    PROJECTION_FAVORED,
    _section_vertices,
    _zonotope_polar_vertices,
    bound_report,
    gelfand_probe,
    padding_scaler,
    query_release_bounds,
    section_diameter,
)
from dpgeom.errors import DomainError, InputError
from dpgeom.geometry import ConvexBody, SubspaceBasis, gaussian_width, to_vpolytope
from dpgeom.mechanisms import sigma
from dpgeom.workload import one_way_marginals, sensitivity_polytope


def test_ball_report_is_gaussian_optimal():
    rep = bound_report(ConvexBody.ball(16), 1.0, 1e-6, 0.1, 20_000, 0)
    s = sigma(1.0, 1e-6)
    assert rep.gauss_upper == pytest.approx(s * 4 / 0.1, rel=1e-15)
    assert rep.proj_upper == pytest.approx(s * rep.ell_star.value / 0.01, rel=1e-15)
    assert rep.regime == GAUSSIAN_OPTIMAL
    assert rep.best_upper == rep.gauss_upper
    assert rep.metadata["constants"] == "unit" and rep.metadata["log_base"] == "e"


def test_cross_polytope_report_favors_projection():
    rep = bound_report(ConvexBody.cross_polytope(64), 1.0, 1e-6, 0.1, 100_000, 0)
    assert rep.regime == PROJECTION_FAVORED
    assert rep.regime_ratio == pytest.approx(expected_max_abs(64) / 8, abs=3 * rep.ell_star.stderr / 8)
    L = math.log(128)
    assert rep.alpha_validity_threshold == pytest.approx(rep.ell_star.value / (8 * L**2), rel=1e-15)
    assert rep.lower_bound_asserted == (0.1 <= rep.alpha_validity_threshold)
    assert rep.meanpt_lower == pytest.approx(rep.sigma * rep.ell_star.value / (L**2 * 0.1), rel=1e-15)


def test_lower_bound_assertion_tracks_threshold():
    body = ConvexBody.scaled_cube(8)
    rep = bound_report(body, 1.0, 1e-6, 0.5, 5000, 0)
    small = bound_report(body, 1.0, 1e-6, rep.alpha_validity_threshold * 0.99, 5000, 0)
    assert not rep.lower_bound_asserted and small.lower_bound_asserted


def test_bound_report_rules():
    with pytest.raises(DomainError):
        bound_report(ConvexBody.ball(3), 1.0, 1e-6, 1.5)
    with pytest.raises(DomainError):
        bound_report(ConvexBody.ball(3, 2.0), 1.0, 1e-6, 0.1)
    with pytest.raises(DomainError):
        bound_report(ConvexBody.ball(3), 0.0, 1e-6, 0.1)


def test_query_release_bounds_use_unscaled_polytope():
    w = one_way_marginals(4)
    rep = query_release_bounds(w, 1.0, 1e-6, 0.1, 20_000, 3)
    ell = gaussian_width(sensitivity_polytope(w), 20_000, 3).value
    assert rep.ell_star.value == ell
    assert rep.proj_upper == pytest.approx(rep.sigma * ell / (2 * 0.01), rel=1e-15)
    assert rep.qr_lower == pytest.approx(rep.sigma * ell**2 / (8 * math.log(8) ** 4 * 0.1), rel=1e-15)
    assert rep.regime_ratio == pytest.approx(ell / 4, rel=1e-15)


def test_padding_scaler():
    assert padding_scaler(100.0, 0.2, 0.05) == pytest.approx(400.0)
    for args in [(1.0, 0.1, 0.2), (1.0, 0.1, 0.0), (1.0, 1.0, 0.5), (-1.0, 0.2, 0.1)]:
        with pytest.raises(DomainError):
            padding_scaler(*args)


# -- sections and Gelfand probes ----------------------------------------------------


def test_ball_probes_are_exact():
    for k in range(1, 9):
        p = gelfand_probe(ConvexBody.ball(8), k, subspaces=4, seed=k)
        assert p.ratio == pytest.approx(math.sqrt(9 - k), abs=1e-12)


def test_cross_polytope_coordinate_sections():
    body = ConvexBody.cross_polytope(8)
    for k in range(1, 9):
        B = SubspaceBasis.coordinate(8, list(range(9 - k)))
        p = gelfand_probe(body, k, bases=[B])
        # The polar is the cube [-1, 1]^8; a coordinate section has diameter sqrt(9 - k).
        assert p.diameter == pytest.approx(math.sqrt(9 - k), abs=1e-12)
        assert p.ratio == pytest.approx(1.0, abs=1e-9)


def test_section_of_square_polar():
    # K = conv{±e1, ±e2} has polar [-1, 1]^2; the diagonal line meets it at ±(1, 1).
    body = ConvexBody.cross_polytope(2)
    B = SubspaceBasis(np.array([[1.0], [1.0]]) / math.sqrt(2))
    diam, verts = section_diameter(body, B)
    assert diam == pytest.approx(math.sqrt(2), rel=1e-15)


def test_zonotope_route_matches_halfspace_route(rng):
    for m in (3, 5, 6):
        cube = ConvexBody.scaled_cube(m, 0.9)
        vp = to_vpolytope(cube)
        for d in (1, 2, m - 1):
            B = SubspaceBasis.random(m, d, rng)
            a, _ = section_diameter(cube, B)
            b, _ = section_diameter(vp, B)
            assert a == pytest.approx(b, rel=1e-9)


def test_section_vertices_satisfy_constraints(rng):
    A = rng.standard_normal((9, 3))
    V = _section_vertices(A, 1.0)
    assert np.all(np.abs(A @ V.T) <= 1 + 1e-9)
    # Every vertex is tight on at least three constraints.
    assert np.all((np.abs(np.abs(A @ V.T) - 1) <= 1e-9).sum(axis=0) >= 3)
    Z = _zonotope_polar_vertices(rng.standard_normal((5, 3)))
    assert Z.shape[1] == 3


def test_degenerate_section_is_rejected():
    flat = ConvexBody.from_vertices([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(DomainError):
        section_diameter(flat, SubspaceBasis.coordinate(3, [2]))


def test_probe_rules():
    with pytest.raises(DomainError):
        gelfand_probe(ConvexBody.ball(13), 1)
    with pytest.raises(DomainError):
        gelfand_probe(ConvexBody.ball(4), 5)
    with pytest.raises(InputError):
        gelfand_probe(ConvexBody.ball(4), 2, bases=[SubspaceBasis.coordinate(4, [0])])


def test_more_subspaces_never_lower_the_ratio():
    body = ConvexBody.cross_polytope(6)
    a = gelfand_probe(body, 3, subspaces=4, seed=2)
    b = gelfand_probe(body, 3, subspaces=12, seed=2)
    assert b.ratio >= a.ratio
    assert gelfand_probe(body, 3, subspaces=4, seed=2).ratio == a.ratio


def test_cube_probe_in_dimension_twelve_runs():
    p = gelfand_probe(ConvexBody.scaled_cube(12), 6, subspaces=2, seed=0)
    assert 0 < p.ratio < math.inf
