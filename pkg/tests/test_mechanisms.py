import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpgeom.errors import DomainError, InputError
from dpgeom.geometry import ConvexBody, lp_vertex_oracle
from dpgeom.mechanisms import (
    PrivacyParams,
    derive_seed,
    exact_answers,
    exact_mean,
    gaussian_mechanism,
    gaussian_meanpoint,
    gaussian_query_release,
    meanpoint_from_query_release,
    measure_error,
    projection_mechanism,
    projection_meanpoint,
    projection_query_release,
    query_release_from_meanpoint,
    sample_complexity_search,
    sigma,
)
from dpgeom.workload import Database, caratheodory_decompose, evaluate, one_way_marginals, random_workload

P = PrivacyParams(1.0, 1e-6)


def test_sigma_values():
    assert sigma(1.0, math.exp(-0.5)) == 1.5
    assert sigma(2.0, math.exp(-2.0)) == pytest.approx((0.5 * math.sqrt(2) + 2) / 2, rel=1e-15)
    for bad in [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, 1.0), (math.inf, 0.1)]:
        with pytest.raises(DomainError):
            sigma(*bad)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1e-12, 0.5), st.floats(1.01, 4))
def test_sigma_is_decreasing(eps, delta, f):
    assert sigma(eps * f, delta) < sigma(eps, delta)
    assert sigma(eps, delta / f) > sigma(eps, delta)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, t) for t in range(1000)}) == 1000
    assert derive_seed(1, 2) != derive_seed(2, 1)


def test_gaussian_mechanism_with_fixed_noise():
    db = Database.from_points([[0.6, 0.0], [0.0, 0.8]])
    z = np.array([1.0, -2.0])
    out = gaussian_mechanism(db, P, 1.0, 0, noise=z)
    np.testing.assert_allclose(out.output, [0.3, 0.4] + P.sigma / 2 * z)
    assert out.noise_scale == P.sigma / 2


def test_gaussian_mechanism_checks_inputs():
    with pytest.raises(DomainError):
        gaussian_mechanism(Database.from_points([[2.0, 0.0]]), P, 1.0, 0)
    with pytest.raises(InputError):
        gaussian_mechanism(Database.from_elements([0]), P, 1.0, 0)
    with pytest.raises(DomainError):
        gaussian_mechanism(Database.from_points([[0.1, 0.0]]), P, 0.0, 0)


def test_gaussian_noise_statistics():
    db = Database.from_points(np.zeros((1, 4)), [50])
    outs = np.array([gaussian_mechanism(db, P, 1.0, s).output for s in range(4000)])
    sd = outs.std(axis=0, ddof=1)
    np.testing.assert_allclose(sd, P.sigma / 50, rtol=0.06)


def test_projection_mechanism_shares_noise_and_lands_in_body():
    body = ConvexBody.cross_polytope(8)
    db = Database.from_points(np.eye(8)[:1], [5])
    g = gaussian_mechanism(db, P, 1.0, 7)
    p = projection_mechanism(body, db, P, 7)
    np.testing.assert_array_equal(p.noisy, g.output)
    assert np.abs(p.output).sum() <= 1 + 1e-12
    assert np.linalg.norm(p.output - db.mean()) <= np.linalg.norm(g.output - db.mean())


def test_projection_mechanism_rules():
    with pytest.raises(DomainError):
        projection_mechanism(ConvexBody.ball(3, 2.0), Database.from_points([[0.1, 0, 0]]), P, 0)
    with pytest.raises(DomainError):
        projection_mechanism(ConvexBody.cross_polytope(2), Database.from_points([[0.7, 0.7]]), P, 0)


def test_projection_error_never_exceeds_gaussian_error(rng):
    body = ConvexBody.from_vertices(rng.standard_normal((6, 4)))
    body = body.scaled(1.0 / body.diameter())
    v = lp_vertex_oracle(body, rng.standard_normal(4))
    db = Database.from_points(np.vstack([v, -0.5 * v]), [3, 1])
    for s in range(200):
        p = projection_mechanism(body, db, P, s)
        x = db.mean()
        assert np.linalg.norm(p.output - x) <= np.linalg.norm(p.noisy - x) + 1e-5


# -- reductions ----------------------------------------------------------------


def test_query_release_from_exact_mean_is_exact(rng):
    w = random_workload(5, 12, rng)
    db = Database.from_elements(rng.integers(0, 12, size=30))
    np.testing.assert_allclose(query_release_from_meanpoint(w, exact_mean, db), evaluate(w, db), atol=1e-14)


def test_query_release_error_is_meanpoint_error():
    w = one_way_marginals(4)
    db = Database.from_elements([3, 3, 9])
    out = query_release_from_meanpoint(w, gaussian_meanpoint(P), db, seed=5)
    noise = gaussian_mechanism(Database.from_points(w.matrix[:, [3, 3, 9]].T / 2), P, 1.0, 5).output
    np.testing.assert_allclose(out, 2 * noise, atol=1e-14)


def test_query_release_wrappers_handle_empty_databases():
    w = one_way_marginals(2)
    empty = Database.from_elements([])
    np.testing.assert_array_equal(gaussian_query_release(w, P)(empty, 0), np.zeros(2))
    np.testing.assert_array_equal(projection_query_release(w, P)(empty, 0), np.zeros(2))
    np.testing.assert_array_equal(exact_answers(w)(empty), np.zeros(2))


def test_meanpoint_reduction_is_unbiased_with_exact_answers(rng):
    w = random_workload(3, 6, rng)
    pts = np.array([w.matrix[:, j] / math.sqrt(3) * s for j, s in [(0, 1), (2, -1), (4, 0.5)]])
    db = Database.from_points(pts)
    combos = [caratheodory_decompose(w, p) for p in db.points]
    outs = np.array([meanpoint_from_query_release(w, exact_answers(w), db, s, combos) for s in range(6000)])
    se = outs.std(axis=0, ddof=1) / math.sqrt(len(outs))
    assert np.all(np.abs(outs.mean(axis=0) - db.mean()) <= 4 * se + 1e-12)


def test_meanpoint_reduction_rejects_element_databases():
    w = one_way_marginals(2)
    with pytest.raises(InputError):
        meanpoint_from_query_release(w, exact_answers(w), Database.from_elements([0]), 0)


# -- harness -----------------------------------------------------------------------


def test_exact_mechanism_has_zero_error():
    body = ConvexBody.cross_polytope(3)
    assert measure_error(body, exact_mean, 10, trials=5).rms_error == 0.0


def test_gaussian_error_matches_formula():
    m, n = 8, 40
    est = measure_error(ConvexBody.ball(m), gaussian_meanpoint(P), n, trials=4000, seed=2)
    truth = P.sigma * math.sqrt(m) / n
    assert abs(est.rms_error - truth) <= 4 * est.stderr


def test_workload_error_normalization():
    w = one_way_marginals(3)
    est = measure_error(w, gaussian_query_release(w, P), 50, trials=3000, seed=1)
    # Each answer carries noise sqrt(m) * sigma / n, so ||.||^2/m has mean m*sigma^2/n^2.
    truth = math.sqrt(3) * P.sigma / 50
    assert abs(est.rms_error - truth) <= 4 * est.stderr


@pytest.mark.parametrize("adversary", ["single-vertex", "random-vertices", "max-width-direction"])
def test_adversaries_run_on_bodies_and_workloads(adversary):
    body = ConvexBody.scaled_cube(4)
    w = one_way_marginals(3)
    a = measure_error(body, gaussian_meanpoint(P), 20, 20, adversary, seed=3)
    b = measure_error(w, gaussian_query_release(w, P), 20, 20, adversary, seed=3)
    assert a.adversary == adversary and a.rms_error > 0 and b.rms_error > 0
    assert measure_error(body, gaussian_meanpoint(P), 20, 20, adversary, seed=3).rms_error == a.rms_error


def test_unknown_adversary_and_bad_sizes():
    with pytest.raises(DomainError):
        measure_error(ConvexBody.ball(2), exact_mean, 5, 5, "worst-case")
    with pytest.raises(DomainError):
        measure_error(ConvexBody.ball(2), exact_mean, 0, 5)


def test_error_is_monotone_in_n():
    body = ConvexBody.cross_polytope(16)
    mech = projection_meanpoint(body, P)
    errs = [measure_error(body, mech, n, 100, seed=4).rms_error for n in (20, 40, 80, 160)]
    assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_sample_complexity_search_on_exact_mechanism():
    res = sample_complexity_search(ConvexBody.ball(3), exact_mean, 0.1, trials=3)
    assert res.n == 1 and res.error_below is None


def test_sample_complexity_search_brackets_threshold():
    body = ConvexBody.ball(4)
    res = sample_complexity_search(body, gaussian_meanpoint(P), 0.2, trials=300, seed=8)
    assert res.error_at_n <= 0.2 < res.error_below
    assert res.n == pytest.approx(P.sigma * 2 / 0.2, rel=0.1)


def test_sample_complexity_search_reports_cap():
    res = sample_complexity_search(ConvexBody.ball(4), gaussian_meanpoint(P), 0.01, trials=5, n_cap=64)
    assert res.unbounded and res.n is None
