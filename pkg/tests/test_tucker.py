import numpy as np
import pytest

from crepcond.crep import (
    CertificationError,
    RankHypothesisError,
    certify_crep,
    condition_numbers,
    evaluate_blocks,
    solution_map_derivative,
)
from crepcond.linalg import numerical_rank
from crepcond.tensor import TuckerPoint, flatten
from crepcond.tucker import (
    TuckerCrepConfig,
    build_tucker_crep,
    closed_form_kappa_core,
    closed_form_kappa_factor,
    cross_validate,
    expected_kappa_all,
    random_orthogonal,
    random_stiefel,
    random_tucker_point,
    regauge,
)


def diag_core_point(sigmas=(2.0, 0.5), shape=(4, 3), seed=50):
    rng = np.random.default_rng(seed)
    core = np.diag(sigmas)
    factors = tuple(random_stiefel(rng, n, 2) for n in shape)
    return TuckerPoint(core=core, factors=factors)


def test_config_validates_output_variable():
    point = random_tucker_point((4, 3), (2, 2), 51)
    TuckerCrepConfig(point, "core")
    TuckerCrepConfig(point, 1)
    with pytest.raises(ValueError):
        TuckerCrepConfig(point, 2)
    with pytest.raises(ValueError):
        TuckerCrepConfig(point, "U1")


def test_build_dimensions_factor_output():
    point = random_tucker_point((4, 3), (2, 2), 52)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, 0))
    # input: fixed-multilinear-rank tangent, 4 + 4 + 2; output: Stiefel
    # tangent of St(4,2); latent: core plus Stiefel tangent of St(3,2)
    assert tuple(problem.dims) == (10, 5, 7, 12)
    cert = certify_crep(problem, pt, n_samples=2, seed=0)
    assert cert.passed
    # kernel of the dependent blocks is the orthogonal gauge, dim 1 + 1
    assert cert.nullity_yz == 2


def test_build_residual_vanishes_at_point():
    point = random_tucker_point((5, 4, 3), (3, 2, 2), 53)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, "core"))
    assert np.linalg.norm(problem.residual(pt.x, pt.y, pt.z)) <= 1e-12 * problem.scale


def test_build_core_output_with_square_factors_certifies():
    point = random_tucker_point((2, 2, 2), (2, 2, 2), 54)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, "core"))
    cert = certify_crep(problem, pt, n_samples=2, seed=0)
    assert cert.passed
    # all gauge freedom lives in the latent factors: 3 * (2*1/2)
    assert cert.nullity_yz == 3


def test_closed_form_factor_square_branch():
    point = random_tucker_point((3, 4), (3, 3), 55)
    assert closed_form_kappa_factor(point.core, 0, 3) == 0.0


def test_closed_form_factor_diagonal_core():
    core = np.diag([2.0, 0.5])
    assert closed_form_kappa_factor(core, 0, 4) == pytest.approx(2.0)
    assert closed_form_kappa_factor(core, 1, 3) == pytest.approx(2.0)


def test_closed_form_factor_rejects_deficient_core():
    core = np.array([[1.0, 0.0], [1e-15, 0.0]])
    with pytest.raises((RankHypothesisError, ValueError)):
        closed_form_kappa_factor(core, 0, 4)


def test_closed_form_matches_pipeline_on_random_core():
    point = random_tucker_point((5, 4, 3), (3, 2, 2), 56)
    for d in range(3):
        problem, pt = build_tucker_crep(TuckerCrepConfig(point, d))
        report = condition_numbers(problem, pt, n_samples=1, seed=0)
        closed = closed_form_kappa_factor(point.core, d, point.shape[d])
        assert abs(report.kappa_y - closed) <= 1e-6 * (1 + closed)


def test_closed_form_core_is_one_and_pipeline_agrees():
    assert closed_form_kappa_core() == 1.0
    point = random_tucker_point((4, 3), (2, 2), 57)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, "core"))
    report = condition_numbers(problem, pt, n_samples=1, seed=0)
    assert abs(report.kappa_y - 1.0) <= 1e-6


def test_core_radial_direction_is_extremal():
    # the direction along the tensor itself achieves ratio 1 exactly
    point = random_tucker_point((4, 3), (2, 2), 58)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, "core"))
    blocks = evaluate_blocks(problem, pt)
    dh = solution_map_derivative(blocks)
    cx = problem.x_chart(pt.x, pt.y, pt.z)
    radial = cx.basis.T @ pt.x
    ratio = np.linalg.norm(dh @ radial) / np.linalg.norm(radial)
    assert abs(ratio - 1.0) <= 1e-8


def test_cross_validate_diagonal_core():
    cv = cross_validate(diag_core_point(), n_cert_samples=1, seed=0)
    by_var = {e.variable: e for e in cv.entries}
    assert by_var["core"].kappa_closed == 1.0
    assert by_var["U1"].kappa_closed == pytest.approx(2.0)
    assert by_var["U2"].kappa_closed == pytest.approx(2.0)
    assert cv.kappa_all_expected == pytest.approx(2.0)
    assert cv.max_rel_diff <= 1e-6


def test_cross_validate_all_square():
    point = random_tucker_point((2, 2), (2, 2), 59)
    cv = cross_validate(point, n_cert_samples=1, seed=0)
    for entry in cv.entries:
        expect = 1.0 if entry.variable == "core" else 0.0
        assert entry.kappa_general == pytest.approx(expect, abs=1e-8)
    assert cv.kappa_all_general == pytest.approx(1.0, abs=1e-8)


def test_cross_validate_tiny_gap_not_ill_conditioned():
    cv = cross_validate(diag_core_point(sigmas=(1.0, 0.999)), n_cert_samples=1, seed=0)
    by_var = {e.variable: e for e in cv.entries}
    assert by_var["U1"].kappa_general == pytest.approx(1.0 / 0.999, rel=1e-6)
    assert by_var["U1"].kappa_general < 1.1  # small gap does not blow up kappa
    assert cv.max_rel_diff <= 1e-6


def test_cross_validate_raises_on_certificate_failure(monkeypatch):
    point = random_tucker_point((4, 3), (2, 2), 60)
    from crepcond import tucker as tucker_mod

    real = tucker_mod.condition_numbers

    def always_failing(problem, pt, rtol=None, **kwargs):
        report = real(problem, pt, rtol, n_samples=0)
        object.__setattr__(report.certificate, "passed", False)
        return report

    monkeypatch.setattr(tucker_mod, "condition_numbers", always_failing)
    with pytest.raises(CertificationError):
        cross_validate(point, n_cert_samples=0)


def test_gauge_invariance_of_kappas():
    point = random_tucker_point((4, 3), (2, 2), 61)
    other = regauge(point, 62)
    for var in ["core", 0, 1]:
        r1 = condition_numbers(*build_tucker_crep(TuckerCrepConfig(point, var)), n_samples=0)
        r2 = condition_numbers(*build_tucker_crep(TuckerCrepConfig(other, var)), n_samples=0)
        assert abs(r1.kappa_y - r2.kappa_y) <= 1e-8 * (1 + r1.kappa_y)
        assert abs(r1.kappa_yz - r2.kappa_yz) <= 1e-8 * (1 + r1.kappa_yz)


def test_scale_covariance():
    point = random_tucker_point((4, 3), (2, 2), 63)
    kappa1 = closed_form_kappa_factor(point.core, 0, 4)
    for alpha in (0.5, 4.0):
        scaled = TuckerPoint(core=alpha * point.core, factors=point.factors)
        problem, pt = build_tucker_crep(TuckerCrepConfig(scaled, 0))
        report = condition_numbers(problem, pt, n_samples=0)
        assert report.kappa_y == pytest.approx(kappa1 / alpha, rel=1e-8)
        problem_c, pt_c = build_tucker_crep(TuckerCrepConfig(scaled, "core"))
        report_c = condition_numbers(problem_c, pt_c, n_samples=0)
        assert report_c.kappa_y == pytest.approx(1.0, abs=1e-8)


def test_monotonicity_specialization():
    point = random_tucker_point((5, 4, 3), (3, 2, 2), 64)
    cv = cross_validate(point, n_cert_samples=0, seed=0)
    for entry in cv.entries:
        assert entry.kappa_general <= cv.kappa_all_general + 1e-8 * (1 + cv.kappa_all_general)
    assert cv.kappa_all_expected == pytest.approx(expected_kappa_all(point), rel=1e-12)


def test_combined_kappa_equals_max_of_individuals():
    point = random_tucker_point((5, 4, 3), (3, 2, 2), 65)
    cv = cross_validate(point, n_cert_samples=0, seed=0)
    assert cv.rel_diff_all <= 1e-6


def test_random_tucker_point_validation():
    with pytest.raises(ValueError):
        random_tucker_point((4, 3), (2,), 0)
    with pytest.raises(ValueError):
        random_tucker_point((4, 3), (5, 2), 0)
    with pytest.raises(ValueError):
        random_tucker_point((4, 3), (2, 1), 0)  # not an achievable multilinear rank
    point = random_tucker_point((4, 3), (2, 2), 66, min_core_sigma=0.1)
    for d in range(2):
        s = np.linalg.svd(flatten(point.core, d), compute_uv=False)
        assert s[-1] >= 0.1


def test_random_orthogonal_is_orthogonal():
    q = random_orthogonal(67, 4)
    assert np.linalg.norm(q.T @ q - np.eye(4)) <= 1e-12


def test_rank_certificate_constancy_across_gauge():
    # ranks are gauge invariant: the same instance in two gauges certifies identically
    point = random_tucker_point((4, 3), (2, 2), 68)
    other = regauge(point, 69)
    c1 = certify_crep(*build_tucker_crep(TuckerCrepConfig(point, 0)), n_samples=1, seed=0)
    c2 = certify_crep(*build_tucker_crep(TuckerCrepConfig(other, 0)), n_samples=1, seed=0)
    assert (c1.r, c1.k, c1.nullity_yz) == (c2.r, c2.k, c2.nullity_yz)


def test_x_retraction_stays_on_manifold():
    point = random_tucker_point((4, 3), (2, 2), 70)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, 0))
    rng = np.random.default_rng(71)
    dx = 1e-3 * rng.standard_normal(pt.x.size)
    moved = problem.x_retract(pt.x, dx)
    m = moved.reshape(4, 3)
    assert numerical_rank(m).rank == 2


def test_core_output_near_degenerate_gap_pipeline_vs_minnorm():
    # With nearly equal core singular values, a latent direction nearly
    # coincides with the span of the core block; the elimination pipeline
    # honestly reports that it cannot certify consistency, while the
    # min-norm route stays robust and still returns kappa(core) = 1.
    from crepcond.crep import solution_map_derivative, solution_map_derivative_minnorm
    from crepcond.linalg import InconsistentSystemError, spectral_norm

    point = diag_core_point(sigmas=(1.0, 1.0 - 1e-8), seed=90)
    problem, pt = build_tucker_crep(TuckerCrepConfig(point, "core"))
    blocks = evaluate_blocks(problem, pt)
    with pytest.raises(InconsistentSystemError):
        solution_map_derivative(blocks)
    dh = solution_map_derivative_minnorm(blocks)
    assert spectral_norm(dh) == pytest.approx(1.0, rel=1e-8)
