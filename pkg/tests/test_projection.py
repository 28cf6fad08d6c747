import numpy as np
import pytest

from geofam import projection
from geofam.errors import ConvergenceError, DegenerateFamilyError
from geofam.errors import PreconditionError, RankDeficientError
from geofam.family import GeodesicSegment
from geofam.manifold import natural_distance, random_spd
from geofam.projection import CENTERED, IPROJ, METHODS, NATURAL, REVERSE_I
from geofam.projection import UNCENTERED, SampleCovariance, closed_form_t
from geofam.projection import compress, distance_to_family
from geofam.projection import gaussian_mle_from_data, iprojection
from geofam.projection import kl_gaussian, local_analysis
from geofam.projection import local_analysis_fixture, natural_projection
from geofam.projection import objective_derivatives, optimality_residual
from geofam.projection import orthogonality_residual, project, project_all
from geofam.projection import reverse_iprojection, spectral_loss


def random_segment(rng, n):
  return GeodesicSegment(random_spd(rng, n), random_spd(rng, n))


def grid_minimum(f, lo=-5., hi=5.):
  ts = np.arange(lo, hi, 1e-3)
  t = ts[np.argmin([f(s) for s in ts])]
  fine = np.arange(t - 2e-3, t + 2e-3, 1e-5)
  return fine[np.argmin([f(s) for s in fine])]


def test_idempotence(rng):
  seg = random_segment(rng, 6)
  c = seg(0.37)
  for method, res in project_all(seg, c).items():
    assert res.t == pytest.approx(0.37, abs=1e-8), method
    assert res.method == method
  assert natural_projection(seg, c).objective < 1e-7


def test_idempotence_many(rng):
  worst = 0.
  for _ in range(500):
    seg = random_segment(rng, 10)
    t = rng.uniform(-1., 2.)
    c = seg(t)
    for res in project_all(seg, c).values():
      worst = max(worst, abs(res.t - t))
    assert closed_form_t(seg, c) == pytest.approx(t, abs=1e-8)
  assert worst <= 1e-8


def test_scaling_family_example(diag):
  seg = GeodesicSegment(np.eye(2), np.e * np.eye(2))
  res = natural_projection(seg, diag(np.e ** 2, np.e ** 4))
  assert res.t == pytest.approx(3.)
  assert res.iterations == 0
  rev = reverse_iprojection(seg, diag(np.e ** 2, np.e ** 4))
  assert rev.t == pytest.approx(np.log((np.e ** 2 + np.e ** 4) / 2))
  ipr = iprojection(seg, diag(np.e ** 2, np.e ** 4))
  assert ipr.t == pytest.approx(-np.log((np.e ** -2 + np.e ** -4) / 2))


def test_kl_projection_example(diag):
  seg = GeodesicSegment(np.eye(2), diag(4, 1))
  c = diag(2, 1)
  assert reverse_iprojection(seg, c).t == pytest.approx(0.5, abs=1e-9)
  assert iprojection(seg, c).t == pytest.approx(0.5, abs=1e-9)
  assert natural_projection(seg, c).t == pytest.approx(0.5, abs=1e-9)
  assert objective_derivatives(REVERSE_I, seg, c, 0.)[1] == \
      pytest.approx(2 * np.log(4) ** 2)


@pytest.mark.parametrize('method', METHODS)
def test_matches_grid_search(rng, method):
  seg = random_segment(rng, 8)
  c = random_spd(rng, 8)
  res = project(seg, c, method)
  assert -4.9 < res.t < 4.9
  best = grid_minimum(lambda s: spectral_loss(method, seg, c, s))
  assert res.t == pytest.approx(best, abs=2e-5)
  assert abs(res.residual) <= 1e-8 * max(1., seg.length ** 2)


@pytest.mark.parametrize('method', METHODS)
def test_derivatives_finite_differences(rng, method):
  h = 1e-5
  for _ in range(100):
    seg = random_segment(rng, 8)
    c = random_spd(rng, 8)
    for t in rng.uniform(-2, 2, 20):
      first, second = objective_derivatives(method, seg, c, t)
      fd1 = (spectral_loss(method, seg, c, t + h)
          - spectral_loss(method, seg, c, t - h)) / (2 * h)
      fd2 = (objective_derivatives(method, seg, c, t + h)[0]
          - objective_derivatives(method, seg, c, t - h)[0]) / (2 * h)
      assert abs(fd1 - first) <= 1e-6 * max(abs(first), 1.)
      assert abs(fd2 - second) <= 1e-4 * max(abs(second), 1.)
      assert second > 0


def test_residuals_agree(rng):
  seg = random_segment(rng, 6)
  c = random_spd(rng, 6)
  for method in METHODS:
    for t in (-0.5, 0.2, 1.3):
      trace = optimality_residual(method, seg, c, t)
      inner = orthogonality_residual(seg, c, t, method)
      assert inner == pytest.approx(trace, rel=1e-8, abs=1e-10)
    t = project(seg, c, method).t
    assert abs(orthogonality_residual(seg, c, t, method)) <= \
        1e-8 * max(1., seg.length ** 2)


def test_residuals_vanish_on_family(rng):
  seg = random_segment(rng, 5)
  c = seg(0.6)
  for method in METHODS:
    assert abs(orthogonality_residual(seg, c, 0.6, method)) < 1e-9


def test_closed_form(rng, diag):
  seg = random_segment(rng, 5)
  assert closed_form_t(seg, seg(0.37)) == pytest.approx(0.37, abs=1e-9)
  assert closed_form_t(seg, random_spd(rng, 5)) is None
  a = random_spd(rng, 3)
  c = random_spd(rng, 3)
  scaled = GeodesicSegment(a, 4 * a.array)
  expected = (c.logdet() - a.logdet()) / (3 * np.log(4))
  assert closed_form_t(scaled, c) == pytest.approx(expected)
  assert natural_projection(scaled, c).t == pytest.approx(expected)
  simple = GeodesicSegment(np.eye(2), 4 * np.eye(2))
  assert closed_form_t(simple, diag(2, 8)) == pytest.approx(1.)
  with pytest.raises(DegenerateFamilyError):
    closed_form_t(GeodesicSegment(np.eye(2), diag(2, .5)), diag(1, 3))


def test_degenerate_family(rng):
  a = random_spd(rng, 3)
  for method in METHODS:
    with pytest.raises(DegenerateFamilyError):
      project(GeodesicSegment(a, a), random_spd(rng, 3), method)
  with pytest.raises(ValueError):
    project(random_segment(rng, 3), a, 'euclidean')


def test_inversion_and_reversal(rng):
  seg = random_segment(rng, 6)
  c = random_spd(rng, 6)
  t = natural_projection(seg, c).t
  assert natural_projection(seg.inverse(), c.inverse()).t == \
      pytest.approx(t, abs=1e-8)
  assert natural_projection(seg.reversed(), c).t == \
      pytest.approx(1 - t, abs=1e-8)
  # the KL projections swap under inversion
  assert iprojection(seg.inverse(), c.inverse()).t == \
      pytest.approx(reverse_iprojection(seg, c).t, abs=1e-8)


def test_natural_between_kl_projections(rng):
  between = 0
  for _ in range(500):
    a1, a2, c = local_analysis_fixture(rng, 5)
    seg = GeodesicSegment(a1, a2)
    towards = GeodesicSegment(a1, c)
    c_eps = towards(0.05 / natural_distance(a1, c))
    res = project_all(seg, c_eps)
    lo, hi = sorted((res[REVERSE_I].t, res[IPROJ].t))
    between += lo <= res[NATURAL].t <= hi
  assert between >= 475


def test_kl_gaussian(rng):
  a = random_spd(rng, 4)
  assert kl_gaussian(a, a) == pytest.approx(0., abs=1e-12)
  assert kl_gaussian([[1.]], [[np.e]]) == pytest.approx(1 / (2 * np.e))
  c1, c2 = random_spd(rng, 3), random_spd(rng, 3)
  inv2 = np.linalg.inv(c2.array)
  direct = 0.5 * (np.trace(inv2 @ c1.array) - 3
      + c2.logdet() - c1.logdet())
  assert kl_gaussian(c1, c2) == pytest.approx(direct, rel=1e-10)
  assert kl_gaussian(c2, c1, 'reverse') == pytest.approx(direct, rel=1e-10)
  with pytest.raises(ValueError):
    kl_gaussian(c1, c2, 'sideways')


def test_kl_gaussian_monte_carlo(rng):
  c1, c2 = random_spd(rng, 3), random_spd(rng, 3)
  y = rng.standard_normal((400000, 3)) @ np.linalg.cholesky(c1.array).T

  def logpdf(c):
    ci = np.linalg.inv(c.array)
    return -0.5 * (np.einsum('ij,jk,ik->i', y, ci, y) + c.logdet())

  estimate = np.mean(logpdf(c1) - logpdf(c2))
  assert estimate == pytest.approx(kl_gaussian(c1, c2), rel=0.02)


def test_objective_values(diag):
  seg = GeodesicSegment(np.eye(2), diag(4, 1))
  c = diag(1, 2)
  res = reverse_iprojection(seg, c)
  assert res.objective == pytest.approx(kl_gaussian(c, res.projected))
  res = iprojection(seg, c)
  assert res.objective == pytest.approx(kl_gaussian(res.projected, c))
  res = natural_projection(seg, c)
  assert res.objective == pytest.approx(natural_distance(res.projected, c))
  assert set(res.to_dict()) == {'method', 't', 'objective', 'residual',
      'iterations'}


def test_sample_covariance():
  y = np.array([[1., 2.], [3., 0.], [-1., 1.]])
  c = SampleCovariance.from_samples(y, CENTERED)
  assert c.q == 3
  assert np.allclose(c.array, np.cov(y, rowvar=False))
  u = SampleCovariance.from_samples(y, UNCENTERED)
  assert np.allclose(u.array, y.T @ y / 3)
  assert c.is_full_rank()
  single = SampleCovariance.from_samples(y[:1], UNCENTERED)
  assert not single.is_full_rank()
  with pytest.raises(RankDeficientError):
    single.spd
  with pytest.raises(ValueError):
    SampleCovariance.from_samples(y[:1], CENTERED)
  with pytest.raises(ValueError):
    SampleCovariance(np.eye(2), 3, 'biased')
  unknown = SampleCovariance(np.diag([1., 0.]))
  assert unknown.q is None
  with pytest.raises(RankDeficientError) as e:
    unknown.spd
  assert 'from q=' not in str(e.value)


def test_rank_deficient_projection(rng):
  seg = random_segment(rng, 5)
  c = SampleCovariance.from_samples(rng.standard_normal((3, 5)))
  with pytest.raises(RankDeficientError):
    natural_projection(seg, c)
  with pytest.raises(RankDeficientError):
    reverse_iprojection(seg, c)


def test_mle_example():
  seg = GeodesicSegment(np.eye(2), np.e * np.eye(2))
  res = gaussian_mle_from_data(seg, [1., 2.])
  assert res.t == pytest.approx(np.log(5 / 2.))
  assert res.method == 'mle'


def test_mle_equals_reverse_iprojection(rng):
  for _ in range(100):
    seg = random_segment(rng, 10)
    y = rng.standard_normal((20, 10)) @ np.linalg.cholesky(seg(0.3).array).T
    c = SampleCovariance.from_samples(y, UNCENTERED)
    mle = gaussian_mle_from_data(seg, y)
    assert mle.t == pytest.approx(reverse_iprojection(seg, c).t, abs=1e-6)


def test_mle_few_samples(rng):
  seg = random_segment(rng, 5)
  res = gaussian_mle_from_data(seg, rng.standard_normal(5))
  assert np.isfinite(res.t)
  assert abs(res.residual) <= 1e-8 * max(1., seg.length ** 2)
  with pytest.raises(ValueError):
    gaussian_mle_from_data(seg, np.zeros((0, 5)))


def test_mle_large_sample(rng):
  seg = random_segment(rng, 5)
  y = rng.standard_normal((10000, 5)) @ \
      np.linalg.cholesky(seg.anchor1.array).T
  assert abs(gaussian_mle_from_data(seg, y).t) < 0.1


def test_consistency(rng):
  seg = random_segment(rng, 10)
  truth = seg(0.4)
  factor = np.linalg.cholesky(truth.array)
  medians = []
  for q in (500, 5000, 50000):
    errors = []
    for _ in range(20):
      y = rng.standard_normal((q, 10)) @ factor.T
      res = natural_projection(seg, SampleCovariance.from_samples(y))
      errors.append(natural_distance(res.projected, truth))
    medians.append(np.median(errors))
  assert medians[0] >= medians[1] >= medians[2]
  assert medians[2] < 0.05


def test_minimize_convex():
  t, g, iterations = projection.minimize_convex(
      lambda t: (2 * (t - 7.5), 2.), 1.)
  assert t == pytest.approx(7.5)
  assert iterations >= 1
  t, _, _ = projection.minimize_convex(
      lambda t: (np.exp(t) - 0.5, np.exp(t)), 1.)
  assert t == pytest.approx(np.log(0.5))
  with pytest.raises(ConvergenceError):
    projection.minimize_convex(lambda t: (1., 0.), 1., limit=100.)


def test_local_analysis(rng):
  a1, a2, c = local_analysis_fixture(rng, 10)
  res = local_analysis(a1, a2, c, np.linspace(0, 0.1, 21))
  assert len(res.rows()) == 21
  assert abs(res.delta_hat[0]) < 1e-9
  assert abs(res.delta_check[0]) < 1e-9
  assert np.all(np.abs(res.delta_natural) < 1e-8)
  hat, check = res.curvature_fit()
  expected = res.hat_second_deriv / 2
  assert hat == pytest.approx(expected, rel=0.05)
  assert check == pytest.approx(-expected, rel=0.05)


def test_local_analysis_precondition(rng):
  a1, a2 = random_spd(rng, 4), random_spd(rng, 4)
  with pytest.raises(PreconditionError):
    local_analysis(a1, a2, random_spd(rng, 4), [0., .05])


def test_compress_and_distance(rng):
  a1, a2 = random_spd(rng, 4), random_spd(rng, 4)
  seg = GeodesicSegment(a1, a2)
  stored = compress(seg, [seg(0.2), seg(1.5), random_spd(rng, 4)])
  assert [r.t for r in stored[:2]] == [pytest.approx(0.2, abs=1e-8),
      pytest.approx(1.5, abs=1e-8)]
  assert stored[0].objective < 1e-7
  assert stored[2].objective > 0
  c = random_spd(rng, 4)
  assert distance_to_family(seg, c) == \
      pytest.approx(natural_projection(seg, c).objective)
