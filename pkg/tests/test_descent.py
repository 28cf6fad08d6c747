import numpy as np
import pytest

from geofam.descent import DescentConfig, coordinate_descent
from geofam.descent import coordinate_gradient, induced_segment
from geofam.descent import multi_start_descent, sweep_order, tree_objective
from geofam.errors import ConfigError
from geofam.family import GeodesicSegment, build_tree, eval_tree
from geofam.manifold import natural_distance, random_spd
from geofam.projection import REVERSE_I, natural_projection
from geofam.projection import reverse_iprojection


def anchors(rng, count, n=5):
  return [random_spd(rng, n) for _ in range(count)]


def test_config_validation():
  assert DescentConfig().validate().coord_tol == 1e-4
  with pytest.raises(ConfigError):
    DescentConfig(coord_tol=0).validate()
  with pytest.raises(ConfigError):
    DescentConfig(max_outer_iters=0).validate()
  with pytest.raises(ConfigError):
    DescentConfig(objective='euclidean').validate()


def test_sweep_order(rng):
  a = anchors(rng, 4, 3)
  assert sweep_order(build_tree(a[:2])) == [0]
  assert sweep_order(build_tree(a[:3])) == [0, 1]
  tree = build_tree(a, 'balanced')
  assert sweep_order(tree) == [0, 1, 2]
  assert sweep_order(tree)[-1] == tree.root.param_index


def test_single_parameter_matches_projection(rng):
  a1, a2 = anchors(rng, 2)
  c = random_spd(rng, 5)
  tree = build_tree([a1, a2])
  res = coordinate_descent(tree, c)
  expected = natural_projection(GeodesicSegment(a1, a2), c)
  assert res.params[0] == pytest.approx(expected.t, abs=1e-8)
  assert res.objective == pytest.approx(expected.objective, rel=1e-8)
  assert res.converged
  assert res.outer_iters <= 2

  cfg = DescentConfig(objective=REVERSE_I)
  res = coordinate_descent(tree, c, cfg)
  expected = reverse_iprojection(GeodesicSegment(a1, a2), c)
  assert res.params[0] == pytest.approx(expected.t, abs=1e-8)
  assert res.method == REVERSE_I


def test_induced_segment(rng):
  tree = build_tree(anchors(rng, 3))
  seg, exact = induced_segment(tree, [0.3, 0.], 0)
  assert exact
  seg, exact = induced_segment(tree, [0.3, 0.5], 0)
  assert not exact
  assert np.allclose(seg.anchor1.array, eval_tree(tree, [0., 0.5]).array)
  assert np.allclose(seg.anchor2.array, eval_tree(tree, [1., 0.5]).array)
  seg, exact = induced_segment(tree, [0.3, 0.5], 1)
  assert exact
  point = eval_tree(tree, [0.3, 0.8])
  assert np.allclose(seg(0.8).array, point.array)


def test_recovers_point_on_family(rng):
  tree = build_tree(anchors(rng, 3))
  c = eval_tree(tree, [0.4, 0.7])
  cfg = DescentConfig(coord_tol=1e-10, max_outer_iters=2000)
  res = coordinate_descent(tree, c, cfg)
  assert res.objective < 1e-6
  assert np.all(np.diff(res.objective_trace) <= 1e-12)


@pytest.mark.parametrize('shape', ['unbalanced', 'balanced'])
def test_monotone_trace(rng, shape):
  tree = build_tree(anchors(rng, 4), shape)
  c = random_spd(rng, 5)
  res = coordinate_descent(tree, c, DescentConfig(max_outer_iters=20))
  assert res.objective_trace[0] == pytest.approx(
      natural_distance(eval_tree(tree, np.zeros(3)), c))
  assert np.all(np.diff(res.objective_trace) <= 1e-12)
  assert len(res.path) == res.outer_iters
  assert res.objective == pytest.approx(
      natural_distance(res.projected, c), rel=1e-9)


def test_gradient_vanishes_at_minimum(rng):
  tree = build_tree(anchors(rng, 3))
  c = random_spd(rng, 5)
  res = coordinate_descent(tree, c, DescentConfig(coord_tol=1e-8,
      max_outer_iters=2000))
  assert res.converged
  assert np.all(np.abs(res.gradient) < 1e-4)
  assert np.allclose(res.gradient, coordinate_gradient(tree, c, res.params))


def test_degenerate_coordinate_skipped(rng):
  tree = build_tree([random_spd(rng, 5, dof=50) for _ in range(3)])
  c = random_spd(rng, 5)
  res = coordinate_descent(tree, c, DescentConfig(max_outer_iters=1),
      start=[0., 1.])
  assert res.skipped[0] == (0,)
  assert res.objective <= res.objective_trace[0]


def test_not_converged_is_reported(rng):
  tree = build_tree(anchors(rng, 3))
  c = random_spd(rng, 5)
  res = coordinate_descent(tree, c, DescentConfig(coord_tol=1e-14,
      max_outer_iters=1))
  assert not res.converged
  assert res.outer_iters == 1
  data = res.to_dict()
  assert data['converged'] is False
  assert len(data['objective_trace']) == 2


def test_bad_start(rng):
  tree = build_tree(anchors(rng, 3))
  with pytest.raises(ValueError):
    coordinate_descent(tree, random_spd(rng, 5), start=[0.])


def test_multi_start(rng):
  tree = build_tree(anchors(rng, 3))
  c = random_spd(rng, 5)
  single = coordinate_descent(tree, c)
  best = multi_start_descent(tree, c, [[1., 1.], [-0.5, 0.5]])
  assert best.objective <= single.objective


def test_tree_objective(rng):
  tree = build_tree(anchors(rng, 3))
  c = random_spd(rng, 5)
  point = eval_tree(tree, [0.2, 0.3])
  assert tree_objective(tree, c, [0.2, 0.3]) == \
      pytest.approx(natural_distance(point, c))
  assert tree_objective(tree, c, [0.2, 0.3], REVERSE_I) > 0
