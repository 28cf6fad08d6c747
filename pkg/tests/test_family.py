import concurrent.futures
import json

import numpy as np
import pytest

from geofam import util
from geofam.errors import ConfigError, DimensionError
from geofam.family import GeodesicSegment, ScaledFamily, build_tree
from geofam.family import distinct_orderings, eval_scaled, eval_segment
from geofam.family import eval_tree, flat_point, load_family, parse_shape
from geofam.manifold import natural_distance, random_spd


def close(a, b, tol=1e-9):
  a, b = np.asarray(a), np.asarray(b)
  return np.linalg.norm(a - b) <= tol * np.linalg.norm(b)


def test_segment_examples(diag):
  seg = GeodesicSegment(np.eye(2), diag(2, 3))
  assert close(eval_segment(seg, 0), np.eye(2))
  assert close(eval_segment(seg, 1), diag(2, 3))
  assert close(seg(2), diag(4, 9))
  assert close(seg(-1), diag(.5, 1 / 3.))
  assert seg.length == pytest.approx(np.hypot(np.log(2), np.log(3)))


def test_segment_symmetric_and_inverse(rng):
  a1, a2 = random_spd(rng, 5), random_spd(rng, 5)
  seg = GeodesicSegment(a1, a2)
  for t in (-1., 0.4, 2.5):
    assert close(seg.reversed()(1 - t), seg(t))
    assert close(seg.inverse()(t), np.linalg.inv(seg(t).array))


def test_segment_degenerate_and_scaling(rng):
  a = random_spd(rng, 4)
  assert GeodesicSegment(a, a).is_degenerate()
  assert not GeodesicSegment(a, 2 * a.array).is_degenerate()
  assert GeodesicSegment(a, 3 * a.array).scaling_factor() == \
      pytest.approx(3)
  assert GeodesicSegment(a, random_spd(rng, 4)).scaling_factor() is None


def test_scaled_family(diag, rng):
  fam = ScaledFamily(diag(1, 2), 2.)
  assert fam.num_params == 1
  assert close(eval_scaled(fam, 0), diag(1, 2))
  assert close(eval_scaled(fam, 3), diag(8, 16))
  assert close(fam(-1), diag(.5, 1))
  with pytest.raises(TypeError):
    eval_scaled(fam, 1., 0.5)

  seg = GeodesicSegment(random_spd(rng, 3), random_spd(rng, 3))
  fam = ScaledFamily(seg, 1.5)
  assert fam.num_params == 2
  assert close(eval_scaled(fam, 2., 0.3), 1.5 ** 2 * seg(0.3).array)
  with pytest.raises(TypeError):
    eval_scaled(fam, 1.)
  with pytest.raises(ValueError):
    ScaledFamily(diag(1, 2), 0.)


def test_flat_point(diag):
  assert close(flat_point(np.eye(2), diag(1, 4), .5), diag(1, 2.5))
  assert flat_point(np.eye(2), diag(4, .25), 2.) is None
  assert flat_point(np.eye(2), diag(4, .25), -1.) is None


def test_two_anchor_tree(rng):
  a1, a2 = random_spd(rng, 4), random_spd(rng, 4)
  tree = build_tree([a1, a2])
  assert tree.num_params == 1
  assert len(tree) == 1
  assert tree.render() == '(1,2)'
  seg = GeodesicSegment(a1, a2)
  assert close(eval_tree(tree, [0.7]), seg(0.7))
  # swapping the anchors reverses the parameter
  swapped = build_tree([a2, a1])
  assert close(eval_tree(swapped, [0.3]), seg(0.7))


def test_unbalanced_tree(rng):
  a1, a2, a3 = (random_spd(rng, 4) for _ in range(3))
  tree = build_tree([a1, a2, a3], 'unbalanced')
  assert tree.shape == 'unbalanced'
  assert tree.num_params == 2
  assert tree.render() == '((1,2),3)'
  assert tree.node(0).render() == '(1,2)'
  assert tree.node(1) is tree.root
  seg = GeodesicSegment(a1, a2)
  assert close(eval_tree(tree, [0.4, 0.]), seg(0.4))
  assert close(eval_tree(tree, [-3., 1.]), a3.array)
  inner = seg(0.4)
  assert close(eval_tree(tree, [0.4, 0.6]), GeodesicSegment(inner, a3)(0.6))
  assert [side for _, side in tree.ancestors(0)] == ['left']
  assert list(tree.ancestors(1)) == []


def test_balanced_tree(rng):
  anchors = [random_spd(rng, 3) for _ in range(4)]
  tree = build_tree(anchors, 'balanced')
  assert tree.render() == '((1,2),(3,4))'
  assert tree.num_params == 3
  assert tree.node(0).render() == '(1,2)'
  assert tree.node(1).render() == '(3,4)'
  assert tree.node(2) is tree.root
  left = GeodesicSegment(anchors[0], anchors[1])(0.2)
  right = GeodesicSegment(anchors[2], anchors[3])(0.9)
  assert close(eval_tree(tree, [0.2, 0.9, 0.5]),
      GeodesicSegment(left, right)(0.5))
  a = random_spd(rng, 3)
  same = build_tree([a, a, a, a], 'balanced')
  assert close(eval_tree(same, [1.3, -0.2, 0.6]), a.array)


def test_mixed_tree(rng):
  a1, a2, a3 = (random_spd(rng, 3) for _ in range(3))
  tree = build_tree([a1, a2, a3], '(1,(2,3))')
  assert tree.shape == 'mixed'
  assert tree.node(0).render() == '(2,3)'
  inner = GeodesicSegment(a2, a3)(0.25)
  assert close(eval_tree(tree, [0.25, 0.5]), GeodesicSegment(a1, inner)(0.5))
  assert build_tree([a1, a2, a3], '((1,2),3)').shape == 'unbalanced'


def test_tree_points_are_spd(rng):
  anchors = [random_spd(rng, 5) for _ in range(4)]
  for shape in ('unbalanced', 'balanced'):
    tree = build_tree(anchors, shape)
    for _ in range(20):
      point = eval_tree(tree, rng.uniform(-3, 3, tree.num_params))
      assert point.eigvals[-1] > 0


def test_tree_errors(rng):
  a = [random_spd(rng, 3) for _ in range(3)]
  with pytest.raises(ValueError):
    build_tree(a[:1])
  with pytest.raises(ValueError):
    build_tree(a, 'balanced')
  with pytest.raises(ValueError):
    build_tree(a, '((1,2),2)')
  with pytest.raises(ValueError):
    build_tree(a, '(1,2,3)')
  with pytest.raises(ValueError):
    build_tree(a + [a[0]], '((1,2),3)')
  with pytest.raises(DimensionError):
    build_tree([a[0], random_spd(rng, 4)])
  tree = build_tree(a)
  with pytest.raises(DimensionError):
    eval_tree(tree, [0.5])


def test_parse_shape():
  assert parse_shape('((1,2),3)') == ((1, 2), 3)
  assert parse_shape(' ( (1, 2), (3, 4) ) ') == ((1, 2), (3, 4))
  with pytest.raises(ValueError):
    parse_shape('1')
  with pytest.raises(ValueError):
    parse_shape('((1,2),')
  with pytest.raises(ValueError):
    parse_shape('((1,True),3)')


def test_distinct_orderings(rng):
  assert distinct_orderings(2) == ['(1,2)']
  assert distinct_orderings(3) == ['((1,2),3)', '((1,3),2)', '((2,3),1)']
  assert len(distinct_orderings(4)) == 12
  anchors = [random_spd(rng, 3) for _ in range(3)]
  params = [0.3, 0.6]
  points = [eval_tree(build_tree(anchors, s), params)
      for s in distinct_orderings(anchors)]
  assert natural_distance(points[0], points[1]) > 1e-6
  assert natural_distance(points[0], points[2]) > 1e-6


def test_pencil_cache_threads(rng):
  anchors = [random_spd(rng, 4) for _ in range(3)]
  tree = build_tree(anchors)
  grid = [(t1, t2) for t1 in np.linspace(-1, 2, 7)
      for t2 in np.linspace(-1, 2, 7)]
  serial = [eval_tree(tree, p).array for p in grid]
  fresh = build_tree(anchors)
  with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
    threaded = list(pool.map(lambda p: eval_tree(fresh, p).array, grid))
  for a, b in zip(serial, threaded):
    assert np.array_equal(a, b)


def test_load_family(tmp_path, rng, diag):
  a1, a2 = random_spd(rng, 3), random_spd(rng, 3)
  util.write_matrix(str(tmp_path / 'a1.csv'), a1)
  sub = tmp_path / 'sub'
  sub.mkdir()
  util.write_matrix(str(sub / 'a2.json'), a2)
  path = tmp_path / 'family.json'
  path.write_text(json.dumps({'shape': '((1,2),3)',
      'anchors': ['a1.csv', 'sub/a2.json', diag(1, 2, 3).tolist()]}))
  tree = load_family(str(path))
  assert tree.num_params == 2
  assert close(eval_tree(tree, [1., 0.]), a2.array)
  assert close(eval_tree(tree, [0., 1.]), diag(1, 2, 3))


def test_load_family_errors(tmp_path, diag):
  path = tmp_path / 'family.json'
  path.write_text(json.dumps({'anchors': [diag(1, 2).tolist()] * 2,
      'order': 1}))
  with pytest.raises(ConfigError):
    load_family(str(path))
  path.write_text(json.dumps({'anchors': [diag(1, 2).tolist()] * 3,
      'shape': 'balanced'}))
  with pytest.raises(ConfigError):
    load_family(str(path))
  path.write_text('{not json')
  with pytest.raises(ConfigError):
    load_family(str(path))
