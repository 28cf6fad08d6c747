'''
Geodesic covariance families: the one-parameter segment between two
anchors, the scaled family and recursive p-parameter trees of segments.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import ast
import collections
import itertools
import logging
import os
import threading

import numpy as np

from .errors import ConfigError, DimensionError, GeofamError
from .errors import NotPositiveDefiniteError
from .manifold import SpdMatrix, as_spd, geodesic_point, pencil_decompose

logger = logging.getLogger(__name__)

# pencils kept per internal tree node
PENCIL_CACHE_SIZE = 64


class GeodesicSegment(object):
  '''
  The one-parameter family t -> A1^1/2 (A1^-1/2 A2 A1^-1/2)^t A1^1/2,
  defined for every real t.
  '''
  def __init__(self, anchor1, anchor2):
    self.anchor1 = as_spd(anchor1)
    self.anchor2 = as_spd(anchor2)
    self.pencil = pencil_decompose(self.anchor1, self.anchor2)

  @property
  def dim(self):
    return self.anchor1.dim

  @property
  def length(self):
    '''
    Natural distance between the anchors.
    '''
    return float(np.sqrt(np.sum(self.pencil.log_lambdas ** 2)))

  def __call__(self, t):
    return eval_segment(self, t)

  def inverse(self):
    '''
    The family of inverted anchors. Its point at t is the inverse of this
    family's point at t.
    '''
    return GeodesicSegment(self.anchor1.inverse(), self.anchor2.inverse())

  def reversed(self):
    return GeodesicSegment(self.anchor2, self.anchor1)

  def is_degenerate(self, tol=1e-12):
    '''
    True when the anchors coincide, so every t gives the same matrix.
    '''
    return self.length <= tol * max(1., np.sqrt(self.dim))

  def scaling_factor(self, tol=1e-10):
    '''
    Returns alpha when anchor2 = alpha * anchor1 (all pencil eigenvalues
    equal), None otherwise.
    '''
    ell = self.pencil.log_lambdas
    if np.ptp(ell) <= tol * max(1., np.max(np.abs(ell))):
      return float(np.exp(np.mean(ell)))
    return None

  def __repr__(self):
    return '<%s.%s at %x: dim %d, length %g>' % (
        self.__module__, type(self).__name__, id(self), self.dim, self.length)


def eval_segment(seg, t):
  return geodesic_point(seg.pencil, t)


class ScaledFamily(object):
  '''
  alpha^s times a base matrix or a base segment. With a segment base the
  family has two parameters, the scale s and the segment parameter t.
  '''
  def __init__(self, base, alpha):
    if not alpha > 0:
      raise ValueError('Scaling constant must be positive, got %r.' % alpha)
    if not isinstance(base, GeodesicSegment):
      base = as_spd(base)
    self.base = base
    self.alpha = float(alpha)

  @property
  def num_params(self):
    return 2 if isinstance(self.base, GeodesicSegment) else 1

  def __call__(self, t_scale, t_inner=None):
    return eval_scaled(self, t_scale, t_inner)


def eval_scaled(fam, t_scale, t_inner=None):
  if isinstance(fam.base, GeodesicSegment):
    if t_inner is None:
      raise TypeError('A segment-based scaled family needs t_inner.')
    inner = eval_segment(fam.base, t_inner)
  else:
    if t_inner is not None:
      raise TypeError('A matrix-based scaled family takes no t_inner.')
    inner = fam.base
  return SpdMatrix((fam.alpha ** t_scale) * inner.array)


def flat_point(A1, A2, t):
  '''
  The straight-line family member (1 - t) A1 + t A2, or None where it leaves
  the cone of SPD matrices.
  '''
  a = (1. - t) * np.asarray(A1) + t * np.asarray(A2)
  try:
    return SpdMatrix(a)
  except NotPositiveDefiniteError:
    return None


class _TreeNode(object):
  parent = None
  param_index = None

  def nodes(self):
    '''
    All internal nodes of this subtree, depth first, left to right.
    '''
    return []

  def render(self):
    return ''.join(self._render([]))


class Leaf(_TreeNode):
  '''
  Tree leaf holding one anchor. `position` is the anchor's 1-based index
  in the list the tree was built from.
  '''
  height = 0

  def __init__(self, anchor, position):
    self.anchor = as_spd(anchor)
    self.position = position

  def leaves(self):
    return [self]

  def evaluate(self, params):
    return self.anchor

  def _render(self, sb):
    sb.append(str(self.position))
    return sb

  def __repr__(self):
    return '<%s.%s at %x: anchor %d>' % (
        self.__module__, type(self).__name__, id(self), self.position)


class Node(_TreeNode):
  '''
  Internal node: the geodesic from the left child's evaluation to the right
  child's evaluation, at parameter `param_index`.
  '''
  def __init__(self, left, right):
    self.left = left
    self.right = right
    left.parent = self
    right.parent = self
    self.height = 1 + max(left.height, right.height)
    self._cache = collections.OrderedDict()
    self._lock = threading.Lock()
    self._below = None

  def leaves(self):
    return self.left.leaves() + self.right.leaves()

  def nodes(self):
    return self.left.nodes() + [self] + self.right.nodes()

  @property
  def children(self):
    return [self.left, self.right]

  def _subtree_indices(self):
    if self._below is None:
      self._below = tuple(n.param_index for n in self.nodes() if n is not self)
    return self._below

  def pencil(self, params):
    '''
    Pencil decomposition between the two children evaluated at `params`,
    cached per distinct setting of the parameters below this node.
    '''
    key = tuple(float(params[i]) for i in self._subtree_indices())
    with self._lock:
      pd = self._cache.get(key)
      if pd is not None:
        self._cache.move_to_end(key)
        return pd
    pd = pencil_decompose(self.left.evaluate(params),
        self.right.evaluate(params))
    with self._lock:
      self._cache[key] = pd
      while len(self._cache) > PENCIL_CACHE_SIZE:
        self._cache.popitem(last=False)
    return pd

  def evaluate(self, params):
    return geodesic_point(self.pencil(params), params[self.param_index])

  def _render(self, sb):
    sb.append('(')
    self.left._render(sb)
    sb.append(',')
    self.right._render(sb)
    sb.append(')')
    return sb

  def __repr__(self):
    return '<%s.%s at %x: t%d, height %d>' % (
        self.__module__, type(self).__name__, id(self),
        self.param_index + 1, self.height)


class FamilyTree(object):
  '''
  A p-parameter covariance family built from pairwise geodesics.

  Parameter indices follow node height: every node of height 1 comes before
  any node of height 2, and so on, ties broken left to right. For an
  unbalanced tree this numbers the spine bottom up; for a balanced tree it is
  level order with the root last.
  '''
  def __init__(self, root, shape):
    if isinstance(root, Leaf):
      raise ValueError('A family tree needs at least two anchors.')
    self.root = root
    self.shape = shape
    leaves = root.leaves()
    dims = set(leaf.anchor.dim for leaf in leaves)
    if len(dims) != 1:
      raise DimensionError('Anchors have different dimensions: %s.'
          % sorted(dims))
    internal = root.nodes()
    order = sorted(range(len(internal)), key=lambda i: internal[i].height)
    for index, i in enumerate(order):
      internal[i].param_index = index
    self._nodes = [internal[i] for i in order]
    self.anchors = [leaf.anchor for leaf in leaves]

  @property
  def dim(self):
    return self.anchors[0].dim

  @property
  def num_params(self):
    return len(self._nodes)

  def node(self, index):
    return self._nodes[index]

  def nodes(self):
    return list(self._nodes)

  def ancestors(self, index):
    '''
    Yields (ancestor, side) pairs from the parent of node `index` up to the
    root, where side is 'left' or 'right' for the branch that was taken.
    '''
    node = self._nodes[index]
    while node.parent is not None:
      parent = node.parent
      yield parent, ('left' if parent.left is node else 'right')
      node = parent

  def render(self):
    return self.root.render()

  def __call__(self, params):
    return eval_tree(self, params)

  def __len__(self):
    return self.num_params

  def __repr__(self):
    return '<%s.%s at %x: %s %s, %d parameters>' % (
        self.__module__, type(self).__name__, id(self), self.shape,
        self.render(), self.num_params)


def eval_tree(tree, params):
  params = np.asarray(params, dtype=float).ravel()
  if params.shape[0] != tree.num_params:
    raise DimensionError('Tree has %d parameters, got %d.'
        % (tree.num_params, params.shape[0]))
  return tree.root.evaluate(params)


def _unbalanced_layout(count):
  layout = 1
  for i in range(2, count + 1):
    layout = (layout, i)
  return layout


def _balanced_layout(positions):
  if len(positions) == 1:
    return positions[0]
  half = len(positions) // 2
  return (_balanced_layout(positions[:half]),
      _balanced_layout(positions[half:]))


def parse_shape(text):
  '''
  Parses a nested-parentheses shape such as "((1,2),3)" into nested tuples
  of 1-based anchor positions.
  '''
  try:
    layout = ast.literal_eval(text)
  except (ValueError, SyntaxError) as e:
    raise ValueError('Cannot parse tree shape %r: %s' % (text, e))
  seen = []

  def check(item):
    if isinstance(item, bool):
      raise ValueError('Invalid leaf %r in shape %r.' % (item, text))
    if isinstance(item, int):
      seen.append(item)
      return
    if not isinstance(item, tuple) or len(item) != 2:
      raise ValueError('Every node of shape %r must join exactly two '
          'subtrees.' % text)
    check(item[0])
    check(item[1])
  check(layout)
  if isinstance(layout, int):
    raise ValueError('A family tree needs at least two anchors.')
  if sorted(seen) != list(range(1, len(seen) + 1)):
    raise ValueError('Shape %r must use the anchor positions 1..%d exactly '
        'once.' % (text, len(seen)))
  return layout


def _count_leaves(layout):
  if isinstance(layout, int):
    return 1
  return _count_leaves(layout[0]) + _count_leaves(layout[1])


def _build(layout, anchors):
  if isinstance(layout, int):
    return Leaf(anchors[layout - 1], layout)
  return Node(_build(layout[0], anchors), _build(layout[1], anchors))


def build_tree(anchors, shape='unbalanced'):
  '''
  Builds a family tree over `anchors`. `shape` is 'unbalanced',
  'balanced' or an explicit shape string such as "((1,2),(3,4))".
  '''
  anchors = [as_spd(a) for a in anchors]
  count = len(anchors)
  if count < 2:
    raise ValueError('A family tree needs at least two anchors, got %d.'
        % count)
  if shape == 'unbalanced':
    layout = _unbalanced_layout(count)
  elif shape == 'balanced':
    if count & (count - 1):
      raise ValueError('A balanced tree needs a power-of-two number of '
          'anchors, got %d.' % count)
    layout = _balanced_layout(list(range(1, count + 1)))
  else:
    layout = parse_shape(shape)
    used = _count_leaves(layout)
    if used != count:
      raise ValueError('Shape %r names %d anchors, %d were given.'
          % (shape, used, count))
    if layout == _unbalanced_layout(count):
      shape = 'unbalanced'
    elif not count & (count - 1) and \
        layout == _balanced_layout(list(range(1, count + 1))):
      shape = 'balanced'
    else:
      shape = 'mixed'
  tree = FamilyTree(_build(layout, anchors), shape)
  logger.debug('Built %s tree %s over %d anchors.', shape, tree.render(),
      count)
  return tree


def distinct_orderings(anchors):
  '''
  Shape strings of the unbalanced trees over the given anchors (or anchor
  count) that define distinct families. Swapping the two deepest anchors
  gives the same family, so only orderings with the first below the second
  are listed.
  '''
  count = anchors if isinstance(anchors, int) else len(anchors)
  if count < 2:
    raise ValueError('Need at least two anchors.')
  shapes = []
  for perm in itertools.permutations(range(1, count + 1)):
    if perm[0] > perm[1]:
      continue
    layout = perm[0]
    for p in perm[1:]:
      layout = (layout, p)
    shapes.append(str(layout).replace(' ', ''))
  return shapes


def load_family(path):
  '''
  Reads a family definition file:
  {"shape": "...", "anchors": [path or inline matrix, ...]}.
  Relative anchor paths resolve against the family file's directory.
  '''
  from .util import read_json, read_matrix, parse_matrix
  data = read_json(path)
  if not isinstance(data, dict) or 'anchors' not in data:
    raise ConfigError('Family file %s needs an "anchors" list.' % path)
  unknown = set(data) - {'shape', 'anchors'}
  if unknown:
    raise ConfigError('Unknown keys in family file %s: %s.'
        % (path, ', '.join(sorted(unknown))))
  root = os.path.dirname(os.path.abspath(path))
  anchors = []
  for item in data['anchors']:
    if isinstance(item, str):
      item_path = item if os.path.isabs(item) else os.path.join(root, item)
      anchors.append(read_matrix(item_path))
    else:
      anchors.append(parse_matrix(item, source=path))
  try:
    return build_tree(anchors, data.get('shape', 'unbalanced'))
  except ValueError as e:
    if isinstance(e, GeofamError):
      raise
    raise ConfigError('Invalid family in %s: %s' % (path, e))
