'''
Coordinate descent over the parameters of a family tree.

Each coordinate step projects the target onto the segment swept by that
coordinate with all others frozen, starting from the zero vector and
cycling through the parameters in sweep order until no coordinate moves by
more than the tolerance.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import dataclasses
import logging

import numpy as np
from scipy import optimize

from .errors import ConfigError, ConvergenceError, DegenerateFamilyError
from .family import GeodesicSegment, eval_tree
from .manifold import SpdMatrix, natural_distance
from .projection import METHODS, NATURAL, REVERSE_I, SOLVER_TOL
from .projection import _full_rank, kl_gaussian, project

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class DescentConfig:
  coord_tol: float = 1e-4
  max_outer_iters: int = 50
  objective: str = NATURAL
  solver_tol: float = SOLVER_TOL
  # refine steps whose induced segment is not the true coordinate curve
  refine: bool = True

  def validate(self):
    if not self.coord_tol > 0:
      raise ConfigError('coord_tol must be positive, got %r.' % self.coord_tol)
    if int(self.max_outer_iters) < 1:
      raise ConfigError('max_outer_iters must be at least 1, got %r.'
          % self.max_outer_iters)
    if self.objective not in METHODS:
      raise ConfigError('Unknown descent objective %r.' % self.objective)
    if not self.solver_tol > 0:
      raise ConfigError('solver_tol must be positive, got %r.'
          % self.solver_tol)
    return self


@dataclasses.dataclass(frozen=True)
class DescentResult:
  '''
  `objective_trace[0]` is the objective at the starting point, entry k the
  objective after sweep k. `path[k]` and `skipped[k]` hold the parameters
  and the skipped (degenerate) coordinates of sweep k + 1.
  '''
  params: np.ndarray
  projected: SpdMatrix
  objective_trace: np.ndarray
  converged: bool
  outer_iters: int
  path: tuple = ()
  skipped: tuple = ()
  gradient: np.ndarray = None
  method: str = NATURAL

  @property
  def objective(self):
    return float(self.objective_trace[-1])

  def to_dict(self):
    return {
      'method': self.method,
      'params': [float(x) for x in self.params],
      'objective': self.objective,
      'objective_trace': [float(x) for x in self.objective_trace],
      'converged': bool(self.converged),
      'outer_iters': int(self.outer_iters),
      'path': [[float(x) for x in p] for p in self.path],
      'skipped': [list(s) for s in self.skipped],
      'gradient': None if self.gradient is None else
          [float(x) for x in self.gradient],
    }


def tree_objective(tree, C, params, method=NATURAL):
  '''
  Natural distance, KL(C || tree) or KL(tree || C) at `params`.
  '''
  point = eval_tree(tree, params)
  if method == NATURAL:
    return natural_distance(point, C)
  if method == REVERSE_I:
    return kl_gaussian(C, point)
  return kl_gaussian(point, C)


def sweep_order(tree):
  '''
  Coordinates in update order: deepest nodes first, left to right within a
  level, the root last.
  '''
  return [node.param_index for node in tree.nodes()]


def induced_segment(tree, params, j):
  '''
  The geodesic between the tree evaluations with t_j = 0 and t_j = 1, all
  other parameters as in `params`. `exact` is True when the tree restricted
  to coordinate j is that geodesic, which holds when node j is the root or
  every ancestor passes node j's value through unchanged.
  '''
  params = np.asarray(params, dtype=float)
  p0 = params.copy()
  p0[j] = 0.
  p1 = params.copy()
  p1[j] = 1.
  seg = GeodesicSegment(eval_tree(tree, p0), eval_tree(tree, p1))
  exact = True
  for ancestor, side in tree.ancestors(j):
    passthrough = 0. if side == 'left' else 1.
    if params[ancestor.param_index] != passthrough:
      exact = False
      break
  return seg, exact


def coordinate_gradient(tree, C, params, method=NATURAL, h=1e-6):
  '''
  Central-difference derivative of the tree objective along each coordinate.
  '''
  C = _full_rank(C)
  params = np.asarray(params, dtype=float)
  grad = np.zeros(params.shape[0])
  for j in range(params.shape[0]):
    up = params.copy()
    up[j] += h
    down = params.copy()
    down[j] -= h
    grad[j] = (tree_objective(tree, C, up, method)
        - tree_objective(tree, C, down, method)) / (2 * h)
  return grad


def _refine(objective, current, proposal, tol):
  a, b = sorted((current, proposal))
  if b - a <= tol:
    b = a + 1.
  try:
    res = optimize.minimize_scalar(objective, bracket=(a, b), method='brent',
        tol=tol)
  except (ValueError, RuntimeError, FloatingPointError) as e:
    logger.debug('coordinate refinement failed: %s', e)
    return None
  return float(res.x)


def coordinate_descent(tree, C, cfg=None, start=None):
  '''
  Minimizes the tree objective one coordinate at a time.

  Every accepted update is the best of the current value, the projection
  onto the induced segment and (for inexact segments) a Brent refinement on
  the true coordinate objective, so the objective trace never increases.
  Non-convergence is reported through `converged`, not raised.
  '''
  cfg = (cfg or DescentConfig()).validate()
  C = _full_rank(C)
  method = cfg.objective
  p = tree.num_params
  params = np.zeros(p) if start is None else \
      np.array(start, dtype=float).ravel()
  if params.shape[0] != p:
    raise ValueError('Start vector has %d entries, tree has %d parameters.'
        % (params.shape[0], p))
  value = tree_objective(tree, C, params, method)
  trace = [value]
  path = []
  skipped = []
  order = sweep_order(tree)
  converged = False
  outer = 0
  for outer in range(1, int(cfg.max_outer_iters) + 1):
    previous = params.copy()
    skipped_now = []
    for j in order:
      seg, exact = induced_segment(tree, params, j)
      if seg.is_degenerate():
        logger.warning('sweep %d: coordinate t%d is degenerate, skipped',
            outer, j + 1)
        skipped_now.append(j)
        continue

      def along(s, j=j):
        trial = params.copy()
        trial[j] = s
        return tree_objective(tree, C, trial, method)

      candidates = [(value, params[j])]
      try:
        proposal = project(seg, C, method, t0=params[j],
            tol=cfg.solver_tol).t
      except (ConvergenceError, DegenerateFamilyError) as e:
        logger.warning('sweep %d: projection along t%d failed: %s', outer,
            j + 1, e)
        proposal = None
      if proposal is not None:
        candidates.append((along(proposal), proposal))
        if not exact and cfg.refine:
          refined = _refine(along, params[j], proposal, cfg.solver_tol)
          if refined is not None:
            candidates.append((along(refined), refined))
      best_value, best_t = min(candidates, key=lambda c: c[0])
      params[j] = best_t
      value = best_value
    trace.append(value)
    path.append(params.copy())
    skipped.append(tuple(skipped_now))
    change = float(np.max(np.abs(params - previous)))
    logger.debug('sweep %d: objective %.10g, largest change %.3e', outer,
        value, change)
    if change <= cfg.coord_tol:
      converged = True
      break
  if not converged:
    logger.warning('coordinate descent did not converge in %d sweeps',
        cfg.max_outer_iters)
  return DescentResult(
      params=params,
      projected=eval_tree(tree, params),
      objective_trace=np.array(trace),
      converged=converged,
      outer_iters=outer,
      path=tuple(path),
      skipped=tuple(skipped),
      gradient=coordinate_gradient(tree, C, params, method),
      method=method)


def multi_start_descent(tree, C, starts, cfg=None):
  '''
  Runs coordinate descent from the zero vector and from each given start,
  returning the result with the smallest final objective.
  '''
  results = [coordinate_descent(tree, C, cfg)]
  for start in starts:
    results.append(coordinate_descent(tree, C, cfg, start=start))
  return min(results, key=lambda r: r.objective)
