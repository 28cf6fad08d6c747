'''
Batch experiments on the aquifer case study and the local analysis.

Each experiment returns an ExperimentResult: one row per trial in a fixed
order, summary statistics and any extra tables. Trials draw from their own
seeded streams, so results do not depend on the number of threads.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import concurrent.futures
import dataclasses
import logging

import numpy as np

from . import util
from .aquifer import flat_vs_geodesic, monte_carlo_covariance
from .config import NoiseSpec
from .descent import coordinate_descent
from .family import GeodesicSegment, build_tree, eval_tree
from .manifold import natural_distance
from .projection import local_analysis, local_analysis_fixture
from .projection import natural_projection, reverse_iprojection

logger = logging.getLogger(__name__)

# kernel settings (ell, sigma2) of the anchors and targets
PAIR_ANCHORS = ((20., 0.3), (30., 0.3))
PAIR_TARGET = (25., 0.3)
TREE_ANCHORS = ((20., 0.3), (30., 0.3), (25., 0.4))
TREE_TARGET = (25., 0.35)
FLAT_ANCHORS = ((20., 0.3), (100., 0.3))
FLAT_TARGET = (60., 0.3)

NAMES = ('regularization', 'noise', 'multiparam', 'local-analysis',
    'flat-vs-geodesic')


@dataclasses.dataclass
class ExperimentResult:
  name: str
  columns: tuple
  rows: list
  summary: dict
  # extra tables: name -> (columns, rows)
  tables: dict = dataclasses.field(default_factory=dict)

  def column(self, name):
    i = self.columns.index(name)
    return np.array([row[i] for row in self.rows], dtype=float)


def _quartiles(values):
  v = np.asarray(values, dtype=float)
  v = v[np.isfinite(v)]
  if v.shape[0] == 0:
    return dict(q1=np.nan, median=np.nan, q3=np.nan, mean=np.nan, count=0)
  q1, med, q3 = np.percentile(v, [25, 50, 75])
  return dict(q1=float(q1), median=float(med), q3=float(q3),
      mean=float(v.mean()), count=int(v.shape[0]))


def _ratio(b_prime, b):
  if b_prime == 0:
    return np.nan
  return b_prime / b if b > 0 else np.inf


def _map(fn, items, threads):
  if threads <= 1:
    return [fn(i) for i in items]
  with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
    return list(pool.map(fn, items))


def build_anchors(run, kernels, q=None, offset=0):
  '''
  High-sample covariance estimates for each (ell, sigma2) in `kernels`,
  from the anchor streams offset, offset + 1, ...
  '''
  exp = run.experiment
  q = exp.anchor_q if q is None else q

  def one(i):
    ell, sigma2 = kernels[i]
    cfg = run.aquifer.with_kernel(ell=ell, sigma2=sigma2)
    rng = util.stream(run.seed, util.ANCHORS, offset + i)
    logger.info('building anchor %d (ell=%g, sigma2=%g) from %d samples',
        offset + i, ell, sigma2, q)
    return monte_carlo_covariance(cfg, q, rng, chunk=exp.chunk).spd
  return _map(one, range(len(kernels)), exp.threads)


def _target(run, kernel, index, noise=None, noise_index=0):
  ell, sigma2 = kernel
  cfg = run.aquifer.with_kernel(ell=ell, sigma2=sigma2)
  rng = util.stream(run.seed, util.TRIALS, index)
  noise_rng = util.stream(run.seed, util.NOISE, noise_index)
  return monte_carlo_covariance(cfg, run.experiment.target_q, rng,
      noise=noise, noise_rng=noise_rng, chunk=run.experiment.chunk)


def _summary(b_prime, b, ratio):
  return {
    'mean_b_prime': float(np.mean(b_prime)),
    'mean_b': float(np.mean(b)),
    'mean_ratio': float(np.nanmean(ratio[np.isfinite(ratio)]))
        if np.any(np.isfinite(ratio)) else np.nan,
    'ratio': _quartiles(ratio),
  }


def experiment_regularization(run, anchors=None):
  '''
  Projects small-sample estimates of the target covariance onto the
  geodesic between two anchors and compares distances to the truth before
  (b') and after (b) projection.
  '''
  exp = run.experiment
  if anchors is None:
    anchors = build_anchors(run, PAIR_ANCHORS + (PAIR_TARGET,))
  a1, a2, truth = anchors
  seg = GeodesicSegment(a1, a2)

  def trial(i):
    c = _target(run, PAIR_TARGET, i)
    res = natural_projection(seg, c)
    b_prime = natural_distance(c.spd, truth)
    b = natural_distance(res.projected, truth)
    return (i, b_prime, b, _ratio(b_prime, b), res.t)

  rows = _map(trial, range(exp.trials), exp.threads)
  result = ExperimentResult('regularization',
      ('trial', 'b_prime', 'b', 'ratio', 't'), rows, {})
  result.summary.update(_summary(result.column('b_prime'),
      result.column('b'), result.column('ratio')))
  result.summary['anchor_distance'] = seg.length
  logger.info('regularization: mean b\'=%.4g mean b=%.4g mean ratio=%.4g',
      result.summary['mean_b_prime'], result.summary['mean_b'],
      result.summary['mean_ratio'])
  return result


def experiment_noise(run, anchors=None):
  '''
  Regularization ratios of natural projection and maximum likelihood when
  the simulated observations carry additive Gaussian noise, for each noise
  magnitude alpha.
  '''
  exp = run.experiment
  if anchors is None:
    anchors = build_anchors(run, PAIR_ANCHORS + (PAIR_TARGET,))
  a1, a2, truth = anchors
  seg = GeodesicSegment(a1, a2)
  jobs = [(k, alpha, i) for k, alpha in enumerate(exp.alphas)
      for i in range(exp.noise_trials)]

  def trial(job):
    k, alpha, i = job
    noise = NoiseSpec(alpha, truth) if alpha > 0 else None
    c = _target(run, PAIR_TARGET, i, noise, k * exp.noise_trials + i)
    b_prime = natural_distance(c.spd, truth)
    nat = natural_projection(seg, c)
    mle = reverse_iprojection(seg, c)
    b_nat = natural_distance(nat.projected, truth)
    b_mle = natural_distance(mle.projected, truth)
    return [
      (alpha, i, 'natural', b_prime, b_nat, _ratio(b_prime, b_nat), nat.t),
      (alpha, i, 'mle', b_prime, b_mle, _ratio(b_prime, b_mle), mle.t),
    ]

  rows = [r for pair in _map(trial, jobs, exp.threads) for r in pair]
  quartile_rows = []
  for alpha in exp.alphas:
    for method in ('natural', 'mle'):
      ratios = [r[5] for r in rows if r[0] == alpha and r[2] == method]
      s = _quartiles(ratios)
      quartile_rows.append((alpha, method, s['q1'], s['median'], s['q3'],
          s['mean'], s['count']))
  medians = dict(('%g/%s' % (row[0], row[1]), row[3])
      for row in quartile_rows)
  result = ExperimentResult('noise',
      ('alpha', 'trial', 'method', 'b_prime', 'b', 'ratio', 't'), rows,
      {'median_ratio': medians},
      {'quartiles': (('alpha', 'method', 'q1', 'median', 'q3', 'mean',
          'count'), quartile_rows)})
  logger.info('noise: %d alphas x %d trials', len(exp.alphas),
      exp.noise_trials)
  return result


def experiment_multiparam(run, anchors=None):
  '''
  The two-parameter unbalanced family over three anchors, fitted to
  small-sample estimates by coordinate descent.
  '''
  exp = run.experiment
  if anchors is None:
    anchors = build_anchors(run, TREE_ANCHORS + (TREE_TARGET,))
  truth = anchors[-1]
  tree = build_tree(anchors[:-1], 'unbalanced')

  def trial(i):
    c = _target(run, TREE_TARGET, i)
    res = coordinate_descent(tree, c, run.descent)
    b_prime = natural_distance(c.spd, truth)
    b = natural_distance(res.projected, truth)
    monotone = bool(np.all(np.diff(res.objective_trace) <= 1e-12))
    return (i, b_prime, b, _ratio(b_prime, b), res.params[0], res.params[1],
        res.converged, res.outer_iters, monotone), res, c

  out = _map(trial, range(exp.trials), exp.threads)
  rows = [o[0] for o in out]
  traces = [(i, k, float(v)) for i, (_, res, _) in enumerate(out)
      for k, v in enumerate(res.objective_trace)]
  result = ExperimentResult('multiparam',
      ('trial', 'b_prime', 'b', 'ratio', 't1', 't2', 'converged',
          'outer_iters', 'monotone'), rows, {},
      {'traces': (('trial', 'sweep', 'objective'), traces)})
  result.summary.update(_summary(result.column('b_prime'),
      result.column('b'), result.column('ratio')))
  iters = result.column('outer_iters')
  converged = result.column('converged').astype(bool)
  result.summary['converged_fraction'] = float(np.mean(converged))
  result.summary['within_10_sweeps'] = float(np.mean(converged &
      (iters <= 10)))
  result.summary['all_monotone'] = bool(np.all(result.column('monotone')))
  if out:
    sample = out[0][2].spd
    grid = np.linspace(-1., 2., exp.grid)
    contour = []
    for t1 in grid:
      for t2 in grid:
        point = eval_tree(tree, [t1, t2])
        contour.append((float(t1), float(t2),
            natural_distance(point, sample), natural_distance(point, truth)))
    result.tables['contour'] = (('t1', 't2', 'sample_distance',
        'truth_distance'), contour)
    first = out[0][1]
    steps = [(0, 0., 0., float(first.objective_trace[0]))]
    for k, point in enumerate(first.path):
      steps.append((k + 1, float(point[0]), float(point[1]),
          float(first.objective_trace[k + 1])))
    result.tables['path'] = (('sweep', 't1', 't2', 'objective'), steps)
    best = coordinate_descent(tree, truth, run.descent)
    gap = natural_distance(best.projected, truth)
    result.tables['truth_minimizer'] = (('t1', 't2', 'truth_distance',
        'converged'), [(float(best.params[0]), float(best.params[1]), gap,
        best.converged)])
    result.summary['truth_minimizer'] = [float(x) for x in best.params]
    result.summary['truth_distance'] = gap
  logger.info('multiparam: mean ratio %.4g, %.0f%% converged',
      result.summary['mean_ratio'], 100 * result.summary['converged_fraction'])
  return result


def experiment_local_analysis(run):
  '''
  Drift of the KL projections from the natural projection along a geodesic
  leaving the family orthogonally, on random Wishart anchors.
  '''
  exp = run.experiment
  rng = util.stream(run.seed, util.FIXTURES, 0)
  a1, a2, c = local_analysis_fixture(rng, exp.local_dim)
  res = local_analysis(a1, a2, c, exp.epsilons)
  summary = {'hat_second_deriv': res.hat_second_deriv}
  try:
    hat, check = res.curvature_fit()
    summary.update(fitted_hat=hat, fitted_check=check,
        expected=res.hat_second_deriv / 2.)
  except ValueError as e:
    logger.warning('no curvature fit: %s', e)
  return ExperimentResult('local-analysis',
      ('epsilon', 'delta_hat', 'delta_check', 'delta_natural'), res.rows(),
      summary)


def _flat_summary(cmp):
  unit = (cmp.ts >= 0) & (cmp.ts <= 1) & cmp.flat_defined
  return {
    'undefined_intervals': cmp.undefined_intervals(),
    'geodesic_unimodal': bool(cmp.geodesic_unimodal),
    'flat_convex': bool(cmp.flat_convex),
    'geodesic_min': float(np.min(cmp.geodesic)),
    'flat_min': float(np.nanmin(cmp.flat)) if np.any(cmp.flat_defined)
        else np.nan,
    # largest |flat - geodesic| between the anchors
    'max_gap_unit': float(np.max(np.abs(cmp.flat[unit]
        - cmp.geodesic[unit]))) if np.any(unit) else np.nan,
  }


def experiment_flat_vs_geodesic(run, anchors=None, ts=None,
    close_anchors=None):
  '''
  Distance from a target to the geodesic family and to the straight-line
  family between far-apart anchors. The same comparison for the close
  anchors of the regularization experiment, where the two families nearly
  agree, is the 'close' table and summary entry.
  '''
  if anchors is None:
    anchors = build_anchors(run, FLAT_ANCHORS + (FLAT_TARGET,))
  if close_anchors is None:
    close_anchors = build_anchors(run, PAIR_ANCHORS + (PAIR_TARGET,))
  ts = np.linspace(-2., 3., 101) if ts is None else np.asarray(ts)
  far = flat_vs_geodesic(*anchors, ts)
  close = flat_vs_geodesic(*close_anchors, ts)
  columns = ('t', 'geodesic_distance', 'flat_distance', 'flat_defined')
  summary = _flat_summary(far)
  summary['close'] = _flat_summary(close)
  return ExperimentResult('flat-vs-geodesic', columns, far.rows(), summary,
      {'close': (columns, close.rows())})


def run_experiment(name, run):
  run = run.validate()
  if name == 'regularization':
    return experiment_regularization(run)
  if name == 'noise':
    return experiment_noise(run)
  if name == 'multiparam':
    return experiment_multiparam(run)
  if name == 'local-analysis':
    return experiment_local_analysis(run)
  if name == 'flat-vs-geodesic':
    return experiment_flat_vs_geodesic(run)
  raise ValueError('Unknown experiment %r (expected one of %s).'
      % (name, ', '.join(NAMES)))
