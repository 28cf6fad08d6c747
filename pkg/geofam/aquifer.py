'''
One-dimensional confined aquifer with random permeability.

The head h solves d/dx(kappa dh/dx) + Q = 0 on [0, L] with h(0) = H1 and
h(L) = H2, where log kappa is a Gaussian process. Heads observed at n
interior points give the random vectors whose covariance the families
approximate.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import dataclasses
import functools
import logging

import numpy as np
from scipy import linalg

from .errors import DimensionError, NotPositiveDefiniteError
from .manifold import natural_distance
from .family import GeodesicSegment, eval_segment, flat_point
from .projection import CENTERED, SampleCovariance

logger = logging.getLogger(__name__)

JITTER = 1e-10
MAX_JITTER_STEPS = 8


def fd_nodes(cfg):
  return np.linspace(0., cfg.length, int(cfg.grid_nodes))


def staggered_grid(cfg):
  '''
  FD nodes and the midpoints between them, interleaved (2N - 1 points).
  '''
  return np.linspace(0., cfg.length, 2 * int(cfg.grid_nodes) - 1)


def observation_points(cfg):
  n = int(cfg.n_obs)
  return np.arange(1, n + 1) * cfg.length / (n + 1)


def kernel_matrix(x, kernel):
  r = np.abs(np.subtract.outer(x, x)) / kernel.ell
  return kernel.sigma2 * np.exp(-(r ** kernel.p) / kernel.p)


@functools.lru_cache(maxsize=16)
def _gp_factor(length, grid_nodes, kernel):
  x = np.linspace(0., length, 2 * grid_nodes - 1)
  k = kernel_matrix(x, kernel)
  jitter = JITTER * kernel.sigma2
  for step in range(MAX_JITTER_STEPS):
    try:
      factor = linalg.cholesky(k + jitter * np.eye(x.shape[0]), lower=True)
    except linalg.LinAlgError:
      logger.warning('kernel Gram matrix not positive definite with jitter '
          '%g, increasing', jitter)
      jitter *= 10.
      continue
    logger.debug('kernel Cholesky with jitter %g after %d steps', jitter,
        step)
    factor.flags.writeable = False
    return factor
  raise NotPositiveDefiniteError('Kernel Gram matrix is not positive definite '
      'even with jitter %g.' % (jitter / 10.))


def gp_factor(cfg):
  '''
  Lower Cholesky factor of the kernel on the staggered grid.
  '''
  return _gp_factor(float(cfg.length), int(cfg.grid_nodes), cfg.kernel)


def sample_log_permeability(cfg, rng, size=None):
  '''
  Gaussian-process draws of log kappa on the staggered grid: one vector, or
  an array of `size` rows.
  '''
  factor = gp_factor(cfg)
  m = factor.shape[0]
  z = rng.standard_normal((1 if size is None else size, m))
  g = cfg.gp_mean + z @ factor.T
  return g[0] if size is None else g


def _midpoint_kappa(kappa, cfg):
  kappa = np.asarray(kappa, dtype=float)
  m = 2 * int(cfg.grid_nodes) - 1
  if kappa.shape[-1] != m:
    raise DimensionError('Expected permeability on the %d-point staggered '
        'grid, got %d values.' % (m, kappa.shape[-1]))
  if np.any(kappa <= 0):
    raise ValueError('Permeability must be positive.')
  return kappa[..., 1::2]


def solve_head(kappa, cfg):
  '''
  Second-order conservative finite differences:
    (k[i+1/2] (h[i+1] - h[i]) - k[i-1/2] (h[i] - h[i-1])) / dx^2 + Q = 0
  with kappa taken at the midpoints of the staggered grid.
  '''
  mid = _midpoint_kappa(kappa, cfg)
  n = int(cfg.grid_nodes)
  dx = cfg.length / (n - 1)
  size = n - 2
  ab = np.zeros((3, size))
  ab[0, 1:] = mid[1:size]
  ab[1, :] = -(mid[:size] + mid[1:size + 1])
  ab[2, :-1] = mid[1:size]
  rhs = np.full(size, -cfg.source * dx ** 2)
  rhs[0] -= mid[0] * cfg.h1
  rhs[-1] -= mid[size] * cfg.h2
  interior = linalg.solve_banded((1, 1), ab, rhs)
  return np.concatenate(([cfg.h1], interior, [cfg.h2]))


def solve_heads(kappa_batch, cfg):
  '''
  The solution of `solve_head` for many permeability fields at once.

  The discrete flux F[i+1/2] = k[i+1/2] (h[i+1] - h[i]) / dx satisfies
  F[i+1/2] = c - Q x[i+1/2]; c follows from the boundary values and the
  heads from summing the increments.
  '''
  mid = np.atleast_2d(_midpoint_kappa(kappa_batch, cfg))
  n = int(cfg.grid_nodes)
  dx = cfg.length / (n - 1)
  xm = (np.arange(n - 1) + 0.5) * dx
  inv = 1. / mid
  c = (cfg.h2 - cfg.h1 + dx * cfg.source * (inv @ xm)) / (dx * inv.sum(axis=1))
  increments = dx * (c[:, None] - cfg.source * xm[None, :]) * inv
  heads = np.empty((mid.shape[0], n))
  heads[:, 0] = cfg.h1
  heads[:, 1:] = cfg.h1 + np.cumsum(increments, axis=1)
  heads[:, -1] = cfg.h2
  return heads


def _interp_weights(cfg):
  nodes = fd_nodes(cfg)
  x = observation_points(cfg)
  idx = np.clip(np.searchsorted(nodes, x) - 1, 0, nodes.shape[0] - 2)
  w = (x - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
  return idx, w


def observe(heads, cfg):
  '''
  Linear interpolation of heads (one row per field) at the observation
  points.
  '''
  heads = np.atleast_2d(heads)
  idx, w = _interp_weights(cfg)
  return heads[:, idx] * (1. - w) + heads[:, idx + 1] * w


def _head_chunks(cfg, q, rng, chunk):
  done = 0
  while done < q:
    size = min(chunk, q - done)
    kappa = np.exp(sample_log_permeability(cfg, rng, size))
    yield observe(solve_heads(kappa, cfg), cfg)
    done += size


def simulate_heads(cfg, q, rng, chunk=10000):
  '''
  q independent head observation vectors, shape (q, n_obs).
  '''
  return np.concatenate(list(_head_chunks(cfg, q, rng, chunk)), axis=0)


def monte_carlo_covariance(cfg, q, rng, noise=None, noise_rng=None,
    require_full_rank=True, chunk=10000):
  '''
  Centered sample covariance (1/(q-1)) of q simulated observation vectors.

  With `noise`, iid Gaussian noise of std `noise.std` is added to every
  observation before assembly, drawn from `noise_rng` (default: `rng`).
  Samples are accumulated chunk by chunk around the first chunk's mean.
  '''
  if int(q) < 2:
    raise ValueError('Need at least two samples, got %r.' % q)
  cfg.validate()
  std = 0. if noise is None else noise.validate().std
  noise_rng = rng if noise_rng is None else noise_rng
  n = int(cfg.n_obs)
  shift = None
  total = np.zeros(n)
  outer = np.zeros((n, n))
  for block in _head_chunks(cfg, int(q), rng, chunk):
    if std > 0:
      block = block + noise_rng.normal(0., std, size=block.shape)
    if shift is None:
      shift = block.mean(axis=0)
    d = block - shift
    total += d.sum(axis=0)
    outer += d.T @ d
  mean = total / q
  c = (outer - q * np.outer(mean, mean)) / (q - 1)
  cov = SampleCovariance((c + c.T) / 2, q, CENTERED)
  logger.debug('Monte-Carlo covariance from %d samples (ell=%g, sigma2=%g, '
      'noise std %g)', q, cfg.kernel.ell, cfg.kernel.sigma2, std)
  if require_full_rank:
    cov.spd
  return cov


@dataclasses.dataclass(frozen=True)
class FlatComparison:
  '''
  Distances to a target along the geodesic and the straight-line family.
  Flat entries are NaN where (1 - t) A1 + t A2 is not SPD.
  '''
  ts: np.ndarray
  geodesic: np.ndarray
  flat: np.ndarray

  @property
  def flat_defined(self):
    return ~np.isnan(self.flat)

  def undefined_intervals(self):
    '''
    Maximal runs of grid values where the flat family leaves the cone, as
    (first t, last t) pairs.
    '''
    runs = []
    start = None
    for t, ok in zip(self.ts, self.flat_defined):
      if not ok and start is None:
        start = t
      if ok and start is not None:
        runs.append((float(start), float(prev)))
        start = None
      prev = t
    if start is not None:
      runs.append((float(start), float(self.ts[-1])))
    return runs

  @staticmethod
  def _local_minima(values):
    v = np.asarray(values)
    v = v[~np.isnan(v)]
    if v.shape[0] < 3:
      return 1
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])
    return int(inner.sum() + (v[0] < v[1]) + (v[-1] < v[-2]))

  @property
  def geodesic_unimodal(self):
    return np.all(np.isfinite(self.geodesic)) and \
        self._local_minima(self.geodesic) == 1

  @property
  def flat_convex(self):
    '''
    False when the defined part of the flat curve has a negative second
    difference or is split by undefined regions.
    '''
    if self.undefined_intervals() and \
        any(t0 > self.ts[0] and t1 < self.ts[-1]
            for t0, t1 in self.undefined_intervals()):
      return False
    v = self.flat[self.flat_defined]
    if v.shape[0] < 3:
      return True
    return bool(np.all(np.diff(v, 2) >= -1e-12 * np.max(np.abs(v))))

  def rows(self):
    return [(float(t), float(g), float(f), bool(ok)) for t, g, f, ok in
        zip(self.ts, self.geodesic, self.flat, self.flat_defined)]


def flat_vs_geodesic(A1, A2, A3, ts):
  '''
  d(A3, phi(t)) along the geodesic through A1, A2 and d(A3, (1-t)A1 + tA2)
  along the flat family, over the grid `ts`.
  '''
  seg = GeodesicSegment(A1, A2)
  ts = np.asarray(ts, dtype=float)
  geo = np.array([natural_distance(eval_segment(seg, t), A3) for t in ts])
  flat = []
  for t in ts:
    point = flat_point(seg.anchor1, seg.anchor2, t)
    flat.append(np.nan if point is None else natural_distance(point, A3))
  result = FlatComparison(ts=ts, geodesic=geo, flat=np.array(flat))
  logger.info('flat family undefined on %s', result.undefined_intervals())
  return result
