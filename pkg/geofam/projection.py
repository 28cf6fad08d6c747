'''
Estimation inside a one-parameter geodesic family.

Three estimators pick the family member closest to a sample covariance C:

* natural projection minimizes the natural distance d(phi(t), C),
* reverse I-projection minimizes KL(N(0, C) || N(0, phi(t))) and coincides
  with Gaussian maximum likelihood,
* I-projection minimizes KL(N(0, phi(t)) || N(0, C)).

All three losses are strictly convex in t. They are evaluated in the basis
that whitens the first anchor and diagonalizes the second, where
Z = U^T A1^-1/2 C A1^-1/2 U carries everything the losses need.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import dataclasses
import logging

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, DegenerateFamilyError, DimensionError
from .errors import NotPositiveDefiniteError, PreconditionError
from .errors import RankDeficientError
from .family import GeodesicSegment, eval_segment
from .manifold import SpdMatrix, as_spd, exp_map, log_map, metric_inner
from .manifold import natural_distance, pencil_eigenvalues, random_spd
from .manifold import symmetrize

logger = logging.getLogger(__name__)

NATURAL = 'natural'
REVERSE_I = 'reverseI'
IPROJ = 'iproj'
METHODS = (NATURAL, REVERSE_I, IPROJ)

SOLVER_TOL = 1e-10
MAX_SOLVER_ITERS = 200
CENTERED = 'centered'
UNCENTERED = 'uncentered'


class SampleCovariance(object):
  '''
  A sample covariance together with the number of samples behind it.

  The matrix need not be full rank (q < n gives a singular estimate).
  `spd` returns the validated SPD matrix and raises RankDeficientError when
  there is none, which is what every full-rank consumer calls. `q` is None
  when the sample count is unknown, as for a matrix read from a file.
  '''
  def __init__(self, matrix, q=None, convention=CENTERED):
    if convention not in (CENTERED, UNCENTERED):
      raise ValueError('Unknown covariance convention %r.' % convention)
    if q is not None and int(q) < 1:
      raise ValueError('Sample count must be positive, got %r.' % q)
    a = symmetrize(matrix)
    a.flags.writeable = False
    self.array = a
    self.q = None if q is None else int(q)
    self.convention = convention
    self._spd = None

  @classmethod
  def from_samples(cls, samples, convention=CENTERED):
    '''
    Builds the estimate from a (q, n) array of samples, either centered with
    1/(q-1) or uncentered with 1/q.
    '''
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    q = y.shape[0]
    if convention == CENTERED:
      if q < 2:
        raise ValueError('A centered covariance needs at least two samples.')
      d = y - y.mean(axis=0)
      c = d.T @ d / (q - 1)
    elif convention == UNCENTERED:
      c = y.T @ y / q
    else:
      raise ValueError('Unknown covariance convention %r.' % convention)
    return cls((c + c.T) / 2, q, convention)

  @property
  def dim(self):
    return self.array.shape[0]

  @property
  def spd(self):
    if self._spd is None:
      try:
        self._spd = SpdMatrix(self.array)
      except NotPositiveDefiniteError as e:
        source = '' if self.q is None else ' from q=%d samples' % self.q
        raise RankDeficientError('Sample covariance%s is not full rank '
            '(n=%d); natural and KL projections need q > n. %s'
            % (source, self.dim, e), e.eigenvalue)
    return self._spd

  def is_full_rank(self):
    try:
      self.spd
    except RankDeficientError:
      return False
    return True

  def __array__(self, dtype=None, copy=None):
    return self.array if dtype is None else self.array.astype(dtype)

  def __repr__(self):
    return '<%s.%s at %x: dim %d, q %s, %s>' % (
        self.__module__, type(self).__name__, id(self), self.dim, self.q,
        self.convention)


def _full_rank(C):
  if isinstance(C, SampleCovariance):
    return C.spd
  return as_spd(C)


def _check_method(method):
  if method not in METHODS:
    raise ValueError('Unknown projection method %r (expected one of %s).'
        % (method, ', '.join(METHODS)))


def _log_divided_differences(mu):
  dm = mu[:, None] - mu[None, :]
  dl = np.log(mu)[:, None] - np.log(mu)[None, :]
  close = np.abs(dm) <= 1e-8 * np.maximum(mu[:, None], mu[None, :])
  with np.errstate(divide='ignore', invalid='ignore'):
    return np.where(close, 1. / np.sqrt(mu[:, None] * mu[None, :]), dl / dm)


class WhiteningContext(object):
  '''
  A sample covariance seen through a segment's pencil.

  Z = U^T A1^-1/2 C A1^-1/2 U and M = C^-1/2 A1^1/2 U, so that M^T M is
  the inverse of Z. Loss, derivative and residual evaluations at any t only
  touch Z, diag(Z^-1) and the log-eigenvalues of the pencil.
  '''
  def __init__(self, seg, C):
    C = _full_rank(C)
    if C.dim != seg.dim:
      raise DimensionError('Covariance has dimension %d, family has %d.'
          % (C.dim, seg.dim))
    pd = seg.pencil
    self.segment = seg
    self.pencil = pd
    self.covariance = C
    self.Z = pd.rotate(C)
    self.M = C.power(-0.5).array @ pd.sqrt_a1.array @ pd.U
    zinv = self.M.T @ self.M
    self.Z_inv = (zinv + zinv.T) / 2
    for a in (self.Z, self.M, self.Z_inv):
      a.flags.writeable = False
    self.ell = pd.log_lambdas
    self._zdiag = np.diag(self.Z).copy()
    self._zidiag = np.diag(self.Z_inv).copy()
    self.logdet_z = C.logdet() - seg.anchor1.logdet()

  @property
  def scale(self):
    '''
    Derivative scale Tr(log^2 Lambda), the squared length of the segment.
    '''
    return float(np.sum(self.ell ** 2))

  def _natural(self, t, second):
    d = np.exp(-0.5 * t * self.ell)
    y = d[:, None] * self.Z * d[None, :]
    mu, v = linalg.eigh((y + y.T) / 2)
    if not mu[0] > 0:
      raise NotPositiveDefiniteError('Whitened covariance lost definiteness '
          'at t=%g.' % t, mu[0])
    logmu = np.log(mu)
    loss = float(np.sum(logmu ** 2))
    trace = float(np.sum(self.ell * ((v ** 2) @ logmu)))
    curvature = None
    if second:
      b = v.T @ (self.ell[:, None] * v)
      gamma = _log_divided_differences(mu)
      curvature = float(np.sum(gamma * (mu[:, None] + mu[None, :]) * b ** 2))
    return loss, trace, curvature

  def loss(self, method, t):
    n = self.ell.shape[0]
    if method == NATURAL:
      return self._natural(t, False)[0]
    if method == REVERSE_I:
      return float(np.sum(self._zdiag * np.exp(-t * self.ell))
          - self.logdet_z + t * np.sum(self.ell) - n)
    if method == IPROJ:
      return float(np.sum(self._zidiag * np.exp(t * self.ell))
          + self.logdet_z - t * np.sum(self.ell) - n)
    _check_method(method)

  def derivatives(self, method, t):
    if method == NATURAL:
      _, trace, curvature = self._natural(t, True)
      return -2. * trace, curvature
    if method == REVERSE_I:
      w = self._zdiag * np.exp(-t * self.ell)
      return (float(np.sum(self.ell) - np.sum(w * self.ell)),
          float(np.sum(w * self.ell ** 2)))
    if method == IPROJ:
      w = self._zidiag * np.exp(t * self.ell)
      return (float(np.sum(w * self.ell) - np.sum(self.ell)),
          float(np.sum(w * self.ell ** 2)))
    _check_method(method)

  def residual(self, method, t):
    '''
    Left-hand side of the trace optimality equation of each method:
    Tr(log(Z L^-t) log L), Tr((Z L^-t - I) log L) and
    Tr((L^t Z^-1 - I) log L), with L the pencil eigenvalues.
    '''
    if method == NATURAL:
      return self._natural(t, False)[1]
    first, _ = self.derivatives(method, t)
    return -first if method == REVERSE_I else first

  def objective_value(self, method, t):
    '''
    Distance for natural projection, KL divergence otherwise.
    '''
    f = self.loss(method, t)
    return float(np.sqrt(max(f, 0.))) if method == NATURAL else f / 2.

  def closed_form(self, method):
    '''
    Exact optimum when all pencil eigenvalues are equal (A2 = alpha A1).
    '''
    n = self.ell.shape[0]
    ell = float(np.mean(self.ell))
    if method == NATURAL:
      return self.logdet_z / (n * ell)
    if method == REVERSE_I:
      return float(np.log(np.trace(self.Z) / n) / ell)
    if method == IPROJ:
      return float(-np.log(np.trace(self.Z_inv) / n) / ell)
    _check_method(method)


def _bracket_limit(ell):
  top = np.max(np.abs(ell))
  return min(1e6, 600. / top) if top > 0 else 1e6


def minimize_convex(derivatives, scale, t0=0., tol=SOLVER_TOL,
    max_iter=MAX_SOLVER_ITERS, limit=1e6):
  '''
  Minimizes a smooth strictly convex function of one variable given its
  first and second derivatives.

  Newton steps are kept inside a bracket [lo, hi] with f'(lo) < 0 < f'(hi);
  a step that leaves the bracket is replaced by bisection. The bracket
  starts at [-1, 2] and grows by doubling until the derivative changes sign.

  Returns (t, first derivative at t, iterations).
  '''
  lo, hi = -1., 2.
  while derivatives(lo)[0] > 0:
    lo, hi = 2. * lo, lo
    if abs(lo) > limit:
      raise ConvergenceError('No minimizer found in [%g, %g].' % (lo, hi))
  while derivatives(hi)[0] < 0:
    lo, hi = hi, 2. * hi
    if abs(hi) > limit:
      raise ConvergenceError('No minimizer found in [%g, %g].' % (lo, hi))
  t = t0 if lo < t0 < hi else 0.5 * (lo + hi)
  step = np.inf
  eps = np.finfo(float).eps
  for it in range(1, max_iter + 1):
    g, h = derivatives(t)
    if g == 0 or (abs(g) <= tol * scale and abs(step) <= tol * max(1., abs(t))):
      return t, g, it
    if g < 0:
      lo = t
    else:
      hi = t
    newton = t - g / h if h > 0 else np.nan
    new = newton if lo < newton < hi else 0.5 * (lo + hi)
    step = new - t
    logger.debug('solver iteration %d: t=%.15g f\'=%.3e step=%.3e', it, t, g,
        step)
    if abs(step) <= 4 * eps * max(1., abs(t)) or hi - lo <= 4 * eps * \
        max(1., abs(t)):
      logger.debug('solver stopped at machine precision, t=%.15g f\'=%.3e',
          t, g)
      return t, g, it
    t = new
  raise ConvergenceError('Newton solver did not converge in %d iterations '
      '(t=%g, derivative %g).' % (max_iter, t, g))


@dataclasses.dataclass(frozen=True)
class ProjectionResult:
  t: float
  projected: SpdMatrix
  objective: float
  residual: float
  iterations: int
  method: str

  def to_dict(self):
    return {
      'method': self.method,
      't': self.t,
      'objective': self.objective,
      'residual': self.residual,
      'iterations': self.iterations,
    }


def _project(seg, C, method, t0=0., tol=SOLVER_TOL):
  _check_method(method)
  if seg.is_degenerate():
    raise DegenerateFamilyError('Anchors coincide; the family is a single '
        'point.')
  ctx = WhiteningContext(seg, C)
  if seg.scaling_factor() is not None:
    t = ctx.closed_form(method)
    iterations = 0
  else:
    t, _, iterations = minimize_convex(
        lambda s: ctx.derivatives(method, s), ctx.scale, t0=t0, tol=tol,
        limit=_bracket_limit(ctx.ell))
  result = ProjectionResult(
      t=float(t),
      projected=eval_segment(seg, t),
      objective=ctx.objective_value(method, t),
      residual=ctx.residual(method, t),
      iterations=iterations,
      method=method)
  logger.debug('%s projection: t=%.12g objective=%.6g in %d iterations',
      method, result.t, result.objective, iterations)
  return result


def natural_projection(seg, C, t0=0., tol=SOLVER_TOL):
  '''
  argmin_t d(phi(t), C), found on the squared distance.
  '''
  return _project(seg, C, NATURAL, t0, tol)


def reverse_iprojection(seg, C, t0=0., tol=SOLVER_TOL):
  '''
  argmin_t KL(N(0, C) || N(0, phi(t))).
  '''
  return _project(seg, C, REVERSE_I, t0, tol)


def iprojection(seg, C, t0=0., tol=SOLVER_TOL):
  '''
  argmin_t KL(N(0, phi(t)) || N(0, C)).
  '''
  return _project(seg, C, IPROJ, t0, tol)


def project(seg, C, method=NATURAL, **kwargs):
  return _project(seg, C, method, **kwargs)


def project_all(seg, C, **kwargs):
  return dict((m, _project(seg, C, m, **kwargs)) for m in METHODS)


def distance_to_family(seg, C):
  return natural_projection(seg, C).objective


def compress(seg, matrices):
  '''
  Stores each matrix by its natural-projection parameter on `seg`. The
  results keep the distance lost by the compression in `objective`.
  '''
  return [natural_projection(seg, m) for m in matrices]


def gaussian_mle_from_data(seg, samples, t0=0., tol=SOLVER_TOL):
  '''
  Maximum likelihood estimate of t for zero-mean Gaussian samples whose
  covariance is assumed to be phi(t). Works with fewer samples than
  dimensions. `objective` is the mean negative log-likelihood per sample.
  '''
  y = np.asarray(samples, dtype=float)
  if y.ndim == 1:
    y = y[None, :]
  if y.shape[0] == 0:
    raise ValueError('Need at least one sample.')
  if y.shape[1] != seg.dim:
    raise DimensionError('Samples have dimension %d, family has %d.'
        % (y.shape[1], seg.dim))
  if seg.is_degenerate():
    raise DegenerateFamilyError('Anchors coincide; the family is a single '
        'point.')
  pd = seg.pencil
  q, n = y.shape
  w = pd.U.T @ pd.inv_sqrt_a1.array @ y.T
  # mean squared whitened coordinates, the diagonal of Z for the uncentered
  # covariance
  s = np.sum(w ** 2, axis=1) / q
  ell = pd.log_lambdas

  def derivatives(t):
    e = s * np.exp(-t * ell)
    return float(np.sum(ell) - np.sum(e * ell)), float(np.sum(e * ell ** 2))

  if seg.scaling_factor() is not None:
    t = float(np.log(np.sum(s) / n) / np.mean(ell))
    iterations = 0
  else:
    t, _, iterations = minimize_convex(derivatives, float(np.sum(ell ** 2)),
        t0=t0, tol=tol, limit=_bracket_limit(ell))
  logdet = seg.anchor1.logdet() + t * np.sum(ell)
  nll = 0.5 * (n * np.log(2 * np.pi) + logdet
      + np.sum(s * np.exp(-t * ell)))
  return ProjectionResult(
      t=float(t),
      projected=eval_segment(seg, t),
      objective=float(nll),
      residual=-derivatives(t)[0],
      iterations=iterations,
      method='mle')


def kl_gaussian(C1, C2, direction='forward'):
  '''
  KL divergence between N(0, C1) and N(0, C2). 'forward' gives
  KL(N(0, C1) || N(0, C2)), 'reverse' the other order.
  '''
  lam = pencil_eigenvalues(C1, C2)
  if direction == 'forward':
    return float(np.sum(1. / lam + np.log(lam) - 1.) / 2.)
  if direction == 'reverse':
    return float(np.sum(lam - np.log(lam) - 1.) / 2.)
  raise ValueError('Unknown KL direction %r.' % direction)


def spectral_loss(method, seg, C, t):
  '''
  Squared natural distance, 2 KL(C || phi(t)) or 2 KL(phi(t) || C).
  '''
  _check_method(method)
  return WhiteningContext(seg, C).loss(method, t)


def objective_derivatives(method, seg, C, t):
  _check_method(method)
  return WhiteningContext(seg, C).derivatives(method, t)


def optimality_residual(method, seg, C, t):
  _check_method(method)
  return WhiteningContext(seg, C).residual(method, t)


def orthogonality_residual(seg, C, t, method=NATURAL):
  '''
  Optimality written as an inner product on the tangent space of the
  whitened family R(s) = (A1^-1/2 A2 A1^-1/2)^s.

  natural: g_R(t)(log W, log R(1+t)) with W = A1^-1/2 C A1^-1/2.
  reverseI: g_R(t)(log exp(W - R(t)), log R(1+t)).
  iproj: g_R(-t)(log exp(W^-1 - R(-t)), log R(1-t)).
  Logarithms are taken at the base point. Each value equals the matching
  trace residual.
  '''
  _check_method(method)
  C = _full_rank(C)
  pd = seg.pencil

  def R(s):
    return SpdMatrix.from_eig(pd.lambdas ** s, pd.U)

  W = SpdMatrix(pd.whiten(C))
  if method == NATURAL:
    base = R(t)
    first = log_map(base, W)
    second = log_map(base, R(1. + t))
  elif method == REVERSE_I:
    base = R(t)
    first = log_map(base, exp_map(base, W.array - base.array))
    second = log_map(base, R(1. + t))
  else:
    base = R(-t)
    first = log_map(base, exp_map(base, W.inverse().array - base.array))
    second = log_map(base, R(1. - t))
  return metric_inner(base, first, second)


def closed_form_t(seg, C, tol=1e-8):
  '''
  Determinant formula
    (log det C - log det A1) / (log det A2 - log det A1).
  Returns the value when it is exact, that is when A2 = alpha A1 or when C
  lies on the family, and None otherwise.
  '''
  C = _full_rank(C)
  ell = seg.pencil.log_lambdas
  denominator = float(np.sum(ell))
  if abs(denominator) <= 1e-12 * max(1., np.sqrt(np.sum(ell ** 2))):
    raise DegenerateFamilyError('Anchors share the same log-determinant; the '
        'determinant formula is undefined.')
  t = (C.logdet() - seg.anchor1.logdet()) / denominator
  if seg.scaling_factor() is not None:
    return float(t)
  gap = natural_distance(eval_segment(seg, t), C)
  if gap <= tol * max(1., seg.length):
    return float(t)
  return None


@dataclasses.dataclass(frozen=True)
class LocalAnalysisResult:
  epsilons: np.ndarray
  delta_hat: np.ndarray
  delta_check: np.ndarray
  delta_natural: np.ndarray
  hat_second_deriv: float

  def curvature_fit(self, lo=0.01, hi=0.1):
    '''
    Least-squares fit of a eps^2 + b eps^3 + c eps^4 to both curves over
    lo <= eps <= hi. Returns the two eps^2 coefficients (hat, check).
    '''
    eps = np.asarray(self.epsilons)
    mask = (eps >= lo) & (eps <= hi)
    if mask.sum() < 3:
      raise ValueError('Need at least three epsilons in [%g, %g].' % (lo, hi))
    e = eps[mask]
    basis = np.stack([e ** 2, e ** 3, e ** 4], axis=1)
    hat = np.linalg.lstsq(basis, np.asarray(self.delta_hat)[mask],
        rcond=None)[0]
    check = np.linalg.lstsq(basis, np.asarray(self.delta_check)[mask],
        rcond=None)[0]
    return float(hat[0]), float(check[0])

  def rows(self):
    return [(float(e), float(h), float(c), float(z)) for e, h, c, z in
        zip(self.epsilons, self.delta_hat, self.delta_check,
            self.delta_natural)]


def local_analysis(A1, A2, C, epsilons, t_tol=1e-6):
  '''
  Follows the geodesic from A1 towards C, rescaled to unit speed, and
  reports how far the two KL projections drift from the natural projection
  (which stays at t = 0) as a function of the step eps.

  A1 must be the natural projection of C onto the geodesic through A1 and
  A2.
  '''
  A1 = as_spd(A1)
  A2 = as_spd(A2)
  C = _full_rank(C)
  seg = GeodesicSegment(A1, A2)
  t_star = natural_projection(seg, C).t
  if abs(t_star) > t_tol:
    raise PreconditionError('A1 is not the natural projection of C: t* = %g.'
        % t_star)
  dist = natural_distance(A1, C)
  if dist <= 0:
    raise PreconditionError('C coincides with A1.')
  towards = GeodesicSegment(A1, C)
  c_hat = eval_segment(towards, 1. / dist)
  normal = GeodesicSegment(A1, c_hat)
  eps = np.asarray(epsilons, dtype=float)
  hat, check, nat = [], [], []
  for e in eps:
    c_eps = eval_segment(normal, e)
    results = project_all(seg, c_eps)
    t0 = results[NATURAL].t
    nat.append(t0)
    hat.append(results[REVERSE_I].t - t0)
    check.append(results[IPROJ].t - t0)
  pd = seg.pencil
  x = pd.whiten(c_hat)
  log_x = SpdMatrix(x).log().array
  log_a2 = SpdMatrix(pd.whiten(A2)).log().array
  second = float(np.trace(log_x @ log_x @ log_a2) / seg.length ** 2)
  logger.info('local analysis: %d epsilons, analytic second derivative %g',
      len(eps), second)
  return LocalAnalysisResult(
      epsilons=eps,
      delta_hat=np.array(hat),
      delta_check=np.array(check),
      delta_natural=np.array(nat),
      hat_second_deriv=second)


def local_analysis_fixture(rng, n):
  '''
  Random instance for `local_analysis`: Wishart draws A, A2 and C, with A1
  the natural projection of C onto the geodesic from A to A2.
  '''
  A = random_spd(rng, n)
  A2 = random_spd(rng, n)
  C = random_spd(rng, n)
  A1 = natural_projection(GeodesicSegment(A, A2), C).projected
  return A1, A2, C
