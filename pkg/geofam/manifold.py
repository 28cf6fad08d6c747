'''
Geometry of the manifold of symmetric positive-definite matrices under the
affine-invariant (natural) metric.

All matrix functions go through the symmetric eigendecomposition, never
through series expansions or the non-symmetric product A1^-1 A2.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import logging

import numpy as np
from scipy import linalg

from .errors import (
  DimensionError, NotPositiveDefiniteError, ReconstructionError,
  SymmetryError,
)

logger = logging.getLogger(__name__)

# relative tolerances
SYM_TOL = 1e-10
PD_TOL = 1e-12
RECON_TOL = 1e-8
ORTH_TOL = 1e-10


def _readonly(a):
  a.flags.writeable = False
  return a


def _square_array(entries):
  a = np.array(entries, dtype=float)
  if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
    raise DimensionError('Expected a non-empty square matrix, got shape %r.'
        % (a.shape,))
  if not np.all(np.isfinite(a)):
    raise ValueError('Matrix has non-finite entries.')
  return a


def symmetrize(entries, sym_tol=SYM_TOL):
  '''
  Returns (A + A^T) / 2 when A is symmetric within `sym_tol` (relative to
  its largest entry) and raises SymmetryError otherwise.
  '''
  a = _square_array(entries)
  scale = np.max(np.abs(a))
  asym = np.max(np.abs(a - a.T))
  if asym > sym_tol * scale:
    raise SymmetryError('Matrix is not symmetric: max|A - A^T| = %g '
        '(tolerance %g).' % (asym, sym_tol * scale))
  return (a + a.T) / 2


def _eigh_descending(a):
  w, v = linalg.eigh(a)
  order = np.argsort(-w, kind='stable')
  w, v = w[order], v[:, order]
  # fix the sign of each eigenvector: largest-magnitude entry positive
  pivot = np.argmax(np.abs(v), axis=0)
  signs = np.sign(v[pivot, np.arange(v.shape[1])])
  signs[signs == 0] = 1.
  return w, v * signs


class SymMatrix(object):
  '''
  Dense symmetric matrix. Used for tangent vectors of the SPD manifold.
  '''
  def __init__(self, entries, sym_tol=SYM_TOL):
    if isinstance(entries, SymMatrix):
      self.array = entries.array
    else:
      self.array = _readonly(symmetrize(entries, sym_tol))

  @property
  def dim(self):
    return self.array.shape[0]

  def __array__(self, dtype=None, copy=None):
    if dtype is None:
      return self.array
    return self.array.astype(dtype)

  def __add__(self, other):
    return SymMatrix(self.array + np.asarray(other))

  def __sub__(self, other):
    return SymMatrix(self.array - np.asarray(other))

  def __neg__(self):
    return SymMatrix(-self.array)

  def __mul__(self, scalar):
    return SymMatrix(float(scalar) * self.array)
  __rmul__ = __mul__

  def __repr__(self):
    return '<%s.%s at %x: dim %d>' % (
        self.__module__, type(self).__name__, id(self), self.dim)


class SpdMatrix(SymMatrix):
  '''
  Dense symmetric positive-definite matrix with its eigendecomposition.

  The eigenpairs are computed once, at construction, and reused by every
  matrix function (powers, logarithm, inverse).
  '''
  def __init__(self, entries, sym_tol=SYM_TOL, pd_tol=PD_TOL):
    if isinstance(entries, SpdMatrix):
      self.array = entries.array
      self.eigvals = entries.eigvals
      self.eigvecs = entries.eigvecs
      return
    super(SpdMatrix, self).__init__(entries, sym_tol)
    w, v = _eigh_descending(self.array)
    _check_positive(w, pd_tol)
    self.eigvals = _readonly(w)
    self.eigvecs = _readonly(v)

  @classmethod
  def from_eig(cls, eigvals, eigvecs, pd_tol=PD_TOL):
    '''
    Builds V diag(w) V^T without decomposing it again.
    '''
    w = np.asarray(eigvals, dtype=float)
    v = np.asarray(eigvecs, dtype=float)
    order = np.argsort(-w, kind='stable')
    w, v = w[order], v[:, order]
    _check_positive(w, pd_tol)
    a = (v * w) @ v.T
    self = cls.__new__(cls)
    self.array = _readonly((a + a.T) / 2)
    self.eigvals = _readonly(w)
    self.eigvecs = _readonly(v)
    return self

  def power(self, s):
    return SpdMatrix.from_eig(self.eigvals ** s, self.eigvecs)

  def sqrt(self):
    return self.power(0.5)

  def inverse(self):
    return self.power(-1.)

  def log(self):
    return SymMatrix((self.eigvecs * np.log(self.eigvals)) @ self.eigvecs.T)

  def logdet(self):
    return float(np.sum(np.log(self.eigvals)))


def _check_positive(w, pd_tol):
  largest = w[0]
  smallest = w[-1]
  if not largest > 0 or not smallest > pd_tol * largest:
    raise NotPositiveDefiniteError('Matrix is not positive definite: '
        'eigenvalue %g (largest %g, tolerance %g).'
        % (smallest, largest, pd_tol * max(largest, 0.)), smallest)


def as_spd(a):
  return a if isinstance(a, SpdMatrix) else SpdMatrix(a)


def as_sym(a):
  return a if isinstance(a, SymMatrix) else SymMatrix(a)


def _same_dim(*mats):
  dims = set(m.dim for m in mats)
  if len(dims) != 1:
    raise DimensionError('Dimension mismatch: %s.'
        % ', '.join(str(m.dim) for m in mats))


def sym_sqrt(A):
  '''
  Symmetric square root S of A (S S = A). `S.inverse()` gives A^-1/2.
  '''
  return as_spd(A).sqrt()


def sym_power(A, s):
  return as_spd(A).power(s)


def sym_log(A):
  return as_spd(A).log()


def sym_exp(X):
  X = as_sym(X)
  w, v = linalg.eigh(X.array)
  return SpdMatrix.from_eig(np.exp(w), v)


def random_spd(rng, n, dof=None, scale=1.):
  '''
  Wishart-style random SPD matrix G^T G / dof with standard normal G of
  shape (dof, n). `dof` defaults to 2n.
  '''
  dof = 2 * n if dof is None else dof
  if dof < n:
    raise ValueError('Need dof >= n for a full-rank Wishart draw.')
  g = rng.standard_normal((dof, n))
  return SpdMatrix(scale * (g.T @ g) / dof)


class PencilDecomposition(object):
  '''
  Eigenstructure of the pencil (A2, A1), taken from the whitened matrix
  A1^-1/2 A2 A1^-1/2 = U diag(lambdas) U^T. `lambdas` is in descending
  order.
  '''
  def __init__(self, sqrt_a1, inv_sqrt_a1, U, lambdas):
    self.sqrt_a1 = sqrt_a1
    self.inv_sqrt_a1 = inv_sqrt_a1
    self.U = _readonly(np.array(U, dtype=float))
    self.lambdas = _readonly(np.array(lambdas, dtype=float))
    if np.any(self.lambdas <= 0):
      raise NotPositiveDefiniteError('Pencil has a non-positive eigenvalue '
          '%g.' % self.lambdas.min(), self.lambdas.min())
    n = self.U.shape[0]
    orth = np.max(np.abs(self.U.T @ self.U - np.eye(n)))
    if orth > ORTH_TOL * max(1., n ** .5):
      raise ValueError('Pencil eigenvectors are not orthonormal (%g).' % orth)

  @property
  def dim(self):
    return self.U.shape[0]

  @property
  def log_lambdas(self):
    return np.log(self.lambdas)

  def whiten(self, B):
    '''
    A1^-1/2 B A1^-1/2 as a plain symmetric array.
    '''
    s = self.inv_sqrt_a1.array
    w = s @ np.asarray(B) @ s
    return (w + w.T) / 2

  def rotate(self, B):
    '''
    U^T A1^-1/2 B A1^-1/2 U, the matrix called Z when B is a sample
    covariance.
    '''
    z = self.U.T @ self.whiten(B) @ self.U
    return (z + z.T) / 2

  def point(self, t):
    '''
    A1^1/2 U diag(lambdas^t) U^T A1^1/2, built as B B^T so the result is
    symmetric to rounding.

    The point is SPD for every real t, but its condition number grows like
    (lambdas[0] / lambdas[-1])^|t| times that of A1. Once that passes
    1 / PD_TOL the result cannot be certified in double precision and
    NotPositiveDefiniteError is raised; for the pencil (2, 1, 0.5) against
    the identity this happens near |t| = 20.
    '''
    b = (self.sqrt_a1.array @ self.U) * self.lambdas ** (t / 2.)
    try:
      return SpdMatrix(b @ b.T)
    except NotPositiveDefiniteError as e:
      spread = (self.lambdas[0] / self.lambdas[-1]) ** abs(t)
      raise NotPositiveDefiniteError('Geodesic point at t=%g is not '
          'numerically positive definite (pencil spread %g at this t): %s'
          % (t, spread, e), e.eigenvalue)

  def reconstruction_error(self, A2):
    a2 = np.asarray(A2)
    rec = self.point(1.).array
    return np.linalg.norm(rec - a2) / np.linalg.norm(a2)

  def __repr__(self):
    return '<%s.%s at %x: dim %d, lambdas in [%g, %g]>' % (
        self.__module__, type(self).__name__, id(self), self.dim,
        self.lambdas[-1], self.lambdas[0])


def pencil_decompose(A1, A2, strict=False):
  '''
  Decomposes the pencil (A2, A1) and checks that the point at t=1 gives
  back A2 within RECON_TOL (relative Frobenius). The check is advisory:
  a larger error is logged as a warning, which happens for badly
  conditioned anchors. With `strict` it raises ReconstructionError.
  '''
  A1 = as_spd(A1)
  A2 = as_spd(A2)
  _same_dim(A1, A2)
  inv_sqrt = A1.power(-0.5)
  w = inv_sqrt.array @ A2.array @ inv_sqrt.array
  lam, U = _eigh_descending((w + w.T) / 2)
  pd = PencilDecomposition(A1.sqrt(), inv_sqrt, U, lam)
  err = pd.reconstruction_error(A2)
  if err > RECON_TOL:
    if strict:
      raise ReconstructionError('Pencil reconstruction error %g exceeds %g.'
          % (err, RECON_TOL))
    logger.warning('Pencil reconstruction error %g exceeds %g.', err,
        RECON_TOL)
  return pd


def pencil_eigenvalues(A1, A2):
  '''
  Generalized eigenvalues of (A2, A1), descending.
  '''
  A1 = as_spd(A1)
  A2 = as_spd(A2)
  _same_dim(A1, A2)
  s = A1.power(-0.5).array
  w = s @ A2.array @ s
  return np.sort(linalg.eigvalsh((w + w.T) / 2))[::-1]


def natural_distance(A1, A2):
  '''
  d(A1, A2) = sqrt(sum_k log^2 lambda_k) over the pencil (A2, A1).
  '''
  lam = pencil_eigenvalues(A1, A2)
  if lam[-1] <= 0:
    raise NotPositiveDefiniteError('Pencil has a non-positive eigenvalue.',
        lam[-1])
  return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def fisher_rao_distance(A1, A2):
  '''
  Fisher-Rao distance between N(0, A1) and N(0, A2).
  '''
  return natural_distance(A1, A2) / np.sqrt(2.)


def geodesic_point(pd, t):
  return pd.point(float(t))


def log_map(base, B):
  '''
  Tangent vector at `base` pointing to B:
  base^1/2 log(base^-1/2 B base^-1/2) base^1/2.
  '''
  base = as_spd(base)
  B = as_spd(B)
  _same_dim(base, B)
  s, si = base.sqrt().array, base.power(-0.5).array
  w = si @ B.array @ si
  inner = sym_log((w + w.T) / 2).array
  return SymMatrix(s @ inner @ s)


def exp_map(base, X):
  base = as_spd(base)
  X = as_sym(X)
  _same_dim(base, X)
  s, si = base.sqrt().array, base.power(-0.5).array
  w = si @ X.array @ si
  inner = sym_exp((w + w.T) / 2).array
  return SpdMatrix(s @ inner @ s)


def metric_inner(base, X, Y):
  '''
  g_base(X, Y) = Tr(X base^-1 Y base^-1).
  '''
  base = as_spd(base)
  X = as_sym(X)
  Y = as_sym(Y)
  _same_dim(base, X, Y)
  si = base.power(-0.5).array
  xw = si @ X.array @ si
  yw = si @ Y.array @ si
  return float(np.sum(xw * yw))
