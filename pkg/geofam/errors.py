'''
Exception types raised by geofam.

Every class also derives from the matching built-in exception, so callers
that only know about ValueError or RuntimeError keep working.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''


class GeofamError(Exception):
  # process exit status used by the command line front end
  exit_code = 1


class ConfigError(GeofamError, ValueError):
  exit_code = 2


class DimensionError(GeofamError, ValueError):
  exit_code = 3


class SymmetryError(GeofamError, ValueError):
  exit_code = 3


class NotPositiveDefiniteError(GeofamError, ValueError):
  '''
  Raised when a matrix that must be SPD is not. `eigenvalue` holds the
  offending (smallest) eigenvalue when it is known.
  '''
  exit_code = 3

  def __init__(self, message, eigenvalue=None):
    super(NotPositiveDefiniteError, self).__init__(message)
    self.eigenvalue = eigenvalue


class RankDeficientError(NotPositiveDefiniteError):
  '''
  A sample covariance is not full rank, which happens whenever fewer
  samples than dimensions were used. Natural projection and both KL
  projections are unavailable; Gaussian likelihood still works.
  '''


class DegenerateFamilyError(GeofamError, ValueError):
  exit_code = 3


class PreconditionError(GeofamError, ValueError):
  exit_code = 3


class ReconstructionError(GeofamError, ArithmeticError):
  '''
  A decomposition does not reproduce its input within the relative
  reconstruction tolerance.
  '''
  exit_code = 3


class ConvergenceError(GeofamError, RuntimeError):
  exit_code = 4
