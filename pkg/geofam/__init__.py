'''
Geodesic covariance families on the manifold of symmetric positive-definite
matrices, with natural, reverse-I and I projections onto them.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

from ._version import __version__
version = __version__

from .errors import (
  GeofamError, ConfigError, ConvergenceError, DegenerateFamilyError,
  DimensionError, NotPositiveDefiniteError, PreconditionError,
  RankDeficientError, ReconstructionError, SymmetryError,
)
from .manifold import (
  SpdMatrix, SymMatrix, PencilDecomposition, sym_sqrt, sym_power, sym_log,
  sym_exp, pencil_decompose, natural_distance, fisher_rao_distance,
  geodesic_point, log_map, exp_map, metric_inner, random_spd,
)
from .family import (
  GeodesicSegment, ScaledFamily, FamilyTree, Leaf, Node, eval_segment,
  eval_scaled, eval_tree, build_tree, distinct_orderings, flat_point,
  load_family,
)
from .projection import (
  SampleCovariance, WhiteningContext, ProjectionResult, LocalAnalysisResult,
  natural_projection, reverse_iprojection, iprojection, project,
  project_all, gaussian_mle_from_data, kl_gaussian, spectral_loss,
  objective_derivatives, optimality_residual, orthogonality_residual,
  closed_form_t, distance_to_family, compress, local_analysis,
  local_analysis_fixture,
)
from .descent import (
  DescentConfig, DescentResult, coordinate_descent, sweep_order,
  induced_segment, coordinate_gradient, multi_start_descent,
)
from .config import AquiferConfig, KernelSpec, NoiseSpec, RunConfig
