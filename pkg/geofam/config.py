'''
Run configuration: aquifer model, descent settings and experiment sizes.

Every section is a frozen dataclass. A JSON config file mirrors the
nesting:

  {"seed": 7,
   "aquifer": {"length": 100, ..., "kernel": {"sigma2": 0.3, ...}},
   "descent": {"coord_tol": 1e-4, ...},
   "experiment": {"anchor_q": 100000, ...}}
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import dataclasses
import logging

import numpy as np

from .descent import DescentConfig
from .errors import ConfigError
from .manifold import as_spd
from .util import read_json

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class KernelSpec:
  '''
  sigma2 exp(-(1/p) (|x - x'| / ell)^p)
  '''
  sigma2: float = 0.3
  ell: float = 20.
  p: float = 2.

  def validate(self):
    if not self.sigma2 > 0:
      raise ConfigError('Kernel variance sigma2 must be positive, got %r.'
          % self.sigma2)
    if not self.ell > 0:
      raise ConfigError('Kernel length ell must be positive, got %r.'
          % self.ell)
    if not 0 < self.p <= 2:
      raise ConfigError('Kernel exponent p must lie in (0, 2], got %r.'
          % self.p)
    return self


@dataclasses.dataclass(frozen=True)
class AquiferConfig:
  length: float = 100.
  h1: float = 50.
  h2: float = 20.
  source: float = 0.02
  n_obs: int = 20
  grid_nodes: int = 201
  kernel: KernelSpec = dataclasses.field(default_factory=KernelSpec)
  gp_mean: float = 1.

  def validate(self):
    if not self.length > 0:
      raise ConfigError('Domain length must be positive, got %r.'
          % self.length)
    if int(self.n_obs) < 2:
      raise ConfigError('Need at least two observation points, got %r.'
          % self.n_obs)
    if int(self.grid_nodes) < int(self.n_obs):
      raise ConfigError('grid_nodes (%r) must be at least n_obs (%r).'
          % (self.grid_nodes, self.n_obs))
    if int(self.grid_nodes) < 3:
      raise ConfigError('Need at least three grid nodes.')
    self.kernel.validate()
    return self

  def with_kernel(self, **kw):
    return dataclasses.replace(self,
        kernel=dataclasses.replace(self.kernel, **kw))


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
  '''
  Gaussian observation noise with standard deviation
  alpha * 0.05 * sqrt(Tr(reference) / n).
  '''
  alpha: float
  reference: object

  def validate(self):
    if not self.alpha >= 0:
      raise ConfigError('Noise magnitude alpha must be non-negative, got %r.'
          % self.alpha)
    return self

  @property
  def std(self):
    a = np.asarray(as_spd(self.reference))
    return float(self.alpha * 0.05 * np.sqrt(np.trace(a) / a.shape[0]))


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
  anchor_q: int = 100000
  target_q: int = 1000
  trials: int = 200
  noise_trials: int = 100
  alphas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
  epsilons: tuple = tuple(np.round(np.linspace(0., 0.1, 21), 6).tolist())
  local_dim: int = 10
  grid: int = 41
  threads: int = 1
  chunk: int = 10000

  def validate(self):
    for name in ('anchor_q', 'target_q'):
      if int(getattr(self, name)) < 2:
        raise ConfigError('%s must be at least 2, got %r.'
            % (name, getattr(self, name)))
    for name in ('trials', 'noise_trials', 'local_dim', 'threads', 'chunk'):
      if int(getattr(self, name)) < 1:
        raise ConfigError('%s must be at least 1, got %r.'
            % (name, getattr(self, name)))
    if int(self.grid) < 2:
      raise ConfigError('grid must be at least 2, got %r.' % self.grid)
    if any(not a >= 0 for a in self.alphas):
      raise ConfigError('Noise magnitudes must be non-negative: %r.'
          % (self.alphas,))
    if any(not e >= 0 for e in self.epsilons):
      raise ConfigError('Epsilons must be non-negative: %r.'
          % (self.epsilons,))
    return self


SCALES = {
  'desk': dict(anchor_q=100000, target_q=1000, trials=200, noise_trials=100),
  'full': dict(anchor_q=1000000, target_q=1000, trials=1000,
      noise_trials=500),
}


def _from_dict(cls, data, where):
  if not isinstance(data, dict):
    raise ConfigError('Section %s must be a JSON object.' % where)
  fields = dict((f.name, f) for f in dataclasses.fields(cls))
  unknown = set(data) - set(fields)
  if unknown:
    raise ConfigError('Unknown keys in %s: %s.'
        % (where, ', '.join(sorted(unknown))))
  kw = {}
  for name, value in data.items():
    nested = _SECTIONS.get((cls, name))
    if nested is not None:
      value = _from_dict(nested, value, '%s.%s' % (where, name))
    elif isinstance(value, list):
      value = tuple(value)
    kw[name] = value
  try:
    return cls(**kw)
  except TypeError as e:
    raise ConfigError('Invalid section %s: %s' % (where, e))


def _to_dict(obj):
  out = {}
  for f in dataclasses.fields(obj):
    value = getattr(obj, f.name)
    if dataclasses.is_dataclass(value):
      value = _to_dict(value)
    elif isinstance(value, tuple):
      value = list(value)
    out[f.name] = value
  return out


@dataclasses.dataclass(frozen=True)
class RunConfig:
  seed: int = 0
  aquifer: AquiferConfig = dataclasses.field(default_factory=AquiferConfig)
  descent: DescentConfig = dataclasses.field(default_factory=DescentConfig)
  experiment: ExperimentConfig = dataclasses.field(
      default_factory=ExperimentConfig)

  def validate(self):
    if not 0 <= int(self.seed) < 2 ** 64:
      raise ConfigError('Seed must be an unsigned 64-bit integer, got %r.'
          % self.seed)
    self.aquifer.validate()
    self.descent.validate()
    self.experiment.validate()
    return self

  @classmethod
  def from_dict(cls, data):
    return _from_dict(cls, data, 'config').validate()

  def to_dict(self):
    return _to_dict(self)

  @classmethod
  def load(cls, path):
    logger.info('loading configuration from %s', path)
    return cls.from_dict(read_json(path))

  @classmethod
  def for_scale(cls, scale='desk'):
    return cls().with_overrides(scale=scale)

  def with_overrides(self, **kw):
    '''
    Replaces fields by name, wherever they live. `scale` applies one of
    the SCALES presets. None values are ignored.
    '''
    cfg = self
    scale = kw.pop('scale', None)
    if scale is not None:
      if scale not in SCALES:
        raise ConfigError('Unknown scale %r (expected %s).'
            % (scale, ' or '.join(sorted(SCALES))))
      cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(
          cfg.experiment, **SCALES[scale]))
    for name, value in kw.items():
      if value is None:
        continue
      if isinstance(value, list):
        value = tuple(value)
      if name == 'seed':
        cfg = dataclasses.replace(cfg, seed=int(value))
        continue
      for section in ('experiment', 'aquifer', 'descent'):
        sub = getattr(cfg, section)
        if name in (f.name for f in dataclasses.fields(sub)):
          cfg = dataclasses.replace(cfg,
              **{section: dataclasses.replace(sub, **{name: value})})
          break
      else:
        raise ConfigError('Unknown configuration field %r.' % name)
    return cfg.validate()


_SECTIONS = {
  (RunConfig, 'aquifer'): AquiferConfig,
  (RunConfig, 'descent'): DescentConfig,
  (RunConfig, 'experiment'): ExperimentConfig,
  (AquiferConfig, 'kernel'): KernelSpec,
}
