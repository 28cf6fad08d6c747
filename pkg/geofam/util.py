'''
File helpers (matrices, JSON, CSV) and the seeded random streams.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import csv
import json
import logging
import math
import os

import numpy as np

from .errors import ConfigError
from .manifold import SpdMatrix

logger = logging.getLogger(__name__)

# stream purposes for `stream`
ANCHORS = 0
TRIALS = 1
NOISE = 2
FIXTURES = 3


def stream(seed, purpose, index=0):
  '''
  Independent generator for (purpose, index) under the run's master seed.
  The same triple always gives the same stream, whatever thread draws it.
  '''
  seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(purpose, index))
  return np.random.default_rng(seq)


def read_json(path):
  try:
    with open(path, 'r') as f:
      return json.load(f)
  except (OSError, ValueError) as e:
    raise ConfigError('Cannot read JSON file %s: %s' % (path, e))


def _json_default(obj):
  if isinstance(obj, np.ndarray):
    return obj.tolist()
  if isinstance(obj, np.generic):
    return obj.item()
  if isinstance(obj, SpdMatrix):
    return matrix_to_json(obj)
  raise TypeError('%r is not JSON serializable.' % obj)


def to_json(data):
  return json.dumps(data, indent=2, sort_keys=True, default=_json_default)


def write_json(path, data):
  with open(path, 'w') as f:
    f.write(to_json(data))
    f.write('\n')
  return path


def parse_matrix(data, source='<inline>', spd=True):
  '''
  SPD matrix from {"dim": n, "rows": [...]} or a bare list of rows. With
  `spd=False` the square float array is returned unvalidated.
  '''
  if isinstance(data, dict):
    unknown = set(data) - {'dim', 'rows'}
    if unknown or 'rows' not in data:
      raise ConfigError('Matrix in %s must be {"dim": n, "rows": [...]}.'
          % source)
    rows = data['rows']
    dim = data.get('dim')
  else:
    rows, dim = data, None
  try:
    a = np.array(rows, dtype=float)
  except (TypeError, ValueError) as e:
    raise ConfigError('Matrix in %s has invalid entries: %s' % (source, e))
  if a.ndim != 2 or (dim is not None and a.shape != (dim, dim)):
    raise ConfigError('Matrix in %s has shape %r, expected %d x %d.'
        % (source, a.shape, dim or 0, dim or 0))
  return SpdMatrix(a) if spd else a


def matrix_to_json(A):
  a = np.asarray(A)
  return {'dim': int(a.shape[0]), 'rows': a.tolist()}


def read_matrix(path, spd=True):
  '''
  Reads a .json or .csv matrix file. The result is validated as SPD unless
  `spd` is false.
  '''
  if path.lower().endswith('.csv'):
    try:
      with open(path, 'r', newline='') as f:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    except (OSError, ValueError) as e:
      raise ConfigError('Cannot read matrix file %s: %s' % (path, e))
    return parse_matrix(rows, source=path, spd=spd)
  return parse_matrix(read_json(path), source=path, spd=spd)


def write_matrix(path, A):
  a = np.asarray(A)
  if path.lower().endswith('.csv'):
    with open(path, 'w', newline='') as f:
      w = csv.writer(f)
      for row in a:
        w.writerow([repr(float(x)) for x in row])
  else:
    write_json(path, matrix_to_json(a))
  return path


def _cell(value):
  if isinstance(value, (bool, np.bool_)):
    return 'true' if value else 'false'
  if isinstance(value, (float, np.floating)):
    return 'nan' if math.isnan(value) else repr(float(value))
  return value


def write_csv(path, columns, rows):
  with open(path, 'w', newline='') as f:
    w = csv.writer(f)
    w.writerow(columns)
    for row in rows:
      w.writerow([_cell(v) for v in row])
  return path


def ensure_dir(path):
  os.makedirs(path, exist_ok=True)
  return path
