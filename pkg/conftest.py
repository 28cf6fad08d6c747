# used by pytest to test against the local copy of geofam,
# and to share fixtures between the test modules

import numpy as np
import pytest

from geofam import util
from geofam.manifold import random_spd


def pytest_addoption(parser):
  parser.addoption('--runslow', action='store_true', default=False,
      help='run desk-scale statistical reproductions')


def pytest_collection_modifyitems(config, items):
  if config.getoption('--runslow'):
    return
  skip = pytest.mark.skip(reason='needs --runslow')
  for item in items:
    if 'slow' in item.keywords:
      item.add_marker(skip)


@pytest.fixture
def rng(request):
  # one fixture stream per test, stable across runs
  index = sum(ord(c) for c in request.node.name)
  return util.stream(20240601, util.FIXTURES, index)


@pytest.fixture
def spd_triple(rng):
  return tuple(random_spd(rng, 8) for _ in range(3))


@pytest.fixture
def diag():
  return lambda *values: np.diag(np.array(values, dtype=float))
