__license__ = '''
This file is part of geofam.

geofam is free software: you can redistribute it and/or modify
it under the terms of the GNU Lesser General Public License as
published by the Free Software Foundation, either version 3 of
the License, or (at your option) any later version.

geofam is distributed in the hope that it will be useful, but
WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU Lesser General Public License for more details.

You should have received a copy of the GNU Lesser General
Public License along with geofam.  If not, see
<http://www.gnu.org/licenses/>.
'''
# pylint: disable=bad-whitespace

from setuptools import setup

_version = {}
with open('geofam/_version.py') as f:
  exec(f.read(), _version)

long_description = open('README.md').read()

setup(
  name    = 'geofam',
  version = _version['__version__'],
  license = 'LGPLv3',
  description      = 'Geodesic covariance families and projections on the '
                     'manifold of symmetric positive-definite matrices.',
  long_description = long_description,
  long_description_content_type='text/markdown',
  keywords         = 'covariance spd manifold geodesic riemannian '
                     'kullback-leibler regularization',

  python_requires='>=3.8',
  install_requires=[
    'numpy>=1.20',
    'scipy>=1.6',
    'dominate>=2.6',
  ],
  extras_require={
    'test': ['pytest'],
  },
  classifiers = [
    'Intended Audience :: Science/Research',
    'License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)',
    'Operating System :: OS Independent',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Topic :: Scientific/Engineering :: Mathematics',
  ],

  packages = ['geofam'],
  entry_points = {
    'console_scripts': ['geofam = geofam.cli:main'],
  },
  include_package_data = True,
)
