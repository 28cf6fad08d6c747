'''
Command line front end.

  geofam project --family F --covariance C [--method natural|mle|iproj|all]
  geofam build-anchors [--config F] [--q N] [--seed S] --out DIR
  geofam experiment NAME [--config F] [--scale desk|full] --out DIR
  geofam rerun DIR/manifest.json

Exit status: 0 success, 2 configuration error, 3 numerical or rank error,
4 non-convergence.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import util
from ._version import __version__
from .config import RunConfig
from .descent import coordinate_descent
from .errors import ConfigError, ConvergenceError, GeofamError
from .experiments import NAMES, PAIR_ANCHORS, build_anchors, run_experiment
from .family import GeodesicSegment, load_family
from .projection import METHODS, REVERSE_I, SampleCovariance, project
from .projection import project_all

logger = logging.getLogger(__name__)

METHOD_FLAGS = {'natural': 'natural', 'mle': REVERSE_I, 'reverseI': REVERSE_I,
    'iproj': 'iproj', 'all': 'all'}


@dataclasses.dataclass
class RunManifest:
  command: str
  arguments: dict
  config: dict
  seed: int
  version: str = __version__
  outputs: list = dataclasses.field(default_factory=list)

  def to_dict(self):
    return dataclasses.asdict(self)

  @classmethod
  def load(cls, path):
    data = util.read_json(path)
    try:
      return cls(**data)
    except TypeError as e:
      raise ConfigError('Invalid manifest %s: %s' % (path, e))


def _run_config(args):
  run = RunConfig.load(args.config) if args.config else RunConfig()
  alphas = None
  if getattr(args, 'alpha_grid', None):
    try:
      alphas = tuple(float(a) for a in args.alpha_grid.split(','))
    except ValueError:
      raise ConfigError('Invalid --alpha-grid %r.' % args.alpha_grid)
  return run.with_overrides(
      scale=getattr(args, 'scale', None),
      seed=args.seed,
      anchor_q=getattr(args, 'anchor_q', None),
      target_q=getattr(args, 'q', None),
      trials=getattr(args, 'trials', None),
      noise_trials=getattr(args, 'trials', None),
      alphas=alphas,
      threads=getattr(args, 'threads', None))


def _write_manifest(outdir, command, arguments, run, outputs):
  manifest = RunManifest(command=command, arguments=arguments,
      config=run.to_dict(), seed=int(run.seed), outputs=sorted(outputs))
  util.write_json(os.path.join(outdir, 'manifest.json'), manifest.to_dict())
  return manifest


def cmd_project(args):
  tree = load_family(args.family)
  C = SampleCovariance(util.read_matrix(args.covariance, spd=False)).spd
  method = METHOD_FLAGS[args.method]
  stalled = []
  if tree.num_params == 1:
    seg = GeodesicSegment(*tree.anchors)
    if method == 'all':
      data = dict((m, r.to_dict()) for m, r in project_all(seg, C).items())
    else:
      data = project(seg, C, method).to_dict()
  else:
    run = RunConfig.load(args.config) if args.config else RunConfig()
    methods = METHODS if method == 'all' else (method,)
    results = {}
    for m in methods:
      cfg = dataclasses.replace(run.descent, objective=m)
      results[m] = coordinate_descent(tree, C, cfg).to_dict()
    data = results if method == 'all' else results[method]
    stalled = sorted(m for m, r in results.items() if not r['converged'])
  text = util.to_json(data)
  if args.out:
    with open(args.out, 'w') as f:
      f.write(text + '\n')
  else:
    sys.stdout.write(text + '\n')
  if stalled:
    return _fail(ConvergenceError('Coordinate descent did not converge '
        'for %s within %d sweeps.' % (', '.join(stalled),
        run.descent.max_outer_iters)), ConvergenceError.exit_code)
  return 0


def cmd_build_anchors(args):
  run = _run_config(args)
  kernels = PAIR_ANCHORS
  if args.kernels:
    try:
      kernels = tuple(tuple(float(v) for v in k.split(':'))
          for k in args.kernels.split(','))
    except ValueError:
      raise ConfigError('Invalid --kernels %r, expected ell:sigma2,...'
          % args.kernels)
    if any(len(k) != 2 for k in kernels):
      raise ConfigError('Invalid --kernels %r, expected ell:sigma2,...'
          % args.kernels)
  for ell, sigma2 in kernels:
    run.aquifer.with_kernel(ell=ell, sigma2=sigma2).validate()
  util.ensure_dir(args.out)
  anchors = build_anchors(run, kernels)
  outputs = []
  names = []
  for i, a in enumerate(anchors):
    name = 'anchor_%d.json' % (i + 1)
    util.write_matrix(os.path.join(args.out, name), a)
    names.append(name)
  outputs.extend(names)
  util.write_json(os.path.join(args.out, 'family.json'),
      {'shape': 'unbalanced', 'anchors': names})
  outputs.append('family.json')
  _write_manifest(args.out, 'build-anchors', {'kernels': args.kernels},
      run, outputs)
  return 0


def write_result(result, outdir):
  outputs = []
  name = result.name.replace('-', '_')
  util.write_csv(os.path.join(outdir, '%s.csv' % name), result.columns,
      result.rows)
  outputs.append('%s.csv' % name)
  for table, (columns, rows) in sorted(result.tables.items()):
    fname = '%s_%s.csv' % (name, table)
    util.write_csv(os.path.join(outdir, fname), columns, rows)
    outputs.append(fname)
  util.write_json(os.path.join(outdir, 'summary.json'), result.summary)
  outputs.append('summary.json')
  return outputs


def cmd_experiment(args):
  run = _run_config(args)
  util.ensure_dir(args.out)
  logger.info('running experiment %s (seed %d)', args.name, run.seed)
  result = run_experiment(args.name, run)
  outputs = write_result(result, args.out)
  arguments = {'name': args.name, 'report': bool(args.report)}
  manifest = _write_manifest(args.out, 'experiment', arguments, run,
      outputs + (['report.html'] if args.report else []))
  if args.report:
    from .report import render_report
    with open(os.path.join(args.out, 'report.html'), 'w') as f:
      f.write(render_report(result, manifest.to_dict()))
  return 0


def cmd_rerun(args):
  manifest = RunManifest.load(args.manifest)
  outdir = args.out or os.path.dirname(os.path.abspath(args.manifest))
  run = RunConfig.from_dict(manifest.config)
  util.ensure_dir(outdir)
  config_path = os.path.join(outdir, '.rerun-config.json')
  util.write_json(config_path, run.to_dict())
  try:
    if manifest.command == 'experiment':
      ns = argparse.Namespace(name=manifest.arguments['name'],
          report=manifest.arguments.get('report', False), out=outdir,
          config=config_path, seed=None)
      return cmd_experiment(ns)
    if manifest.command == 'build-anchors':
      ns = argparse.Namespace(kernels=manifest.arguments.get('kernels'),
          out=outdir, config=config_path, seed=None)
      return cmd_build_anchors(ns)
  finally:
    os.remove(config_path)
  raise ConfigError('Manifest command %r cannot be rerun.' % manifest.command)


def build_parser():
  parser = argparse.ArgumentParser(prog='geofam',
      description='Geodesic covariance families on the SPD manifold.')
  parser.add_argument('--version', action='version',
      version='%(prog)s ' + __version__)
  parser.add_argument('-v', '--verbose', action='count', default=0)
  parser.add_argument('-q', '--quiet', action='store_true')
  sub = parser.add_subparsers(dest='command')
  sub.required = True

  p = sub.add_parser('project', help='project a covariance onto a family')
  p.add_argument('--family', required=True)
  p.add_argument('--covariance', required=True)
  p.add_argument('--method', choices=sorted(METHOD_FLAGS), default='natural')
  p.add_argument('--config')
  p.add_argument('--out')
  p.set_defaults(func=cmd_project)

  p = sub.add_parser('build-anchors', help='simulate anchor covariances')
  p.add_argument('--config')
  p.add_argument('--seed', type=int)
  p.add_argument('--q', dest='anchor_q', type=int)
  p.add_argument('--kernels', help='ell:sigma2 pairs, e.g. 20:0.3,30:0.3')
  p.add_argument('--threads', type=int)
  p.add_argument('--out', required=True)
  p.set_defaults(func=cmd_build_anchors)

  p = sub.add_parser('experiment', help='run a batch experiment')
  p.add_argument('name', choices=NAMES)
  p.add_argument('--config')
  p.add_argument('--scale', choices=('desk', 'full'))
  p.add_argument('--seed', type=int)
  p.add_argument('--anchor-q', dest='anchor_q', type=int)
  p.add_argument('--q', type=int, help='samples per target estimate')
  p.add_argument('--trials', type=int)
  p.add_argument('--alpha-grid', dest='alpha_grid')
  p.add_argument('--threads', type=int)
  p.add_argument('--report', action='store_true')
  p.add_argument('--out', required=True)
  p.set_defaults(func=cmd_experiment)

  p = sub.add_parser('rerun', help='repeat a run from its manifest')
  p.add_argument('manifest')
  p.add_argument('--out')
  p.set_defaults(func=cmd_rerun)
  return parser


def _configure_logging(args):
  if args.quiet:
    level = logging.WARNING
  elif args.verbose >= 2:
    level = logging.DEBUG
  elif args.verbose == 1:
    level = logging.INFO
  else:
    level = logging.WARNING
  logging.basicConfig(level=level,
      format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv=None):
  parser = build_parser()
  args = parser.parse_args(argv)
  _configure_logging(args)
  try:
    return args.func(args)
  except GeofamError as e:
    return _fail(e, e.exit_code)
  except ValueError as e:
    return _fail(e, 3)
  except OSError as e:
    return _fail(e, 2)


def _fail(error, code):
  data = {'error': type(error).__name__, 'message': str(error),
      'exit_code': code}
  sys.stderr.write(json.dumps(data, sort_keys=True) + '\n')
  logger.debug('command failed', exc_info=error)
  return code
