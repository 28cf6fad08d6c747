'''
HTML run reports: manifest, summary and curves as inline SVG.
'''

__license__ = '''
This file is part of geofam, released under the GNU Lesser General Public
License version 3 or later; see LICENSE.txt.
'''

import logging

import dominate
from dominate import svg as s
from dominate.tags import div, h1, h2, p, pre, style, table, tbody, td, th
from dominate.tags import thead, tr

import numpy as np

from .util import to_json

logger = logging.getLogger(__name__)

COLORS = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b')

CSS = '''
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; margin-bottom: 1em; }
td, th { border: 1px solid #ccc; padding: 2px 8px; text-align: right; }
.legend span { margin-right: 1em; }
'''


def _fmt(value):
  if isinstance(value, float):
    return '%.6g' % value
  return str(value)


def _flatten(summary, prefix=''):
  for key, value in sorted(summary.items(), key=lambda kv: str(kv[0])):
    name = '%s%s' % (prefix, key)
    if isinstance(value, dict):
      for item in _flatten(value, name + '.'):
        yield item
    else:
      yield name, value


def summary_table(summary):
  t = table(cls='summary')
  with t:
    for name, value in _flatten(summary):
      tr(th(name), td(_fmt(value)))
  return t


def data_table(columns, rows, limit=50):
  t = table()
  with t:
    thead(tr([th(c) for c in columns]))
    with tbody():
      for row in rows[:limit]:
        tr([td(_fmt(v)) for v in row])
  if len(rows) > limit:
    return div(t, p('%d of %d rows shown.' % (limit, len(rows))))
  return t


def _segments(xs, ys):
  '''
  Splits a curve at non-finite values.
  '''
  run = []
  for x, y in zip(xs, ys):
    if np.isfinite(x) and np.isfinite(y):
      run.append((x, y))
    elif run:
      yield run
      run = []
  if run:
    yield run


def plot(series, width=480, height=260, pad=30):
  '''
  Line plot of [(label, xs, ys), ...] as an SVG element.
  '''
  xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
  ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
  ok = np.isfinite(xs) & np.isfinite(ys)
  if not ok.any():
    return p('no finite data to plot')
  x0, x1 = xs[ok].min(), xs[ok].max()
  y0, y1 = ys[ok].min(), ys[ok].max()
  x1 = x1 if x1 > x0 else x0 + 1.
  y1 = y1 if y1 > y0 else y0 + 1.

  def px(x, y):
    return ('%.2f,%.2f' % (pad + (x - x0) / (x1 - x0) * (width - 2 * pad),
        height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)))

  figure = s.svg(width=width, height=height,
      viewBox='0 0 %d %d' % (width, height))
  with figure:
    s.rect(x=0, y=0, width=width, height=height, fill='white',
        stroke='#999')
    s.text('%.3g' % y1, x=2, y=pad - 4, font_size=10)
    s.text('%.3g' % y0, x=2, y=height - pad + 12, font_size=10)
    s.text('%.3g' % x0, x=pad, y=height - 4, font_size=10)
    s.text('%.3g' % x1, x=width - pad - 20, y=height - 4, font_size=10)
    for k, (label, cx, cy) in enumerate(series):
      color = COLORS[k % len(COLORS)]
      for run in _segments(np.asarray(cx, float), np.asarray(cy, float)):
        s.polyline(points=' '.join(px(x, y) for x, y in run), fill='none',
            stroke=color, stroke_width=1.5)
  legend = div(cls='legend')
  for k, (label, _, _) in enumerate(series):
    legend.add(dominate.tags.span(label,
        style='color: %s' % COLORS[k % len(COLORS)]))
  return div(figure, legend)


def _curves(result):
  name = result.name
  if name == 'local-analysis':
    e = result.column('epsilon')
    return [('delta t (epsilon)', [
        ('reverse I-projection', e, result.column('delta_hat')),
        ('I-projection', e, result.column('delta_check')),
        ('natural projection', e, result.column('delta_natural'))])]
  if name == 'flat-vs-geodesic':
    t = result.column('t')
    curves = [('distance to target, far anchors', [
        ('geodesic family', t, result.column('geodesic_distance')),
        ('flat family', t, result.column('flat_distance'))])]
    if 'close' in result.tables:
      columns, rows = result.tables['close']
      curves.append(('distance to target, close anchors', [
          ('geodesic family', [r[0] for r in rows], [r[1] for r in rows]),
          ('flat family', [r[0] for r in rows], [r[2] for r in rows])]))
    return curves
  if name == 'regularization':
    i = result.column('trial')
    return [('distance to truth per trial', [
        ("b' (sample)", i, result.column('b_prime')),
        ('b (projected)', i, result.column('b'))])]
  if name == 'noise':
    columns, rows = result.tables['quartiles']
    curves = []
    for method in ('natural', 'mle'):
      picked = [r for r in rows if r[1] == method]
      curves.append(('median ratio, %s' % method,
          [r[0] for r in picked], [r[3] for r in picked]))
    return [('median regularization ratio against alpha', curves)]
  if name == 'multiparam':
    columns, rows = result.tables['traces']
    curves = []
    for trial in sorted(set(r[0] for r in rows))[:6]:
      picked = [r for r in rows if r[0] == trial]
      curves.append(('trial %d' % trial, [r[1] for r in picked],
          [r[2] for r in picked]))
    plots = [('descent objective per sweep', curves)]
    if 'path' in result.tables:
      columns, rows = result.tables['path']
      plots.append(('descent path of trial 0 in (t1, t2)',
          [('iterates', [r[1] for r in rows], [r[2] for r in rows])]))
    return plots
  return []


def render_report(result, manifest):
  '''
  Renders an experiment result and its run manifest as an HTML page.
  '''
  doc = dominate.document(title='geofam: %s' % result.name)
  with doc.head:
    style(CSS)
  with doc:
    h1('Experiment: %s' % result.name)
    h2('Summary')
    summary_table(result.summary)
    for title, series in _curves(result):
      h2(title)
      plot(series)
    h2('Trials')
    data_table(result.columns, result.rows)
    for name, (columns, rows) in sorted(result.tables.items()):
      h2(name)
      data_table(columns, rows)
    h2('Manifest')
    pre(to_json(manifest))
  logger.debug('rendered report for %s', result.name)
  return doc.render()
