import numpy as np

from geofam.experiments import ExperimentResult
from geofam.report import data_table, plot, render_report, summary_table


def test_summary_table_flattens():
  html = summary_table({'ratio': {'median': 1.5, 'q1': 1.}, 'mean_b': 0.25}
      ).render()
  assert '<th>ratio.median</th>' in html
  assert '<td>1.5</td>' in html
  assert '<th>mean_b</th>' in html


def test_data_table_limit():
  rows = [(i, i * 0.5) for i in range(60)]
  html = data_table(('trial', 'b'), rows).render()
  assert '50 of 60 rows shown.' in html
  assert html.count('<tr>') == 51


def test_plot_splits_at_nan():
  ts = np.linspace(0, 1, 11)
  flat = ts.copy()
  flat[5] = np.nan
  html = plot([('geodesic', ts, ts ** 2), ('flat', ts, flat)]).render()
  assert html.count('<polyline') == 3
  assert 'stroke-width="1.5"' in html
  assert 'flat' in html
  empty = plot([('nothing', [np.nan], [np.nan])]).render()
  assert 'no finite data' in empty


def test_render_report():
  rows = [(e, e ** 2, -e ** 2, 0.) for e in np.linspace(0, .1, 5)]
  result = ExperimentResult('local-analysis',
      ('epsilon', 'delta_hat', 'delta_check', 'delta_natural'), rows,
      {'hat_second_deriv': 2.})
  manifest = {'command': 'experiment', 'seed': 42, 'outputs': []}
  html = render_report(result, manifest)
  assert html.startswith('<!DOCTYPE html>')
  assert '<title>geofam: local-analysis</title>' in html
  assert html.count('<polyline') == 3
  assert 'hat_second_deriv' in html
  assert '42' in html


def test_render_flat_panels():
  columns = ('t', 'geodesic_distance', 'flat_distance', 'flat_defined')
  rows = [(t, 1 + t ** 2, 1 + t ** 2 + 0.1, True)
      for t in np.linspace(0, 1, 5)]
  result = ExperimentResult('flat-vs-geodesic', columns, rows,
      {'close': {'max_gap_unit': 0.01}}, {'close': (columns, rows)})
  html = render_report(result, {'outputs': []})
  assert html.count('<svg') == 2
  assert html.count('<polyline') == 4
  assert 'close anchors' in html
  assert 'close.max_gap_unit' in html
