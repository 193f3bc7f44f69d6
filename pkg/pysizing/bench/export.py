"""Exports of campaigns, variation studies and iteration traces.

Three formats are written: ``csv`` (one row per attempt, sample point or
iteration, stable column order), ``json`` and ``hdf5`` (PyTables).  Metric
values are in SI units and columns are named after the metric kinds.  Line
plots in SVG are drawn when matplotlib is installed.
"""
import os
import csv
import logging
from collections import OrderedDict

try:
    import simplejson as json
except ImportError:
    import json

import numpy as np
import tables as tb

from pysizing import metrics as m
from pysizing.bench.campaign import CampaignSummary
from pysizing.bench.variation import VariationStudy
from pysizing.agent.history import ContextHistory, OptimizationOutcome
from pysizing.utils import ConfigurationError, ensure_dir, from_si

logger = logging.getLogger(__name__)

CSV = 'csv'
JSON = 'json'
HDF5 = 'hdf5'
FORMATS = (CSV, JSON, HDF5)

EXTENSIONS = {CSV: '.csv', JSON: '.json', HDF5: '.h5'}

CAMPAIGN_COLUMNS = ('attempt', 'iterations', 'success', 'status')
TRACE_KINDS = (m.GAIN_DB, m.UGBW_HZ, m.PM_DEG, m.POWER_W, m.OFFSET_V, m.OUTPUT_RANGE_V,
               m.CMRR_DB, m.THD_DB)
STUDY_COLUMNS = ('curve', 'sample', 'x', 'y')
ENVELOPE_COLUMNS = ('curve', 'x', 'nominal', 'min', 'mean', 'max')


def _check_format(fmt):
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise ConfigurationError("unknown export format {0!r}; have {1}".format(
                                 fmt, ', '.join(FORMATS)))
    return fmt


def _parent(path):
    d = os.path.dirname(os.path.abspath(path))
    ensure_dir(d)
    return path


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, float) and np.isnan(value):
        return ''
    return value


def _write_csv(path, columns, rows):
    with open(_parent(path), 'w', newline='') as f:
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def _write_json(path, data):
    with open(_parent(path), 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')
    return path


###
### campaigns
###

def campaign_kinds(summary):
    """Metric columns of a campaign: the group's kinds in report order."""
    targeted = set(summary.group.kinds)
    return [k for k in m.METRIC_KINDS if k in targeted]


def final_report(outcome):
    """Report of the record the final netlist was built from, or None."""
    best = outcome.history.best()
    return None if best is None else best.report


def campaign_rows(summary):
    kinds = campaign_kinds(summary)
    rows = []
    for a in summary.attempts:
        report = final_report(a.outcome)
        row = {'attempt': a.attempt_index, 'iterations': a.iterations,
               'success': int(a.success), 'status': a.outcome.status}
        for k in kinds:
            row[k] = None if report is None else report.get(k)
        rows.append(row)
    return rows


def _campaign_columns(summary):
    return list(CAMPAIGN_COLUMNS) + campaign_kinds(summary)


def _campaign_dict(summary):
    data = summary.to_dict()
    data['columns'] = _campaign_columns(summary)
    data['rows'] = campaign_rows(summary)
    return data


def _campaign_hdf5(summary, path):
    kinds = campaign_kinds(summary)
    dtype = [('attempt', 'i4'), ('iterations', 'i4'), ('success', 'i1'), ('status', 'S16')]
    dtype += [(k, 'f8') for k in kinds]
    rows = campaign_rows(summary)
    arr = np.zeros(len(rows), dtype=dtype)
    for i, row in enumerate(rows):
        arr[i]['attempt'] = row['attempt']
        arr[i]['iterations'] = row['iterations']
        arr[i]['success'] = row['success']
        arr[i]['status'] = row['status'].encode('ascii')
        for k in kinds:
            arr[i][k] = np.nan if row[k] is None else row[k]
    with tb.open_file(_parent(path), 'w', title=summary.circuit) as f:
        t = f.create_table('/', 'attempts', obj=arr, title='campaign attempts')
        for key, value in summary.to_dict().items():
            t.attrs[key] = 'None' if value is None else value
    return path


###
### variation studies
###

def study_rows(study):
    """One row per (curve, sample, x); ``sample`` is 'nominal' for the nominal curve."""
    rows = []
    for name, c in study.curves.items():
        for j, x in enumerate(c.x):
            rows.append({'curve': name, 'sample': 'nominal', 'x': float(x),
                         'y': float(c.nominal[j])})
        for i in range(c.samples.shape[0]):
            for j, x in enumerate(c.x):
                rows.append({'curve': name, 'sample': i, 'x': float(x),
                             'y': float(c.samples[i, j])})
    return rows


def envelope_rows(study):
    rows = []
    for name, c in study.curves.items():
        lo, mean, hi = c.envelope()
        for j, x in enumerate(c.x):
            rows.append({'curve': name, 'x': float(x), 'nominal': float(c.nominal[j]),
                         'min': float(lo[j]), 'mean': float(mean[j]), 'max': float(hi[j])})
    return rows


def _study_dict(study):
    data = study.to_dict()
    for name, c in study.curves.items():
        lo, mean, hi = c.envelope()
        data['curves'][name]['envelope'] = {'min': lo.tolist(), 'mean': mean.tolist(),
                                            'max': hi.tolist()}
        data['curves'][name]['axes'] = [c.x_label, c.y_label]
    return data


def _study_hdf5(study, path):
    with tb.open_file(_parent(path), 'w', title=study.base.title or 'variation study') as f:
        f.root._v_attrs.n_samples = study.n_samples
        f.root._v_attrs.sigma_bias = study.sigma_bias
        f.root._v_attrs.sigma_size = study.sigma_size
        f.root._v_attrs.seed = study.seed
        for name, c in study.curves.items():
            g = f.create_group('/', name, title='{0} vs {1}'.format(c.y_label, c.x_label))
            f.create_array(g, 'x', np.asarray(c.x, dtype=float))
            f.create_array(g, 'nominal', np.asarray(c.nominal, dtype=float))
            f.create_array(g, 'samples', np.asarray(c.samples, dtype=float))
            lo, mean, hi = c.envelope()
            f.create_array(g, 'envelope', np.vstack([lo, mean, hi]),
                           title='min, mean, max')
    return path


###
### iteration traces
###

def _records(obj):
    if isinstance(obj, OptimizationOutcome):
        obj = obj.history
    if not isinstance(obj, ContextHistory):
        raise TypeError("expected an OptimizationOutcome or ContextHistory, got "
                        "{0}".format(type(obj).__name__))
    return list(obj)


def trace_series(obj, kinds=TRACE_KINDS):
    """Per-iteration metric series.

    Returns
    -------
    iterations : ndarray of int
    series : OrderedDict of kind -> ndarray
        NaN where an iteration has no value.

    """
    records = _records(obj)
    iterations = np.array([r.index for r in records], dtype=int)
    series = OrderedDict()
    for k in kinds:
        series[k] = np.array([np.nan if r.report is None or r.report.get(k) is None
                              else r.report.get(k) for r in records], dtype=float)
    return iterations, series


def export_trace(obj, path, kinds=TRACE_KINDS):
    """Writes the per-iteration series as CSV: ``iteration``, ``passed`` and one column per kind."""
    records = _records(obj)
    iterations, series = trace_series(obj, kinds)
    rows = []
    for i, r in enumerate(records):
        row = {'iteration': int(iterations[i]), 'passed': int(r.passed)}
        for k in kinds:
            row[k] = float(series[k][i])
        rows.append(row)
    logger.info("writing %d-iteration trace to %s", len(rows), path)
    return _write_csv(path, ['iteration', 'passed'] + list(kinds), rows)


###
### front door
###

def export_results(obj, fmt, path):
    """Writes a campaign summary or a variation study.

    Parameters
    ----------
    obj : CampaignSummary or VariationStudy
    fmt : str
        One of 'csv', 'json' or 'hdf5'.
    path : str
        Output file.  A study's CSV export also writes the per-x envelope next
        to it, as ``<stem>-envelope.csv``.

    Returns
    -------
    paths : list of str
        The files written.

    """
    fmt = _check_format(fmt)
    if isinstance(obj, CampaignSummary):
        if fmt == CSV:
            paths = [_write_csv(path, _campaign_columns(obj), campaign_rows(obj))]
        elif fmt == JSON:
            paths = [_write_json(path, _campaign_dict(obj))]
        else:
            paths = [_campaign_hdf5(obj, path)]
    elif isinstance(obj, VariationStudy):
        if fmt == CSV:
            stem, ext = os.path.splitext(path)
            paths = [_write_csv(path, STUDY_COLUMNS, study_rows(obj)),
                     _write_csv(stem + '-envelope' + (ext or '.csv'), ENVELOPE_COLUMNS,
                                envelope_rows(obj))]
        elif fmt == JSON:
            paths = [_write_json(path, _study_dict(obj))]
        else:
            paths = [_study_hdf5(obj, path)]
    else:
        raise TypeError("cannot export {0}".format(type(obj).__name__))
    logger.info("exported %s as %s: %s", type(obj).__name__, fmt, ', '.join(paths))
    return paths


###
### plots
###

def _figure():
    try:
        from matplotlib.figure import Figure
    except ImportError:
        logger.warning("matplotlib is not installed; skipping plots")
        return None
    return Figure


def plot_trace(obj, path, kinds=TRACE_KINDS):
    """SVG grid of the per-iteration series; returns the path or None without matplotlib."""
    Figure = _figure()
    if Figure is None:
        return None
    iterations, series = trace_series(obj, kinds)
    ncols = 4
    nrows = (len(kinds) + ncols - 1) // ncols
    fig = Figure(figsize=(4 * ncols, 3 * nrows))
    for i, k in enumerate(kinds):
        ax = fig.add_subplot(nrows, ncols, i + 1)
        shown = [np.nan if np.isnan(v) else from_si(v, m.DISPLAY_UNITS[k])
                 for v in series[k]]
        ax.plot(iterations, shown, marker='o')
        ax.set_title(m.LABELS[k])
        ax.set_xlabel('iteration')
        ax.set_ylabel(m.DISPLAY_UNITS[k])
    fig.tight_layout()
    fig.savefig(_parent(path), format='svg')
    return path


def plot_study(study, path):
    """SVG of every sweep: samples in grey, nominal in black."""
    Figure = _figure()
    if Figure is None:
        return None
    names = list(study.curves)
    fig = Figure(figsize=(5 * len(names), 4))
    for i, name in enumerate(names):
        c = study.curves[name]
        ax = fig.add_subplot(1, len(names), i + 1)
        for s in c.samples:
            ax.plot(c.x, s, color='0.7', linewidth=0.5)
        ax.plot(c.x, c.nominal, color='k')
        if name == 'gain_vs_rl':
            ax.set_xscale('log')
        ax.set_xlabel(c.x_label)
        ax.set_ylabel(c.y_label)
    fig.tight_layout()
    fig.savefig(_parent(path), format='svg')
    return path
