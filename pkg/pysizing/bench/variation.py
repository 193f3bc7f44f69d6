"""Random-variation studies of a sized opamp.

Every sample perturbs each device independently: bias voltages by an absolute
Gaussian offset [V] and transistor sizes by a relative Gaussian factor,
``value * (1 + N(0, sigma_size))``.  Each perturbed netlist is characterized
by four sweeps:

* ``offset_vs_vcm`` -- input offset against common-mode input, from one DC
  sweep of the unity-gain follower read at 37 points on a 0.05 V grid;
* ``gain_vs_vout`` -- open-loop DC gain against output voltage, from a fine
  differential DC sweep;
* ``gain_vs_rl`` -- open-loop DC gain against load resistance;
* ``cmrr_vs_vcm`` -- CMRR against common-mode input.
"""
import logging
from collections import OrderedDict, namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from pysizing import metrics as m
from pysizing.bins import sweep_space, decade_space
from pysizing.sim import analysis as an
from pysizing.sim.analysis import AnalysisSpec, LoadCondition, TestbenchConfig
from pysizing.sim.deck import default_spec
from pysizing.sim.errors import SimulationError
from pysizing.pysizing_config import pysizing_conf

logger = logging.getLogger(__name__)

OFFSET_VS_VCM = 'offset_vs_vcm'
GAIN_VS_VOUT = 'gain_vs_vout'
GAIN_VS_RL = 'gain_vs_rl'
CMRR_VS_VCM = 'cmrr_vs_vcm'
SWEEPS = (OFFSET_VS_VCM, GAIN_VS_VOUT, GAIN_VS_RL, CMRR_VS_VCM)

AXES = {
    OFFSET_VS_VCM: ('vcm [V]', 'offset [V]'),
    GAIN_VS_VOUT: ('vout [V]', 'gain [dB]'),
    GAIN_VS_RL: ('rl [ohm]', 'gain [dB]'),
    CMRR_VS_VCM: ('vcm [V]', 'cmrr [dB]'),
    }

# differential input span and step of the open-loop DC sweep [V]
DIFF_SPAN = 0.02
DIFF_STEP = 2e-6


class Curve(namedtuple('Curve', ['name', 'x', 'nominal', 'samples'])):
    """One sweep: ``samples`` is (n, len(x)), NaN where a sample failed."""
    __slots__ = ()

    @property
    def x_label(self):
        return AXES[self.name][0]

    @property
    def y_label(self):
        return AXES[self.name][1]

    def envelope(self):
        """Per-x (min, mean, max) over the samples that ran."""
        s = np.asarray(self.samples, dtype=float)
        with np.errstate(invalid='ignore'):
            ok = ~np.all(np.isnan(s), axis=0)
            lo = np.full(len(self.x), np.nan)
            mean = np.full(len(self.x), np.nan)
            hi = np.full(len(self.x), np.nan)
            lo[ok] = np.nanmin(s[:, ok], axis=0)
            mean[ok] = np.nanmean(s[:, ok], axis=0)
            hi[ok] = np.nanmax(s[:, ok], axis=0)
        return lo, mean, hi


class VariationStudy(object):
    """Results of :func:`variation_study`.

    Attributes
    ----------
    base : NetlistDoc
    n_samples : int
    sigma_bias : float
        Absolute bias perturbation [V].
    sigma_size : float
        Relative size perturbation.
    seed : int
    draws : list of dict
        Per sample, (element, param) -> perturbed value.
    curves : OrderedDict of name -> Curve
    failures : list of (sample index, sweep, message)

    """

    def __init__(self, base, sigma_bias, sigma_size, seed, draws, curves, failures):
        self.base = base
        self.n_samples = len(draws)
        self.sigma_bias = sigma_bias
        self.sigma_size = sigma_size
        self.seed = seed
        self.draws = draws
        self.curves = curves
        self.failures = failures

    def to_dict(self):
        return {'title': self.base.title, 'n_samples': self.n_samples,
                'sigma_bias': self.sigma_bias, 'sigma_size': self.sigma_size,
                'seed': self.seed,
                'failures': [list(f) for f in self.failures],
                'curves': OrderedDict((name, {'x': c.x.tolist(),
                                              'nominal': c.nominal.tolist(),
                                              'samples': c.samples.tolist()})
                                      for name, c in self.curves.items())}


def draw_perturbations(doc, tunables, n, sigma_bias, sigma_size, seed=0):
    """Draws perturbed values for every device of every tunable.

    Returns
    -------
    draws : list of OrderedDict of (element name, param) -> value
    offsets : ndarray, (n, n_bias_members)
        The absolute bias offsets drawn [V].
    factors : ndarray, (n, n_size_members)
        The relative size offsets drawn.

    """
    if int(n) < 2:
        raise ValueError("a variation study needs at least two samples")
    if sigma_bias < 0.0 or sigma_size < 0.0:
        raise ValueError("standard deviations must be non-negative")
    bias = [(name, t.param) for t in tunables if t.param == 'DC' for name in t.members]
    size = [(name, t.param) for t in tunables if t.param != 'DC' for name in t.members]
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, sigma_bias, size=(n, len(bias)))
    factors = rng.normal(0.0, sigma_size, size=(n, len(size)))
    nominal = dict(((name, param), doc.element(name).param(param).magnitude)
                   for name, param in bias + size)
    draws = []
    for i in range(n):
        d = OrderedDict()
        for j, key in enumerate(bias):
            d[key] = nominal[key] + offsets[i, j]
        for j, key in enumerate(size):
            d[key] = nominal[key] * (1.0 + factors[i, j])
        draws.append(d)
    return draws, offsets, factors


def sweep_axes(group, conf=None):
    """x grids of the four sweeps."""
    conf = pysizing_conf if conf is None else conf
    supply = group.supply_v
    axes = OrderedDict()
    axes[OFFSET_VS_VCM] = sweep_space(0.0, supply, 0.05)
    axes[GAIN_VS_VOUT] = sweep_space(0.1, supply - 0.1, 0.05)
    axes[GAIN_VS_RL] = decade_space(10.0, 1e9, 1)
    axes[CMRR_VS_VCM] = np.linspace(0.1, supply - 0.1, 9)
    return axes


def _offset_curve(doc, group, simulator, x, conf):
    tb = TestbenchConfig(an.UNITY_GAIN, group.vcm, group.load, None, group.supply_v)
    res = simulator.simulate(doc, default_spec(an.DC_SWEEP, tb, conf), tb)
    w = res.waveform(m.OUT)
    return np.interp(x, w.sweep, w.values) - x


def _gain_vout_curve(doc, group, simulator, x, conf):
    tb = TestbenchConfig(an.OPEN_LOOP, group.vcm, group.load, None, group.supply_v)
    spec = AnalysisSpec.dc('Vtb_ind', -DIFF_SPAN, DIFF_SPAN, DIFF_STEP)
    w = simulator.simulate(doc, spec, tb).waveform(m.OUT)
    vout = np.real(w.values)
    gain = np.gradient(vout, w.sweep)
    order = np.argsort(vout, kind='stable')
    vout, gain = vout[order], np.abs(gain[order])
    keep = np.concatenate([[True], np.diff(vout) > 0])
    vout, gain = vout[keep], gain[keep]
    with np.errstate(divide='ignore'):
        db = 20.0 * np.log10(gain)
    y = np.interp(x, vout, db)
    y[(x < vout[0]) | (x > vout[-1])] = np.nan
    return y


def _gain_rl_curve(doc, group, simulator, x, conf):
    y = np.empty(len(x))
    for i, rl in enumerate(x):
        tb = TestbenchConfig(an.OPEN_LOOP, group.vcm, LoadCondition(group.load.cl, rl), None,
                             group.supply_v)
        res = simulator.simulate(doc, default_spec(an.AC, tb, conf), tb)
        y[i] = m.dc_gain(m.transfer(res))
    return y


def _cmrr_curve(doc, group, simulator, x, conf):
    y = np.empty(len(x))
    for i, vcm in enumerate(x):
        dm_tb = TestbenchConfig(an.OPEN_LOOP, vcm, group.load, None, group.supply_v)
        cm_tb = TestbenchConfig(an.CM_DRIVE, vcm, group.load, None, group.supply_v)
        spec = default_spec(an.AC, dm_tb, conf)
        dm = m.transfer(simulator.simulate(doc, spec, dm_tb))
        cm = m.transfer(simulator.simulate(doc, spec, cm_tb), inputs=(m.CM,))
        try:
            y[i] = m.cmrr(dm, cm)
        except m.DegenerateInput:
            y[i] = m.CMRR_CEILING_DB
    return y


_sweep_functions = {
    OFFSET_VS_VCM: _offset_curve,
    GAIN_VS_VOUT: _gain_vout_curve,
    GAIN_VS_RL: _gain_rl_curve,
    CMRR_VS_VCM: _cmrr_curve,
    }


def measure_sweeps(doc, group, simulator, axes, conf=None):
    """Runs every sweep on one netlist.

    Returns
    -------
    curves : dict of name -> ndarray
        NaN-filled for sweeps that failed.
    failures : list of (sweep, message)

    """
    conf = pysizing_conf if conf is None else conf
    curves, failures = {}, []
    for name, x in axes.items():
        try:
            curves[name] = _sweep_functions[name](doc, group, simulator, x, conf)
        except (SimulationError, m.MeasurementError, KeyError, ValueError) as e:
            logger.warning("%s sweep failed: %s", name, e)
            failures.append((name, '{0}: {1}'.format(e.__class__.__name__, e)))
            curves[name] = np.full(len(x), np.nan)
    return curves, failures


def variation_study(doc, tunables, group, sigma_bias=0.1, sigma_size=0.01, n=20, seed=0,
                    simulator=None, workers=None, sweeps=SWEEPS, conf=None):
    """Simulates randomly perturbed copies of a sized netlist.

    Parameters
    ----------
    doc : NetlistDoc
        A completed design point.
    tunables : list of TunableParam
        Which devices and biases to perturb.
    group : TargetGroup
        Load, supply and nominal common-mode voltage.
    sigma_bias : float, optional
        Standard deviation of bias offsets [V].
    sigma_size : float, optional
        Relative standard deviation of W and L.
    n : int, optional
        Number of samples, at least 2.
    seed : int, optional
    simulator : SimEngine
    workers : int, optional
        Concurrent samples.
    sweeps : sequence of str, optional
        Subset of SWEEPS.

    Returns
    -------
    study : VariationStudy
        Per-sample simulation failures are recorded, not raised.

    """
    conf = pysizing_conf if conf is None else conf
    if simulator is None:
        raise ValueError("variation_study needs a simulator")
    workers = conf['workers'] if workers is None else workers
    draws, _, _ = draw_perturbations(doc, tunables, n, sigma_bias, sigma_size, seed)
    axes = OrderedDict((k, v) for k, v in sweep_axes(group, conf).items() if k in sweeps)
    nominal, nominal_failures = measure_sweeps(doc, group, simulator, axes, conf)
    for name, msg in nominal_failures:
        logger.warning("nominal %s sweep failed: %s", name, msg)

    def sample(i):
        return measure_sweeps(doc.with_values(draws[i]), group, simulator, axes, conf)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sample, range(n)))
    else:
        results = [sample(i) for i in range(n)]

    curves = OrderedDict()
    for name, x in axes.items():
        samples = np.vstack([r[0][name] for r in results])
        curves[name] = Curve(name, np.asarray(x, dtype=float), nominal[name], samples)
    failures = [(i, name, msg) for i, r in enumerate(results) for name, msg in r[1]]
    logger.info("variation study: %d samples, %d sweep failures", n, len(failures))
    return VariationStudy(doc, sigma_bias, sigma_size, seed, draws, curves, failures)
