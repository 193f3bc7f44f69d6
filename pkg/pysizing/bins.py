"""Module for tools to generate the sweep grids used by simulations and
measurements."""

import numpy as np
from numpy import logspace


def decade_space(start, stop, per_decade=20):
    """Splits the range into log-uniform points with a fixed number of points
    per decade, the way SPICE lays out an ``ac dec`` sweep.

    Parameters
    ----------
    start : number
        The starting value of the sequence, > 0.
    stop : number
        The final value of the sequence, > start.
    per_decade : integer, optional
        Number of points per decade.

    Returns
    -------
    samples : ndarray
        Log-uniform samples from start up to and including stop.

    Examples
    --------
    >>> decade_space(1.0, 100.0, 2)
        array([   1.        ,    3.16227766,   10.        ,   31.6227766 ,  100.        ])

    """
    if not (0.0 < start < stop):
        raise ValueError("decade_space needs 0 < start < stop.")
    log_start = np.log10(start)
    log_stop = np.log10(stop)
    num = int(round((log_stop - log_start) * per_decade)) + 1
    samples = logspace(log_start, log_stop, num)
    return samples


def sweep_space(start, stop, step):
    """Linear sweep points from start to stop inclusive with the given step,
    robust to floating point accumulation.

    Examples
    --------
    >>> len(sweep_space(0.0, 1.8, 0.05))
        37

    """
    if step <= 0.0 or stop <= start:
        raise ValueError("sweep_space needs step > 0 and stop > start.")
    num = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, num)


def period_grid(t_end, f0, periods, npoints):
    """Uniform time grid covering exactly ``periods`` periods of ``f0`` that
    ends at ``t_end``.  The end point is excluded so that the grid tiles the
    window without duplicating the first sample.

    Parameters
    ----------
    t_end : float
        Window end time [s].
    f0 : float
        Fundamental frequency [Hz].
    periods : integer
        Number of whole periods in the window.
    npoints : integer
        Number of samples, conventionally a power of two.

    Returns
    -------
    t : ndarray
        Sample times, length npoints.

    """
    window = periods / float(f0)
    t0 = t_end - window
    return t0 + np.arange(npoints) * (window / npoints)


def contiguous_runs(mask):
    """Finds the runs of True in a boolean array.

    Returns
    -------
    runs : list of (start, stop) tuples
        Half-open index intervals, in order.

    Examples
    --------
    >>> contiguous_runs(np.array([0, 1, 1, 0, 1], dtype=bool))
        [(1, 3), (4, 5)]

    """
    mask = np.asarray(mask, dtype=bool)
    if len(mask) == 0:
        return []
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]
