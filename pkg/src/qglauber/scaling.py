"""Finite-size scaling of coherence decay and related fits.

Two scaling laws are fitted to coherence curves ``C_N(t)`` of several chain
lengths (t in MCS):

* short times: ``C ~ N**lam * exp(-k t / N)``
* long times:  ``C ~ N**alpha * exp(-k1 t / N**alpha)``

Each curve is first reduced to a straight line ``log C = a_N + s_N t`` over
its window. The short-time exponent comes from regressing ``a_N`` on
``log N`` and the rate from ``-s_N N``. In the long-time law the exponent
appears in both the amplitude and the rate; ``a_N = A + alpha log N`` and
``log(-s_N) = log k1 - alpha log N`` are solved together by linear least
squares in ``(A, alpha, log k1)``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

REGIMES = ("short", "long")


@dataclass
class ScalingFit:
    regime: str
    exponent: float
    exponent_err: float
    rate: float
    rate_err: float
    amplitude: float
    windows: dict
    collapse_score: float
    intercepts: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)

    @property
    def rate_power(self) -> float:
        """Power of N dividing t in the scaled time axis."""
        return 1.0 if self.regime == "short" else self.exponent

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("windows", "intercepts", "slopes"):
            d[key] = {str(n): v for n, v in d[key].items()}
        return d


@dataclass
class CrossoverResult:
    n_sites: np.ndarray
    t_c: np.ndarray
    t_c_asymptotic: np.ndarray
    lam: float
    alpha: float
    k: float
    k1: float

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.t_c)


def _line_fit(x, y):
    """Least-squares ``y = b0 + b1 x``; returns (b0, b1, cov)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    dof = len(x) - 2
    if dof > 0:
        resid = y - design @ coef
        sigma2 = resid @ resid / dof
        cov = sigma2 * np.linalg.inv(design.T @ design)
    else:
        cov = np.zeros((2, 2))
    return coef[0], coef[1], cov


def _window_points(times, values, window, label):
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    lo, hi = window
    sel = (times >= lo) & (times <= hi)
    bad = sel & ~(values > 0)
    if np.any(bad):
        warnings.warn(f"{label}: excluding {bad.sum()} non-positive values from the fit window",
                      stacklevel=3)
    sel &= values > 0
    return times[sel], values[sel]


def default_window(regime: str, t_half: float, t_end: float) -> tuple[float, float]:
    """Fit window anchored to the half time of the equilibrium probability."""
    if regime == "short":
        return (1.0, 0.3 * t_half)
    if regime == "long":
        return (2.0 * t_half, t_end)
    raise ValueError(f"unknown regime {regime!r}")


def fit_regime(series: dict, regime: str, windows) -> ScalingFit:
    """Fit one scaling law to coherence curves of several sizes.

    Parameters
    ----------
    series : dict
        ``{N: (times, values)}`` with times in MCS.
    regime : {"short", "long"}
    windows : tuple or dict
        One ``(t_min, t_max)`` for all sizes, or ``{N: (t_min, t_max)}``.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    if len(series) < 3:
        raise ValueError(f"need at least 3 system sizes, got {len(series)}")
    sizes = sorted(series)
    if not isinstance(windows, dict):
        windows = {n: tuple(windows) for n in sizes}
    intercepts, slopes, used = {}, {}, {}
    for n in sizes:
        t, c = series[n]
        tw, cw = _window_points(t, c, windows[n], f"N={n}")
        if len(tw) < 2:
            raise ValueError(f"N={n}: fewer than two positive points in window {windows[n]}")
        a, s, _ = _line_fit(tw, np.log(cw))
        intercepts[n], slopes[n] = float(a), float(s)
        used[n] = (float(windows[n][0]), float(windows[n][1]))
    logn = np.log(np.array(sizes, float))
    a_n = np.array([intercepts[n] for n in sizes])
    s_n = np.array([slopes[n] for n in sizes])
    if regime == "short":
        amp, expo, cov = _line_fit(logn, a_n)
        expo_err = float(np.sqrt(cov[1, 1]))
        scaled = -s_n * np.array(sizes, float)
        rate = float(np.mean(scaled))
        rate_err = float(np.std(scaled, ddof=1) / np.sqrt(len(scaled)))
    else:
        if np.any(s_n >= 0):
            raise ValueError("long-time fit needs decaying curves (negative slopes)")
        m = len(sizes)
        # unknowns (A, alpha, log k1)
        design = np.zeros((2 * m, 3))
        design[:m, 0] = 1.0
        design[:m, 1] = logn
        design[m:, 1] = -logn
        design[m:, 2] = 1.0
        rhs = np.concatenate([a_n, np.log(-s_n)])
        coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        dof = 2 * m - 3
        resid = rhs - design @ coef
        sigma2 = resid @ resid / dof if dof > 0 else 0.0
        cov = sigma2 * np.linalg.inv(design.T @ design)
        amp, expo = coef[0], coef[1]
        expo_err = float(np.sqrt(cov[1, 1]))
        rate = float(np.exp(coef[2]))
        rate_err = float(rate * np.sqrt(cov[2, 2]))
    fit = ScalingFit(regime, float(expo), expo_err, rate, rate_err, float(amp), used, 0.0,
                     intercepts, slopes)
    fit.collapse_score = collapse_score(series, fit.exponent, fit.rate_power, used)
    return fit


def scaled_coordinates(series: dict, exponent: float, power: float, windows=None):
    """``{N: (t / N**power, log(C / N**exponent))}`` restricted to the windows."""
    out = {}
    for n in sorted(series):
        t, c = series[n]
        t = np.asarray(t, float)
        c = np.asarray(c, float)
        sel = c > 0
        if windows is not None:
            lo, hi = windows[n]
            sel &= (t >= lo) & (t <= hi)
        out[n] = (t[sel] / n ** power, np.log(c[sel]) - exponent * np.log(n))
    return out


def collapse_score(series: dict, exponent: float, power: float, windows=None) -> float:
    """Mean squared residual of all scaled curves about one common line.

    Both laws are exponential in scaled time, so the master curve is a
    straight line in ``(t / N**power, log(C / N**exponent))``.
    """
    pts = scaled_coordinates(series, exponent, power, windows)
    x = np.concatenate([p[0] for p in pts.values()])
    y = np.concatenate([p[1] for p in pts.values()])
    b0, b1, _ = _line_fit(x, y)
    return float(np.mean((y - b0 - b1 * x) ** 2))


def crossover_formula(lam, alpha, k, k1, n):
    """``(lam - alpha) N log N / (k - k1 / N**(alpha - 1))``; ValueError if the denominator <= 0."""
    denom = k - k1 / n ** (alpha - 1.0)
    if not denom > 0:
        raise ValueError(f"crossover undefined for N={n}: denominator {denom:.4g} <= 0")
    return (lam - alpha) * n * np.log(n) / denom


def crossover_asymptotic(lam, alpha, k, n):
    return (lam - alpha) * n / k * np.log(n)


def crossover_time(short: ScalingFit, long: ScalingFit, n_sites) -> CrossoverResult:
    """Crossover time between the two laws for each chain length.

    Entries whose denominator is not positive are NaN (see ``valid``).
    """
    ns = np.atleast_1d(np.asarray(n_sites, float))
    lam, k = short.exponent, short.rate
    alpha, k1 = long.exponent, long.rate
    tc = np.full(ns.shape, np.nan)
    for i, n in enumerate(ns):
        try:
            tc[i] = crossover_formula(lam, alpha, k, k1, n)
        except ValueError:
            warnings.warn(f"no crossover time for N={n:g}", stacklevel=2)
    return CrossoverResult(ns, tc, crossover_asymptotic(lam, alpha, k, ns), lam, alpha, k, k1)


def fit_power_law(times, values, window=None) -> tuple[float, float]:
    """Decay exponent ``1/z`` of ``D(t) ~ t**(-1/z)`` with its standard error.

    ``window`` defaults to all positive times; t = 0 is always excluded.
    """
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    window = (0.0, np.inf) if window is None else window
    sel = (times > 0) & (times >= window[0]) & (times <= window[1]) & (values > 0)
    if sel.sum() < 4:
        raise ValueError(f"power-law fit needs at least 4 points, window has {sel.sum()}")
    _, slope, cov = _line_fit(np.log(times[sel]), np.log(values[sel]))
    return float(-slope), float(np.sqrt(cov[1, 1]))
