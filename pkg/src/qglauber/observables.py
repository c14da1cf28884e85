"""Observables on exact states.

Every function accepts either a full density matrix or a 1-D array holding
its diagonal (the classical-mode state).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configspace import domain_wall_table, popcounts
from .exactdyn import n_sites_of


def _diag(rho):
    return rho if rho.ndim == 1 else np.diagonal(rho)


def coherence(rho: np.ndarray) -> float:
    """L1 coherence: sum of |rho_ij| over i != j."""
    if rho.ndim == 1:
        return 0.0
    mod = np.abs(rho)
    np.fill_diagonal(mod, 0.0)
    return float(mod.sum())


def purity(rho: np.ndarray) -> float:
    if rho.ndim == 1:
        return float(np.sum(np.abs(rho) ** 2))
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.vdot(rho, rho).real)


def domain_wall_expectation(rho: np.ndarray, g=None) -> float:
    n = n_sites_of(rho)
    if g is not None and g.n_sites != n:
        raise ValueError("state does not match the chain geometry")
    return float(np.dot(domain_wall_table(n), _diag(rho).real))


def equilibrium_probability(rho: np.ndarray) -> float:
    """Population of the all-up and all-down configurations."""
    p = _diag(rho).real
    return float(p[0] + p[-1])


OBSERVABLES = {
    "coherence": coherence,
    "purity": purity,
    "domains": domain_wall_expectation,
    "peq": equilibrium_probability,
}


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.values.shape:
                raise ValueError("stderr must match values")
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> float:
        i = np.flatnonzero(np.isclose(self.times, t))
        if not len(i):
            raise KeyError(f"no sample at t={t}")
        return float(self.values[i[0]])


def half_time(series, values=None) -> float | None:
    """First time the series reaches 1/2, linearly interpolated.

    Accepts a :class:`TimeSeries` or a pair ``(times, values)``. Returns None
    when the series never reaches 1/2.
    """
    if values is None:
        times, values = series.times, series.values
    else:
        times = series
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    hit = np.flatnonzero(values >= 0.5)
    if not len(hit):
        return None
    i = hit[0]
    if i == 0:
        return float(times[0])
    t0, t1 = times[i - 1], times[i]
    v0, v1 = values[i - 1], values[i]
    return float(t0 + (0.5 - v0) * (t1 - t0) / (v1 - v0))


@dataclass
class HammingClassGrid:
    """Matrix elements grouped by (d(i, ref), d(j, ref), d(i, j)).

    Arrays are indexed ``[c, a, b]`` with ``c = d(i, j)`` and ``a, b`` the
    distances of ``i`` and ``j`` to the all-spins-down reference.
    """
    n_sites: int
    mean_abs: np.ndarray
    mean_real: np.ndarray
    count: np.ndarray

    @property
    def c_max(self) -> int:
        return self.count.shape[0] - 1

    def antidiagonal_asymmetry(self, c: int) -> float:
        """max | |g(a,b)| - |g(N-b, N-a)| | over the grid for distance c."""
        g = np.abs(self.mean_abs[c])
        mirrored = g[::-1, ::-1].T
        return float(np.max(np.abs(g - mirrored)))

    def rows(self):
        """Yield ``(c, a, b, mean_abs, mean_real, count)`` for populated cells."""
        for c, a, b in zip(*np.nonzero(self.count)):
            yield (int(c), int(a), int(b), float(self.mean_abs[c, a, b]),
                   float(self.mean_real[c, a, b]), int(self.count[c, a, b]))


def hamming_classify(rho: np.ndarray, c_max: int | None = 3) -> HammingClassGrid:
    """Average |rho_ij| (and Re rho_ij) over each Hamming-distance class.

    The reference configuration is all spins down (all bits set), so the
    distance of ``i`` to it is the number of up spins in ``i``.
    """
    n = n_sites_of(rho)
    c_max = n if c_max is None else min(c_max, n)
    if rho.ndim == 1:
        rho = np.diag(rho)
    d = 1 << n
    pc = popcounts(n)
    up = n - pc
    idx = np.arange(d)
    shape = (c_max + 1, n + 1, n + 1)
    count = np.zeros(shape, np.int64)
    s_abs = np.zeros(shape)
    s_real = np.zeros(shape)
    # row blocks keep the temporaries bounded for N = 12
    block = max(1, (1 << 20) // d)
    for start in range(0, d, block):
        rows = idx[start:start + block]
        c = pc[rows[:, None] ^ idx[None, :]]
        sel = c <= c_max
        key = (c * (n + 1) + up[rows][:, None]) * (n + 1) + up[None, :]
        key = key[sel]
        vals = rho[start:start + block][sel]
        size = count.size
        count += np.bincount(key, minlength=size).reshape(shape)
        s_abs += np.bincount(key, np.abs(vals), minlength=size).reshape(shape)
        s_real += np.bincount(key, vals.real, minlength=size).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_abs = np.where(count > 0, s_abs / np.maximum(count, 1), 0.0)
        mean_real = np.where(count > 0, s_real / np.maximum(count, 1), 0.0)
    return HammingClassGrid(n, mean_abs, mean_real, count)
