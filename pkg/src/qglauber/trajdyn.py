"""Stochastic unravelling of the chain dynamics into pure-state trajectories.

Each elemental step draws a site uniformly, computes the weights
``p_a = ||K_a psi||^2`` of every Kraus branch and keeps branch ``a`` with
probability ``p_a``. Averaging ``|psi><psi|`` over trajectories reproduces the
exact density matrix of the uniform-mixture dynamics.

Trajectory ``m`` of an ensemble with master seed ``s`` owns three streams
spawned from ``SeedSequence(s, spawn_key=(m,))``: initial configuration,
site draws and branch draws. All ensemble members advance in lockstep
between snapshot times, so only the current states are held in memory and
results do not depend on how the work is split across threads.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .configspace import MAX_TRAJECTORY_SITES, ChainGeometry, sample_zero_magnetization
from .exactdyn import CapacityError, kraus_for

log = logging.getLogger(__name__)

DENSE_MAX_SITES = 14
DEFAULT_PAIR_BUDGET = 2 * 2**30
# bytes per stored pair in the sparse outer-product accumulation (value, index, temporaries)
_BYTES_PER_PAIR = 40


@dataclass
class EnsembleConfig:
    n_traj: int
    seed: int
    n_mcs: int
    snapshot_schedule: list = field(default_factory=list)
    prune_epsilon: float = 1e-16
    backend: str = "sparse"
    threads: int = 1

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("need at least one trajectory")
        if not 0.0 <= self.prune_epsilon <= 1e-8:
            raise ValueError("prune_epsilon must lie in [0, 1e-8]")
        if self.backend not in ("sparse", "dense"):
            raise ValueError("backend must be 'sparse' or 'dense'")
        if self.n_mcs < 0:
            raise ValueError("n_mcs must be non-negative")
        if not self.snapshot_schedule:
            self.snapshot_schedule = list(range(self.n_mcs + 1))
        sched = [float(t) for t in self.snapshot_schedule]
        if sched != sorted(set(sched)) or sched[0] < 0 or sched[-1] > self.n_mcs:
            raise ValueError("snapshot schedule must be increasing and within [0, n_mcs]")
        self.snapshot_schedule = sched


@dataclass
class EnsembleSnapshot:
    """All trajectory states at one time, stored as a CSR-like bundle.

    Trajectory ``m`` occupies ``keys[offsets[m]:offsets[m+1]]`` (sorted
    configuration indices) with real amplitudes ``amps`` at the same slots.
    """
    t_mcs: float
    n_sites: int
    offsets: np.ndarray
    keys: np.ndarray
    amps: np.ndarray

    @property
    def n_traj(self) -> int:
        return len(self.offsets) - 1

    def state(self, m: int) -> dict:
        sl = slice(self.offsets[m], self.offsets[m + 1])
        return dict(zip(self.keys[sl].tolist(), self.amps[sl].tolist()))

    def support_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @classmethod
    def from_states(cls, t_mcs, n_sites, states):
        """Build from a list of ``{config: amplitude}`` dicts (mainly for tests)."""
        keys, amps, offs = [], [], [0]
        for st in states:
            items = sorted(st.items())
            keys.extend(k for k, _ in items)
            amps.extend(v for _, v in items)
            offs.append(len(keys))
        amps = np.array(amps)
        if np.iscomplexobj(amps) and not np.any(amps.imag):
            amps = amps.real
        return cls(t_mcs, n_sites, np.array(offs, np.int64),
                   np.array(keys, np.int64), amps)


@dataclass
class EnsembleSnapshots:
    n_sites: int
    snapshots: list
    pruned: int = 0
    manifest: dict = field(default_factory=dict)

    @property
    def times(self):
        return [s.t_mcs for s in self.snapshots]

    def __getitem__(self, i):
        return self.snapshots[i]

    def __len__(self):
        return len(self.snapshots)


def trajectory_streams(seed: int, index: int):
    """Independent generators (initial config, sites, branches) for one trajectory."""
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return [np.random.Generator(np.random.PCG64(c)) for c in ss.spawn(3)]


def _column_tables(k):
    tabs = getattr(k, "_column_tables", None)
    if tabs is None:
        tabs = _kernels.column_tables(k.operators)
        try:
            object.__setattr__(k, "_column_tables", tabs)
        except (AttributeError, TypeError):
            pass
    return tabs


def trajectory_elemental_step(psi: dict, k, rng, n_sites: int,
                              prune_epsilon: float = 1e-16) -> dict:
    """One unravelling step on a ``{config: amplitude}`` state.

    Draws the site and then the branch from ``rng``. Returns a new dict.
    """
    cols, vals, nnz = _column_tables(k)
    items = sorted(psi.items())
    keys = np.array([a for a, _ in items], np.int64)
    amps = np.array([b for _, b in items], np.float64)
    site_u = np.array([rng.random()])
    branch_u = np.array([rng.random()])
    keys, amps, _, status = _kernels.advance_sparse(
        keys, amps, n_sites, site_u, branch_u, cols, vals, nnz, prune_epsilon)
    if status:
        raise RuntimeError("all Kraus branches have vanishing weight; channel is not CPTP")
    return dict(zip(keys.tolist(), amps.tolist()))


class _Trajectory:
    __slots__ = ("sites", "branches", "keys", "amps", "psi")

    def __init__(self, seed, index, geometry, dense):
        init, self.sites, self.branches = trajectory_streams(seed, index)
        c = sample_zero_magnetization(geometry, init).bits
        self.keys = np.array([c], np.int64)
        self.amps = np.array([1.0])
        self.psi = None
        if dense:
            self.psi = np.zeros(geometry.dim)
            self.psi[c] = 1.0

    def advance(self, n_steps, n, tables, eps):
        site_u = self.sites.random(n_steps)
        branch_u = self.branches.random(n_steps)
        if self.psi is not None:
            self.psi, pruned, status = _kernels.advance_dense(
                self.psi, n, site_u, branch_u, *tables, eps)
            nz = np.flatnonzero(self.psi)
            self.keys, self.amps = nz.astype(np.int64), self.psi[nz]
        else:
            self.keys, self.amps, pruned, status = _kernels.advance_sparse(
                self.keys, self.amps, n, site_u, branch_u, *tables, eps)
        if status:
            raise RuntimeError("all Kraus branches have vanishing weight; channel is not CPTP")
        return pruned


class EnsembleRun:
    """Iterable over the scheduled :class:`EnsembleSnapshot` objects of one run.

    Yielded snapshots are fresh arrays; holding them does not pin the evolving
    states. ``pruned`` counts amplitudes dropped so far.
    """

    def __init__(self, cfg: EnsembleConfig, variant, g: ChainGeometry):
        n = g.n_sites
        g.require_dynamics()
        if n > MAX_TRAJECTORY_SITES:
            raise CapacityError(f"trajectory mode supports N <= {MAX_TRAJECTORY_SITES}")
        if cfg.backend == "dense" and n > DENSE_MAX_SITES:
            raise CapacityError(f"dense trajectory backend supports N <= {DENSE_MAX_SITES}")
        self.cfg = cfg
        self.geometry = g
        self.kraus = kraus_for(variant)
        self.pruned = 0

    def __iter__(self):
        cfg, g = self.cfg, self.geometry
        n = g.n_sites
        tables = _column_tables(self.kraus)
        trajs = [_Trajectory(cfg.seed, m, g, cfg.backend == "dense")
                 for m in range(cfg.n_traj)]
        eps = cfg.prune_epsilon
        done = 0
        pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
        try:
            for t in cfg.snapshot_schedule:
                target = int(round(t * n))
                seg = target - done
                if seg:
                    if pool is None:
                        self.pruned += sum(tr.advance(seg, n, tables, eps) for tr in trajs)
                    else:
                        chunks = np.array_split(np.arange(len(trajs)), cfg.threads)
                        work = lambda idx: sum(  # noqa: E731
                            trajs[i].advance(seg, n, tables, eps) for i in idx)
                        self.pruned += sum(pool.map(work, chunks))
                    done = target
                yield _bundle(t, n, trajs)
        finally:
            if pool is not None:
                pool.shutdown()
        if self.pruned:
            log.info("pruned %d amplitudes below %.1e", self.pruned, eps)


def _bundle(t, n, trajs):
    sizes = np.fromiter((len(tr.keys) for tr in trajs), np.int64, len(trajs))
    offsets = np.zeros(len(trajs) + 1, np.int64)
    np.cumsum(sizes, out=offsets[1:])
    keys = np.concatenate([tr.keys for tr in trajs])
    amps = np.concatenate([tr.amps for tr in trajs])
    return EnsembleSnapshot(float(t), n, offsets, keys, amps)


def run_ensemble(cfg: EnsembleConfig, variant, g: ChainGeometry) -> EnsembleSnapshots:
    """Evolve ``cfg.n_traj`` trajectories and keep every scheduled snapshot."""
    run = EnsembleRun(cfg, variant, g)
    snaps = list(run)
    label = getattr(run.kraus, "label", str(variant))
    manifest = {"n_sites": g.n_sites, "variant": label, "n_traj": cfg.n_traj,
                "seed": cfg.seed, "n_mcs": cfg.n_mcs,
                "prune_epsilon": cfg.prune_epsilon, "backend": cfg.backend,
                "schedule": list(cfg.snapshot_schedule)}
    return EnsembleSnapshots(g.n_sites, snaps, run.pruned, manifest)


# Estimators


def _per_trajectory(snap: EnsembleSnapshot, weights: np.ndarray) -> np.ndarray:
    prob = np.abs(snap.amps) ** 2 * weights
    csum = np.concatenate([[0.0], np.cumsum(prob)])
    return csum[snap.offsets[1:]] - csum[snap.offsets[:-1]]


def _domain_walls(keys: np.ndarray, n: int) -> np.ndarray:
    rot = (keys >> 1) | ((keys & 1) << (n - 1))
    diff = rot ^ keys
    out = np.zeros(len(keys), np.int64)
    for q in range(n):
        out += (diff >> q) & 1
    return out


def estimate_diagonal_observable(snap: EnsembleSnapshot, op: str) -> tuple[float, float]:
    """Ensemble mean and standard error of ``peq`` or ``domains``."""
    if snap.n_traj < 1:
        raise ValueError("empty snapshot")
    n = snap.n_sites
    if op == "peq":
        w = ((snap.keys == 0) | (snap.keys == (1 << n) - 1)).astype(float)
    elif op == "domains":
        w = _domain_walls(snap.keys, n).astype(float)
    else:
        raise ValueError(f"unknown diagonal observable {op!r}")
    vals = _per_trajectory(snap, w)
    m = len(vals)
    err = float(np.std(vals, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return float(np.mean(vals)), err


def pair_count(snap: EnsembleSnapshot) -> int:
    """Upper bound on the distinct (i, j) entries of the accumulated density matrix."""
    s = snap.support_sizes()
    d = 1 << snap.n_sites
    return int(min(np.sum(s * s), d * d))


def _row_pairs(snap) -> np.ndarray:
    """Upper bound on the stored entries of each row of the density matrix."""
    d = 1 << snap.n_sites
    s = snap.support_sizes()
    per_entry = np.repeat(s, s).astype(float)
    return np.minimum(np.bincount(snap.keys, weights=per_entry, minlength=d), d)


def _check_budget(snap, budget_bytes, copies=1):
    pairs = pair_count(snap)
    need = pairs * _BYTES_PER_PAIR * copies
    if need > budget_bytes:
        raise CapacityError(
            f"density estimate needs up to {pairs} pair accumulations "
            f"(~{need / 2**30:.2f} GiB) but the budget is {budget_bytes / 2**30:.2f} GiB")


def _row_blocks(snap, budget_bytes, copies=1):
    """Row ranges of the density matrix whose pair bound fits the budget."""
    rows = _row_pairs(snap)
    cap = budget_bytes / (_BYTES_PER_PAIR * copies)
    worst = rows.max(initial=0)
    if worst > cap:
        raise CapacityError(
            f"density estimate needs up to {int(worst)} pair accumulations for a single row "
            f"(~{worst * _BYTES_PER_PAIR * copies / 2**30:.2f} GiB) but the budget is "
            f"{budget_bytes / 2**30:.2f} GiB")
    csum = np.cumsum(rows)
    edges = [0]
    while edges[-1] < len(rows):
        base = csum[edges[-1] - 1] if edges[-1] else 0.0
        nxt = int(np.searchsorted(csum, base + cap, side="right"))
        edges.append(min(max(nxt, edges[-1] + 1), len(rows)))
    return list(zip(edges[:-1], edges[1:]))


def _psi_matrix(snap, square=False):
    d = 1 << snap.n_sites
    amps = np.abs(snap.amps) ** 2 if square else snap.amps
    return sp.csr_matrix((amps, snap.keys, snap.offsets), shape=(snap.n_traj, d))


def _density_blocks(psi, blocks):
    """Yield ``(lo, block)`` with ``block = sum_m psi_m[lo:hi]^* psi_m`` (unnormalised)."""
    cols = psi.tocsc()
    for lo, hi in blocks:
        yield lo, (cols[:, lo:hi].T.conj() @ psi).tocsr()


def ensemble_density(snap: EnsembleSnapshot, budget_bytes: int = DEFAULT_PAIR_BUDGET):
    """Sparse ``(1/M) sum_m |psi_m><psi_m|`` accumulated within each trajectory."""
    _check_budget(snap, budget_bytes)
    psi = _psi_matrix(snap)
    rho = (psi.T.tocsr().conj() @ psi) / snap.n_traj
    rho.sum_duplicates()
    return rho


def _offdiag_l1(rho, lo=0) -> float:
    rho = rho.tocsr()
    rows = np.repeat(np.arange(lo, lo + rho.shape[0]), np.diff(rho.indptr))
    return float(np.abs(rho.data[rho.indices != rows]).sum())


def _sum_squares(rho, lo=0) -> float:
    return float(np.sum(np.abs(rho.data) ** 2))


_STATISTICS = {"coherence": _offdiag_l1, "purity": _sum_squares}


def _streamed(snap, stat, budget_bytes) -> float:
    m = snap.n_traj
    psi = _psi_matrix(snap)
    return sum(stat(block / m, lo)
               for lo, block in _density_blocks(psi, _row_blocks(snap, budget_bytes)))


def estimate_coherence(snap: EnsembleSnapshot, budget_bytes: int = DEFAULT_PAIR_BUDGET,
                       rho=None, debias: bool = False) -> float:
    """L1 coherence of the ensemble density matrix.

    The density matrix is accumulated in row blocks that fit ``budget_bytes``.
    The plain estimate is biased upwards by roughly ``1/sqrt(M)``: sampling
    noise in each small off-diagonal entry adds to its modulus. With
    ``debias=True`` every entry contributes ``sqrt(max(0, |x|^2 - s^2/M))``
    instead, where ``s^2`` is the per-entry sample variance; entries seen in a
    single trajectory then contribute nothing. This reduces the bias but does
    not remove it.
    """
    if snap.n_traj < 1:
        raise ValueError("empty snapshot")
    if rho is not None:
        return _offdiag_l1(rho)
    if not debias:
        return _streamed(snap, _offdiag_l1, budget_bytes)
    m = snap.n_traj
    psi = _psi_matrix(snap)
    sq = _psi_matrix(snap, square=True)
    blocks = _row_blocks(snap, budget_bytes, copies=2)
    total = 0.0
    for (lo, first), (_, second) in zip(_density_blocks(psi, blocks),
                                        _density_blocks(sq, blocks)):
        first = first.tocoo()
        off = first.row + lo != first.col
        r, c = first.row[off], first.col[off]
        mean = first.data[off] / m
        s2 = (np.asarray(second[r, c]).ravel() - m * np.abs(mean) ** 2) / max(m - 1, 1)
        total += float(np.sqrt(np.maximum(np.abs(mean) ** 2 - s2 / m, 0.0)).sum())
    return total


def estimate_purity(snap: EnsembleSnapshot, budget_bytes: int = DEFAULT_PAIR_BUDGET,
                    rho=None) -> float:
    """``tr(rho^2) = (1/M^2) sum_{m,n} |<psi_m|psi_n>|^2``."""
    if snap.n_traj < 1:
        raise ValueError("empty snapshot")
    if rho is not None:
        return _sum_squares(rho)
    return _streamed(snap, _sum_squares, budget_bytes)


def jackknife_stderr(snap: EnsembleSnapshot, observable: str, groups: int = 16,
                     budget_bytes: int = DEFAULT_PAIR_BUDGET) -> float:
    """Delete-a-group jackknife standard error of the coherence or purity estimate.

    Trajectories are split into ``groups`` contiguous blocks; the estimate is
    recomputed with each block left out.
    """
    stat = _STATISTICS[observable]
    m = snap.n_traj
    groups = min(groups, m)
    if groups < 2:
        return float("nan")
    psi = _psi_matrix(snap)
    edges = np.linspace(0, m, groups + 1).astype(np.int64)
    parts = [psi[edges[b]:edges[b + 1]] for b in range(groups)]
    blocks = _row_blocks(snap, budget_bytes, copies=3)
    vals = np.zeros(groups)
    for lo, full in _density_blocks(psi, blocks):
        hi = lo + full.shape[0]
        for b, sub in enumerate(parts):
            part = (sub[:, lo:hi].T.conj() @ sub).tocsr()
            vals[b] += stat((full - part) / (m - (edges[b + 1] - edges[b])), lo)
    return float(np.sqrt((groups - 1) / groups * np.sum((vals - vals.mean()) ** 2)))


def estimate_all(snap: EnsembleSnapshot, observables=("coherence", "purity", "domains", "peq"),
                 budget_bytes: int = DEFAULT_PAIR_BUDGET, jackknife_groups: int = 16) -> dict:
    """``{name: (value, stderr)}``.

    Diagonal observables use the sample standard error; coherence and purity
    a jackknife over ``jackknife_groups`` blocks (NaN when set to 0).
    """
    if snap.n_traj < 1:
        raise ValueError("empty snapshot")
    out = {}
    wanted = [name for name in observables if name in _STATISTICS]
    if wanted:
        m = snap.n_traj
        psi = _psi_matrix(snap)
        sums = dict.fromkeys(wanted, 0.0)
        for lo, block in _density_blocks(psi, _row_blocks(snap, budget_bytes)):
            block = block / m
            for name in wanted:
                sums[name] += _STATISTICS[name](block, lo)
    for name in observables:
        if name in _STATISTICS:
            err = (jackknife_stderr(snap, name, jackknife_groups, budget_bytes)
                   if jackknife_groups else float("nan"))
            out[name] = (sums[name], err)
        else:
            out[name] = estimate_diagonal_observable(snap, name)
    return out
