"""Exact density-matrix evolution of the full chain.

One elemental step applies the uniform site mixture ``(1/N) sum_q L_q`` of the
local channel. A Monte Carlo step (MCS) is N elemental steps. Local channels
are applied block-wise on the three affected bits; the 2^N x 2^N operators
are never formed.

All named variants have real Kraus operators, so a real initial state stays
real. Complex input is handled by evolving its real and imaginary parts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channels import build_classical_kraus, build_classical_transition, kraus_for_variant
from .configspace import MAX_EXACT_SITES, ChainGeometry, zero_magnetization_indices

log = logging.getLogger(__name__)

TRACE_RENORM_TOL = 1e-10
TRACE_FAIL_TOL = 1e-8
MODES = ("quantum", "classical")


class CapacityError(RuntimeError):
    """Requested system does not fit the memory budget of the chosen engine."""


@dataclass
class EvolutionConfig:
    n_sites: int
    variant: str = "S0"
    mode: str = "quantum"
    n_mcs: int = 1
    snapshot_schedule: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_mcs < 0:
            raise ValueError("n_mcs must be non-negative")
        sched = list(self.snapshot_schedule)
        if sched != sorted(sched) or any(t < 0 or t > self.n_mcs for t in sched):
            raise ValueError("snapshot schedule must be sorted and within [0, n_mcs]")
        ChainGeometry(self.n_sites).require_dynamics()
        check_exact_size(self.n_sites)


def check_exact_size(n_sites: int):
    if n_sites > MAX_EXACT_SITES:
        need = (1 << (2 * n_sites)) * 8 * 3
        raise CapacityError(
            f"exact mode supports N <= {MAX_EXACT_SITES}; N={n_sites} needs "
            f"about {need / 2**30:.1f} GiB of working memory, use trajectory mode")


def n_sites_of(rho: np.ndarray) -> int:
    d = rho.shape[0]
    n = d.bit_length() - 1
    if rho.ndim not in (1, 2) or d != 1 << n or (rho.ndim == 2 and rho.shape != (d, d)):
        raise ValueError(f"not a 2^N dimensional state: shape {rho.shape}")
    return n


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ValueError unless rho is Hermitian, unit trace and has non-negative diagonal."""
    n_sites_of(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"density matrix not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace is {tr!r}")
    if np.min(np.diagonal(rho).real) < -1e-12:
        raise ValueError("density matrix has negative populations")


def initial_density_matrix(g: ChainGeometry) -> np.ndarray:
    """Uniform mixture of the zero-magnetization configurations."""
    n = g.n_sites
    check_exact_size(n)
    idx = zero_magnetization_indices(n)
    rho = np.zeros((g.dim, g.dim))
    rho[idx, idx] = 1.0 / len(idx)
    return rho


def _tables(k):
    # row tables are cached on the (immutable) channel object
    tabs = getattr(k, "_row_tables", None)
    if tabs is None:
        tabs = _kernels.row_tables(k.operators)
        try:
            object.__setattr__(k, "_row_tables", tabs)
        except (AttributeError, TypeError):
            pass
    return tabs


def _apply_real(kernel, rho, *args):
    if np.iscomplexobj(rho):
        re = kernel(np.ascontiguousarray(rho.real), *args)
        im = kernel(np.ascontiguousarray(rho.imag), *args)
        return re + 1j * im
    return kernel(np.ascontiguousarray(rho, dtype=np.float64), *args)


def apply_local_channel(rho: np.ndarray, site: int, k) -> np.ndarray:
    """``sum_a K_a^(q) rho K_a^(q)dag`` on the neighbourhood (q-1, q, q+1) mod N."""
    n = n_sites_of(rho)
    if n < 3:
        raise ValueError("a three-spin channel needs at least three sites")
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for N={n}")
    cols, vals, nnz = _tables(k)
    return _apply_real(_kernels.local_channel, rho, n, site, cols, vals, nnz)


def apply_uniform_mixture_step(rho: np.ndarray, k) -> np.ndarray:
    """One elemental step: the average of the local channel over all sites."""
    n = n_sites_of(rho)
    cols, vals, nnz = _tables(k)
    return _apply_real(_kernels.mixture_channel, rho, n, cols, vals, nnz)


def dephase(rho: np.ndarray) -> np.ndarray:
    """Complete measurement in the configuration basis."""
    return np.diag(np.diagonal(rho).copy())


def classical_baseline_step(rho: np.ndarray, k=None) -> np.ndarray:
    """Mixture step sandwiched between complete measurements.

    Measuring first makes the result independent of which quantum extension
    ``k`` is (default S0): on diagonal input every extension reproduces the
    classical transition matrix.
    """
    if k is None:
        k = kraus_for_variant("S0")
    return dephase(apply_uniform_mixture_step(dephase(rho), k))


def classical_probability_step(p: np.ndarray, t=None) -> np.ndarray:
    """Diagonal-only form of :func:`classical_baseline_step`."""
    n = n_sites_of(p)
    if t is None:
        t = build_classical_transition()
    return _kernels.classical_mixture(np.ascontiguousarray(p, dtype=np.float64), n,
                                      np.ascontiguousarray(t))


def _check_trace(rho, t):
    tr = float(np.trace(rho).real) if rho.ndim == 2 else float(rho.sum())
    drift = abs(tr - 1.0)
    if drift > TRACE_FAIL_TOL:
        raise RuntimeError(f"trace drifted to {tr!r} at t={t} MCS")
    if drift > TRACE_RENORM_TOL:
        log.warning("renormalising trace drift %.3g at t=%s MCS", drift, t)
        rho /= tr
    return rho


def iter_states(rho0: np.ndarray, k, n_mcs: int, mode: str = "quantum",
                every: int | None = None):
    """Yield ``(t_mcs, state)`` at t=0 and then every ``every`` elemental steps.

    ``every`` defaults to N (once per MCS). In classical mode the state is the
    diagonal probability vector. Yielded arrays are owned by the iterator and
    are replaced, never mutated, on the next step; copy them to keep them.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n = n_sites_of(rho0)
    check_exact_size(n)
    every = n if every is None else every
    total = n_mcs * n
    if mode == "classical":
        state = np.diagonal(rho0).real.astype(np.float64) if rho0.ndim == 2 else rho0
        t = build_classical_transition()
        step = lambda s: classical_probability_step(s, t)  # noqa: E731
    else:
        state = rho0
        step = lambda s: apply_uniform_mixture_step(s, k)  # noqa: E731
    yield 0.0, state
    for s in range(1, total + 1):
        state = _check_trace(step(state), s / n)
        if s % every == 0:
            yield s / n, state


def run_mcs(rho: np.ndarray, k, n_mcs: int, schedule=None, mode: str = "quantum"):
    """Evolve for ``n_mcs`` Monte Carlo steps and return ``[(t, rho_copy), ...]``.

    ``schedule`` lists the integer MCS times to keep (default: every MCS).
    Snapshots are full density matrices in both modes.
    """
    n = n_sites_of(rho)
    if n_mcs < 0:
        raise ValueError("n_mcs must be non-negative")
    schedule = range(n_mcs + 1) if schedule is None else schedule
    keep = set(schedule)
    if any(t < 0 or t > n_mcs for t in keep):
        raise ValueError("snapshot schedule must lie within [0, n_mcs]")
    out = []
    for t, state in iter_states(rho, k, n_mcs, mode):
        if t in keep:
            out.append((t, np.diag(state) if state.ndim == 1 else state.copy()))
    return out


def kraus_for(variant):
    """Accept a variant name or anything exposing ``operators``."""
    if hasattr(variant, "operators"):
        return variant
    if variant == "classical":
        return build_classical_kraus()
    return kraus_for_variant(variant)
