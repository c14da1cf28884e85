"""numba kernels shared by the exact and trajectory engines.

Kraus operators are passed as row tables: for operator ``a`` and local output
index ``r``, ``cols[a, r, :nnz[a, r]]`` are the local input indices with
nonzero entries ``vals[a, r, :nnz[a, r]]``. Column tables use the same layout
on the transposed operators.
"""

import numba as nb
import numpy as np


def row_tables(ops):
    ops = [np.asarray(op, dtype=np.float64) for op in ops]
    a_count = len(ops)
    cols = np.zeros((a_count, 8, 8), np.int64)
    vals = np.zeros((a_count, 8, 8))
    nnz = np.zeros((a_count, 8), np.int64)
    for a, op in enumerate(ops):
        if op.shape != (8, 8):
            raise ValueError("local operators must be 8x8")
        for r in range(8):
            c = np.nonzero(op[r])[0]
            nnz[a, r] = len(c)
            cols[a, r, :len(c)] = c
            vals[a, r, :len(c)] = op[r, c]
    return cols, vals, nnz


def column_tables(ops):
    return row_tables([np.asarray(op).T for op in ops])


@nb.njit(cache=True, nogil=True)
def site_maps(n, q):
    """Local index, environment bits and local->global bit placement for site q."""
    d = 1 << n
    lo = (q - 1) % n
    hi = (q + 1) % n
    mask = (1 << lo) | (1 << q) | (1 << hi)
    loc = np.empty(d, np.int64)
    base = np.empty(d, np.int64)
    for i in range(d):
        loc[i] = ((i >> lo) & 1) | (((i >> q) & 1) << 1) | (((i >> hi) & 1) << 2)
        base[i] = i & ~mask
    place = np.empty(8, np.int64)
    for u in range(8):
        place[u] = ((u & 1) << lo) | (((u >> 1) & 1) << q) | (((u >> 2) & 1) << hi)
    return loc, base, place


@nb.njit(cache=True, nogil=True)
def _accumulate_site(rho, out, tmp, loc, base, place, cols, vals, nnz):
    # out += sum_a K_a rho K_a^T for one site; rho, out, tmp are d x d real
    d = rho.shape[0]
    for a in range(cols.shape[0]):
        for i in range(d):
            r = loc[i]
            row = tmp[i]
            row[:] = 0.0
            for u in range(nnz[a, r]):
                src = rho[base[i] | place[cols[a, r, u]]]
                v = vals[a, r, u]
                for j in range(d):
                    row[j] += v * src[j]
        for i in range(d):
            ti = tmp[i]
            oi = out[i]
            for j in range(d):
                c = loc[j]
                bj = base[j]
                s = 0.0
                for w in range(nnz[a, c]):
                    s += vals[a, c, w] * ti[bj | place[cols[a, c, w]]]
                oi[j] += s


@nb.njit(cache=True, nogil=True)
def local_channel(rho, n, q, cols, vals, nnz):
    out = np.zeros_like(rho)
    tmp = np.empty_like(rho)
    loc, base, place = site_maps(n, q)
    _accumulate_site(rho, out, tmp, loc, base, place, cols, vals, nnz)
    return out


@nb.njit(cache=True, nogil=True)
def mixture_channel(rho, n, cols, vals, nnz):
    out = np.zeros_like(rho)
    tmp = np.empty_like(rho)
    for q in range(n):
        loc, base, place = site_maps(n, q)
        _accumulate_site(rho, out, tmp, loc, base, place, cols, vals, nnz)
    out /= n
    return out


@nb.njit(cache=True, nogil=True)
def classical_mixture(p, n, t):
    """One averaged elemental step of the classical chain on a probability vector."""
    d = p.shape[0]
    out = np.zeros_like(p)
    for q in range(n):
        loc, base, place = site_maps(n, q)
        for j in range(d):
            pj = p[j]
            if pj == 0.0:
                continue
            c = loc[j]
            for r in range(8):
                w = t[r, c]
                if w != 0.0:
                    out[base[j] | place[r]] += w * pj
    out /= n
    return out


@nb.njit(cache=True, nogil=True)
def apply_op_sparse(keys, amps, n, q, cols, vals, nnz, a):
    """K|psi> for a sparse state given by sorted ``keys`` and ``amps``.

    ``cols/vals/nnz`` are column tables; ``a`` selects the operator. Returns sorted,
    duplicate-merged keys and amplitudes; exact zeros are dropped.
    """
    lo = (q - 1) % n
    hi = (q + 1) % n
    mask = (1 << lo) | (1 << q) | (1 << hi)
    m = keys.shape[0]
    nk = np.empty(m * 2, np.int64)
    na = np.empty(m * 2)
    cnt = 0
    for e in range(m):
        k = keys[e]
        c = ((k >> lo) & 1) | (((k >> q) & 1) << 1) | (((k >> hi) & 1) << 2)
        b = k & ~mask
        for w in range(nnz[a, c]):
            u = cols[a, c, w]
            if cnt == nk.shape[0]:
                nk2 = np.empty(cnt * 2, np.int64)
                na2 = np.empty(cnt * 2)
                nk2[:cnt] = nk[:cnt]
                na2[:cnt] = na[:cnt]
                nk, na = nk2, na2
            nk[cnt] = b | ((u & 1) << lo) | (((u >> 1) & 1) << q) | (((u >> 2) & 1) << hi)
            na[cnt] = vals[a, c, w] * amps[e]
            cnt += 1
    order = np.argsort(nk[:cnt], kind="mergesort")
    ok = np.empty(cnt, np.int64)
    oa = np.empty(cnt)
    out = 0
    for t in range(cnt):
        idx = order[t]
        if out > 0 and ok[out - 1] == nk[idx]:
            oa[out - 1] += na[idx]
        else:
            ok[out] = nk[idx]
            oa[out] = na[idx]
            out += 1
    keep = 0
    for t in range(out):
        if oa[t] != 0.0:
            ok[keep] = ok[t]
            oa[keep] = oa[t]
            keep += 1
    return ok[:keep].copy(), oa[:keep].copy()


@nb.njit(cache=True, nogil=True)
def apply_op_dense(psi, n, q, cols, vals, nnz, a):
    """K_a|psi> for a dense real state vector (column tables)."""
    d = psi.shape[0]
    lo = (q - 1) % n
    hi = (q + 1) % n
    mask = (1 << lo) | (1 << q) | (1 << hi)
    out = np.zeros_like(psi)
    for k in range(d):
        amp = psi[k]
        if amp == 0.0:
            continue
        c = ((k >> lo) & 1) | (((k >> q) & 1) << 1) | (((k >> hi) & 1) << 2)
        b = k & ~mask
        for w in range(nnz[a, c]):
            u = cols[a, c, w]
            out[b | ((u & 1) << lo) | (((u >> 1) & 1) << q) | (((u >> 2) & 1) << hi)] += vals[a, c, w] * amp
    return out


@nb.njit(cache=True, nogil=True)
def _prune_sparse(keys, amps, eps):
    keep = 0
    dropped = 0
    for t in range(keys.shape[0]):
        if amps[t] * amps[t] < eps:
            dropped += 1
        else:
            keys[keep] = keys[t]
            amps[keep] = amps[t]
            keep += 1
    return keys[:keep], amps[:keep], dropped


@nb.njit(cache=True, nogil=True)
def advance_sparse(keys, amps, n, site_u, branch_u, cols, vals, nnz, eps):
    """Run len(site_u) unravelling steps on a sparse state.

    Returns (keys, amps, pruned, status); status is 0 on success and the
    failing step index + 1 if no branch had weight above 1e-14.
    """
    n_ops = cols.shape[0]
    pruned = 0
    for s in range(site_u.shape[0]):
        q = min(int(site_u[s] * n), n - 1)
        u = branch_u[s]
        cum = 0.0
        last_k = keys
        last_a = amps
        last_p = 0.0
        for a in range(n_ops):
            bk, ba = apply_op_sparse(keys, amps, n, q, cols, vals, nnz, a)
            p = 0.0
            for t in range(ba.shape[0]):
                p += ba[t] * ba[t]
            if p > 1e-14:
                last_k, last_a, last_p = bk, ba, p
            cum += p
            if u < cum and p > 1e-14:
                break
        if last_p <= 1e-14:
            return keys, amps, pruned, s + 1
        # u beyond the accumulated weight only through rounding: take the last live branch
        keys = last_k
        amps = last_a / np.sqrt(last_p)
        if eps > 0.0:
            keys, amps, dropped = _prune_sparse(keys, amps, eps)
            if dropped:
                pruned += dropped
                amps = amps / np.sqrt(np.sum(amps * amps))
    return keys, amps, pruned, 0


@nb.njit(cache=True, nogil=True)
def advance_dense(psi, n, site_u, branch_u, cols, vals, nnz, eps):
    """Dense-vector twin of :func:`advance_sparse`."""
    n_ops = cols.shape[0]
    pruned = 0
    for s in range(site_u.shape[0]):
        q = min(int(site_u[s] * n), n - 1)
        u = branch_u[s]
        cum = 0.0
        last = psi
        last_p = 0.0
        for a in range(n_ops):
            b = apply_op_dense(psi, n, q, cols, vals, nnz, a)
            p = 0.0
            for t in range(b.shape[0]):
                p += b[t] * b[t]
            if p > 1e-14:
                last, last_p = b, p
            cum += p
            if u < cum and p > 1e-14:
                break
        if last_p <= 1e-14:
            return psi, pruned, s + 1
        psi = last / np.sqrt(last_p)
        if eps > 0.0:
            dropped = 0
            for t in range(psi.shape[0]):
                if psi[t] != 0.0 and psi[t] * psi[t] < eps:
                    psi[t] = 0.0
                    dropped += 1
            if dropped:
                pruned += dropped
                psi = psi / np.sqrt(np.sum(psi * psi))
    return psi, pruned, 0
