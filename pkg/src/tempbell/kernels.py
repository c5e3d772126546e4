"""Inner loops for run sampling and the configuration grid scan.

Every kernel has two implementations with identical outputs: a numba
``@njit`` loop and a vectorized numpy version. ``TBS_NO_NUMBA=1`` (or a
missing numba install) selects numpy. Randomness never enters a kernel;
callers pass pre-drawn uniforms, which is what keeps the two paths
bit-identical.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("TBS_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def numba_enabled() -> bool:
    return HAVE_NUMBA and not _env_disabled()


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=False, nogil=True)(fn)
    return fn


# objective ids understood by the grid kernels
OBJ_INEQ16 = 0
OBJ_INEQ18 = 1

TRACE_CAP = 4096


# --------------------------------------------------------------------------
# joint-reality runs
# --------------------------------------------------------------------------

def reality_cdf(weights: np.ndarray) -> np.ndarray:
    """Cumulative weights, pinned to exactly 1 from the last non-zero entry on."""
    w = np.asarray(weights, dtype=np.float64)
    cdf = np.cumsum(w)
    last = int(np.flatnonzero(w > 0)[-1])
    cdf[last:] = 1.0
    return cdf


@_njit
def _lhv_runs_loop(u_real, u_pair, cdf, first, second, o1, o2, hidden):
    n = u_real.shape[0]
    for i in range(n):
        u = u_real[i]
        k = 0
        while k < 7 and u >= cdf[k]:
            k += 1
        p = int(u_pair[i] * 9.0)
        if p > 8:
            p = 8
        s1 = p // 3
        s2 = p - 3 * s1
        first[i] = s1
        second[i] = s2
        hidden[i] = k
        o1[i] = 1 - 2 * ((k >> (2 - s1)) & 1)
        o2[i] = 1 - 2 * ((k >> (2 - s2)) & 1)


def _lhv_runs_numpy(u_real, u_pair, cdf, first, second, o1, o2, hidden):
    k = np.searchsorted(cdf, u_real, side="right")
    np.minimum(k, 7, out=k)
    p = np.minimum((u_pair * 9.0).astype(np.int64), 8)
    s1 = p // 3
    s2 = p - 3 * s1
    first[:] = s1
    second[:] = s2
    hidden[:] = k
    o1[:] = 1 - 2 * ((k >> (2 - s1)) & 1)
    o2[:] = 1 - 2 * ((k >> (2 - s2)) & 1)


def lhv_runs(u_real, u_pair, cdf, use_numba=None):
    """Decode uniforms into joint-reality runs.

    Returns ``(first, second, o1, o2, hidden)`` int8 arrays; ``hidden`` is the
    reality index (bit 2-s set means setting s reads -1).
    """
    n = u_real.shape[0]
    first = np.empty(n, np.int8)
    second = np.empty(n, np.int8)
    o1 = np.empty(n, np.int8)
    o2 = np.empty(n, np.int8)
    hidden = np.empty(n, np.int8)
    if use_numba is None:
        use_numba = numba_enabled()
    fn = _lhv_runs_loop if use_numba else _lhv_runs_numpy
    fn(u_real, u_pair, cdf, first, second, o1, o2, hidden)
    return first, second, o1, o2, hidden


# --------------------------------------------------------------------------
# sequential qubit runs
# --------------------------------------------------------------------------

@_njit
def _pairs_loop(u_pair, first, second):
    for i in range(u_pair.shape[0]):
        p = int(u_pair[i] * 9.0)
        if p > 8:
            p = 8
        first[i] = p // 3
        second[i] = p - 3 * (p // 3)


def _pairs_numpy(u_pair, first, second):
    p = np.minimum((u_pair * 9.0).astype(np.int64), 8)
    first[:] = p // 3
    second[:] = p - 3 * (p // 3)


def decode_pairs(u_pair, use_numba=None):
    """Map uniforms to one of the 9 ordered setting pairs."""
    n = u_pair.shape[0]
    first = np.empty(n, np.int8)
    second = np.empty(n, np.int8)
    if use_numba is None:
        use_numba = numba_enabled()
    (_pairs_loop if use_numba else _pairs_numpy)(u_pair, first, second)
    return first, second


@_njit
def _qubit_runs_loop(first, second, u1, u2, p_first, p_second, retain, o1, o2):
    for i in range(first.shape[0]):
        s1 = first[i]
        a = 1 if u1[i] < p_first[s1] else -1
        o1[i] = a
        if retain != 0 and a != retain:
            o2[i] = 0
            continue
        br = 0 if a > 0 else 1
        o2[i] = 1 if u2[i] < p_second[br, s1, second[i]] else -1


def _qubit_runs_numpy(first, second, u1, u2, p_first, p_second, retain, o1, o2):
    f = first.astype(np.intp)
    s = second.astype(np.intp)
    a = np.where(u1 < p_first[f], 1, -1)
    br = (a < 0).astype(np.intp)
    b = np.where(u2 < p_second[br, f, s], 1, -1)
    if retain != 0:
        b[a != retain] = 0
    o1[:] = a
    o2[:] = b


def qubit_runs(first, second, u1, u2, p_first, p_second, retain=0, use_numba=None):
    """Born-sample both outcomes of each run.

    ``p_first[s]`` is P(+) for the first measurement along setting s;
    ``p_second[branch, s, t]`` is P(+) for the second measurement along t
    after the first collapsed onto branch (0: +, 1: -) of s. With ``retain``
    set to +1/-1, runs whose first outcome differs are discarded and their
    second outcome is stored as 0.
    """
    n = first.shape[0]
    o1 = np.empty(n, np.int8)
    o2 = np.empty(n, np.int8)
    if use_numba is None:
        use_numba = numba_enabled()
    fn = _qubit_runs_loop if use_numba else _qubit_runs_numpy
    fn(first, second, u1, u2, np.ascontiguousarray(p_first, dtype=np.float64),
       np.ascontiguousarray(p_second, dtype=np.float64), int(retain), o1, o2)
    return o1, o2


# --------------------------------------------------------------------------
# grid scan over gauge-fixed configurations
# --------------------------------------------------------------------------
# a = +z, b = (sin tb, 0, cos tb), c = (sin tc cos pc, sin tc sin pc, cos tc).
# Flat index = (ib * n_tc + ic) * n_pc + ip.

@_njit
def _objective_scalar(obj, ab, ac, bc):
    if obj == OBJ_INEQ16:
        return ab - ac + bc
    return ab + bc - 2.0 * ac + ab * bc


@_njit
def _grid_loop(obj, sin_tb, cos_tb, sin_tc, cos_tc, cos_pc, imp_idx, imp_val, tie_idx):
    n_tc = sin_tc.shape[0]
    n_pc = cos_pc.shape[0]
    best = -np.inf
    best_idx = -1
    n_imp = 0
    n_tie_buf = 0
    n_ties = 0
    for ib in range(sin_tb.shape[0]):
        sb = sin_tb[ib]
        cb = cos_tb[ib]
        for ic in range(n_tc):
            sbc = sb * sin_tc[ic]
            cbc = cb * cos_tc[ic]
            cc = cos_tc[ic]
            for ip in range(n_pc):
                bc = sbc * cos_pc[ip] + cbc
                v = _objective_scalar(obj, cb, cc, bc)
                if v >= best:
                    flat = (ib * n_tc + ic) * n_pc + ip
                    if v > best:
                        best = v
                        best_idx = flat
                        n_ties = 0
                        n_tie_buf = 0
                        if n_imp < imp_idx.shape[0]:
                            imp_idx[n_imp] = flat
                            imp_val[n_imp] = v
                            n_imp += 1
                    else:
                        n_ties += 1
                        if n_tie_buf < tie_idx.shape[0]:
                            tie_idx[n_tie_buf] = flat
                            n_tie_buf += 1
    return best, best_idx, n_imp, n_tie_buf, n_ties


def _grid_slab_values(obj, sb, cb, sc, cc, cos_pc):
    bc = (sb * sc)[:, None] * cos_pc[None, :] + (cb * cc)[:, None]
    ab = cb
    ac = np.broadcast_to(cc[:, None], bc.shape)
    if callable(obj):
        return np.broadcast_to(np.asarray(obj(ab, ac, bc), dtype=np.float64), bc.shape)
    if obj == OBJ_INEQ16:
        return ab - ac + bc
    return ab + bc - 2.0 * ac + ab * bc


def _grid_numpy(obj, sin_tb, cos_tb, sc, cc, cos_pc, imp_idx, imp_val, tie_idx):
    n_tc = sc.shape[0]
    n_pc = cos_pc.shape[0]
    best = -np.inf
    best_idx = -1
    n_imp = 0
    n_tie_buf = 0
    n_ties = 0
    for ib in range(sin_tb.shape[0]):
        vals = _grid_slab_values(obj, sin_tb[ib], cos_tb[ib], sc, cc, cos_pc).ravel()
        if vals.max() < best:
            continue
        # running best seen before each position, seeded with the carried best
        prior = np.empty_like(vals)
        prior[0] = best
        if vals.size > 1:
            np.maximum.accumulate(vals[:-1], out=prior[1:])
            np.maximum(prior[1:], best, out=prior[1:])
        events = np.flatnonzero(vals >= prior)
        if not events.size:
            continue
        base = ib * n_tc * n_pc
        improving = vals[events] > prior[events]
        imps = events[improving]
        if imps.size:
            best = float(vals[imps[-1]])
            best_idx = base + int(imps[-1])
            take = min(imp_idx.shape[0] - n_imp, imps.size)
            imp_idx[n_imp:n_imp + take] = base + imps[:take]
            imp_val[n_imp:n_imp + take] = vals[imps[:take]]
            n_imp += take
            ties = events[events > imps[-1]]
            n_ties = 0
            n_tie_buf = 0
        else:
            ties = events
        n_ties += int(ties.size)
        take = min(tie_idx.shape[0] - n_tie_buf, ties.size)
        tie_idx[n_tie_buf:n_tie_buf + take] = base + ties[:take]
        n_tie_buf += take
    return best, best_idx, n_imp, n_tie_buf, n_ties


def grid_scan(obj, tb, tc, pc, use_numba=None, trace_cap=TRACE_CAP):
    """Exhaustive scan; ``obj`` is an objective id or a vectorized callable.

    Returns ``(best, best_flat_index, trace_indices, trace_values, n_ties)``.
    The trace lists, in scan order, every strict improvement followed by the
    later grid points that tie the final best (each part capped at
    ``trace_cap``). Callables always take the numpy path.
    """
    tb = np.asarray(tb, dtype=np.float64)
    tc = np.asarray(tc, dtype=np.float64)
    pc = np.asarray(pc, dtype=np.float64)
    # trig tables come from numpy so both paths see identical inputs
    trig = (np.sin(tb), np.cos(tb), np.sin(tc), np.cos(tc), np.cos(pc))
    imp_idx = np.zeros(trace_cap, np.int64)
    imp_val = np.zeros(trace_cap, np.float64)
    tie_idx = np.zeros(trace_cap, np.int64)
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba and not callable(obj):
        best, idx, n_imp, n_tie, ties = _grid_loop(int(obj), *trig, imp_idx, imp_val, tie_idx)
    else:
        best, idx, n_imp, n_tie, ties = _grid_numpy(obj, *trig, imp_idx, imp_val, tie_idx)
    t_idx = np.concatenate([imp_idx[:n_imp], tie_idx[:n_tie]])
    t_val = np.concatenate([imp_val[:n_imp], np.full(n_tie, best)])
    return float(best), int(idx), t_idx, t_val, int(ties)
