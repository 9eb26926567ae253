"""Hot loops for the decoders and the queue walk.

Everything here is written in nopython-compatible style: scalars and numpy
arrays only, no Python objects.  When numba is installed the loops JIT to
native code; without it they still run, just slowly.

The Fano iteration (look forward, else move back, else loosen the threshold)
is spelled out textually inside each run loop instead of living in a shared
helper.  Factoring it out costs 10x at runtime: numba compiles the helper as
an out-of-line call (and its own inliner generates even slower code), and the
per-iteration call overhead dwarfs the few table lookups the step performs.
Keep the three copies in sync by hand.

Status codes returned by the run loops:
    0  decoded (a full path was committed)
    1  cycle cap hit
    2  audit failure (path metric fell below the threshold; a bug trap)
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def run_ufa(rx, branch_out, next_state, dist_metric, pc, n_info,
            delta_fp, max_cycles, audit):
    """Unidirectional Fano search over one received frame of packed symbols.

    The search keeps, per depth, the node state, the cumulative fixed-point
    metric, the committed branch input, and a pointer into the metric-ordered
    branch list (0 = best).  Each cycle performs one action: a forward move
    to the try-pointer's branch if its path metric clears the threshold, else
    a back move if the predecessor is still above the threshold, else a
    threshold loosening in place.  Tightening happens only on a first visit,
    detected by the classic memoryless test: the origin node of the forward
    move had metric below T + delta.
    """
    frame_len = rx.shape[0]
    node_state = np.zeros(frame_len + 1, np.int64)
    node_metric = np.zeros(frame_len + 1, np.int64)
    chosen = np.zeros(frame_len, np.uint8)
    try_at = np.zeros(frame_len + 1, np.int64)
    d = 0
    T = 0
    cycles = 0
    while cycles < max_cycles:
        cycles += 1
        if audit and node_metric[d] < T:
            return cycles, 2, chosen
        forward = False
        n_br = 1 if d >= n_info else 2
        t = try_at[d]
        if t < n_br:
            s = node_state[d]
            r = rx[d]
            m0 = dist_metric[pc[branch_out[s, 0] ^ r]]
            if n_br == 2:
                m1 = dist_metric[pc[branch_out[s, 1] ^ r]]
                best = 1 if m1 > m0 else 0
                b = best if t == 0 else 1 - best
                bm = m1 if b == 1 else m0
            else:
                b = 0
                bm = m0
            m = node_metric[d] + bm
            if m >= T:
                prev = node_metric[d]
                chosen[d] = b
                d += 1
                node_state[d] = next_state[s, b]
                node_metric[d] = m
                try_at[d] = 0
                if prev < T + delta_fp:
                    T += delta_fp * ((m - T) // delta_fp)
                forward = True
                if d == frame_len:
                    return cycles, 0, chosen
        if not forward:
            if d > 0 and node_metric[d - 1] >= T:
                d -= 1
                try_at[d] += 1
            else:
                # At the origin, or the predecessor is below threshold:
                # stay put and loosen.  The next look starts from the best
                # branch again.
                T -= delta_fp
                try_at[d] = 0
    return max_cycles, 1, chosen


@njit(cache=True)
def run_bfa(rx_f, rx_b, bo_f, ns_f, bo_b, ns_b, dist_metric, pc,
            n_info, k, delta_fp, max_cycles, audit):
    """Bidirectional Fano search: forward and backward machines in lockstep.

    The backward machine decodes the time-reversed code (bit-reversed
    generators, branch symbols consumed back to front), so its branch m
    commits the forward-frame input bit n_info - 1 - m.  Both machines take
    one iteration per cycle; after each cycle the loop checks, in order,
    forward completion, backward completion, and a merge.

    Merge rule: once the two depths cover the frame (d_f + d_b >= frame
    length) the backward path pins down every bit of the forward machine's
    encoder state window; the machines merge when those K-1 bits agree.
    On overlap the forward path wins.
    """
    frame_len = rx_f.shape[0]
    ns_arr_f = np.zeros(frame_len + 1, np.int64)
    nm_f = np.zeros(frame_len + 1, np.int64)
    ch_f = np.zeros(frame_len, np.uint8)
    tr_f = np.zeros(frame_len + 1, np.int64)
    ns_arr_b = np.zeros(frame_len + 1, np.int64)
    nm_b = np.zeros(frame_len + 1, np.int64)
    ch_b = np.zeros(frame_len, np.uint8)
    tr_b = np.zeros(frame_len + 1, np.int64)
    out = np.zeros(frame_len, np.uint8)
    df = 0
    db = 0
    Tf = 0
    Tb = 0
    cycles = 0
    while cycles < max_cycles:
        cycles += 1
        if audit and (nm_f[df] < Tf or nm_b[db] < Tb):
            return cycles, 2, out
        # Forward machine, one iteration.
        fwd = False
        n_br = 1 if df >= n_info else 2
        t = tr_f[df]
        if t < n_br:
            s = ns_arr_f[df]
            r = rx_f[df]
            m0 = dist_metric[pc[bo_f[s, 0] ^ r]]
            if n_br == 2:
                m1 = dist_metric[pc[bo_f[s, 1] ^ r]]
                best = 1 if m1 > m0 else 0
                b = best if t == 0 else 1 - best
                bm = m1 if b == 1 else m0
            else:
                b = 0
                bm = m0
            m = nm_f[df] + bm
            if m >= Tf:
                prev = nm_f[df]
                ch_f[df] = b
                df += 1
                ns_arr_f[df] = ns_f[s, b]
                nm_f[df] = m
                tr_f[df] = 0
                if prev < Tf + delta_fp:
                    Tf += delta_fp * ((m - Tf) // delta_fp)
                fwd = True
        if not fwd:
            if df > 0 and nm_f[df - 1] >= Tf:
                df -= 1
                tr_f[df] += 1
            else:
                Tf -= delta_fp
                tr_f[df] = 0
        # Backward machine, one iteration.
        fwd = False
        n_br = 1 if db >= n_info else 2
        t = tr_b[db]
        if t < n_br:
            s = ns_arr_b[db]
            r = rx_b[db]
            m0 = dist_metric[pc[bo_b[s, 0] ^ r]]
            if n_br == 2:
                m1 = dist_metric[pc[bo_b[s, 1] ^ r]]
                best = 1 if m1 > m0 else 0
                b = best if t == 0 else 1 - best
                bm = m1 if b == 1 else m0
            else:
                b = 0
                bm = m0
            m = nm_b[db] + bm
            if m >= Tb:
                prev = nm_b[db]
                ch_b[db] = b
                db += 1
                ns_arr_b[db] = ns_b[s, b]
                nm_b[db] = m
                tr_b[db] = 0
                if prev < Tb + delta_fp:
                    Tb += delta_fp * ((m - Tb) // delta_fp)
                fwd = True
        if not fwd:
            if db > 0 and nm_b[db - 1] >= Tb:
                db -= 1
                tr_b[db] += 1
            else:
                Tb -= delta_fp
                tr_b[db] = 0
        if df == frame_len:
            for i in range(frame_len):
                out[i] = ch_f[i]
            return cycles, 0, out
        if db == frame_len:
            for i in range(frame_len):
                out[i] = ch_b[n_info - 1 - i] if i < n_info else 0
            return cycles, 0, out
        if df + db >= frame_len:
            ok = True
            for j in range(k - 1):
                i = df - 1 - j
                if i < 0:
                    fd = 0
                    bd = 0
                else:
                    fd = ch_f[i]
                    bd = ch_b[n_info - 1 - i] if i < n_info else 0
                if fd != bd:
                    ok = False
                    break
            if ok:
                for i in range(frame_len):
                    if i < df:
                        out[i] = ch_f[i]
                    elif i < n_info:
                        out[i] = ch_b[n_info - 1 - i]
                    else:
                        out[i] = 0
                return cycles, 0, out
    return max_cycles, 1, out


@njit(cache=True)
def queue_walk(deltas, omega):
    """Embedded-epoch buffer walk over precomputed occupancy increments.

    States are 0-based occupancies 0 .. omega-1.  A step that would pass the
    top state is an erasure: the counter increments and the walk lands on the
    saturated top state.  Returns (n_erased, per-state visit counts).
    """
    visits = np.zeros(omega, np.int64)
    i = 0
    erased = 0
    top = omega - 1
    for t in range(deltas.shape[0]):
        j = i + deltas[t]
        if j > top:
            erased += 1
            j = top
        elif j < 0:
            j = 0
        i = j
        visits[i] += 1
    return erased, visits
